"""Hierarchical Bayesian normalization of expert ratings.

Scores are modeled as grand mean + rater effect + prompt effect + per-dimension
offset with a shared residual variance. A conjugate Gibbs sampler with
zero-centered normal priors partially pools raters and prompts, which adjusts
for individual rating tendency when raters are few. Rater and prompt effects
are reported in sum-to-zero form: the stored draw of the grand mean absorbs
their means, while the sampled chain itself stays on the unconstrained
posterior (feeding the centered state back into the chain would bias the
offset's marginal away from the exact conjugate posterior).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
import numpy as np

from .errors import (
    DimensionMismatchError,
    DuplicateCellError,
    InsufficientDataError,
    MalformedRowError,
    ScoreOutOfRangeError,
)

RATINGS_HEADER = ("rater_id", "prompt_id", "dimension", "score")

SCORE_MIN = 0.0
SCORE_MAX = 5.0


class Dimension(str, Enum):
    INFORMATION_RETRIEVAL = "InformationRetrieval"
    ANSWER_STABILITY = "AnswerStability"
    FACTUAL_ACCURACY = "FactualAccuracy"
    COMPARISON_CAPABILITY = "ComparisonCapability"


@dataclass(frozen=True)
class Rating:
    rater_id: str
    prompt_id: str
    dimension: Dimension
    score: float


@dataclass
class RatingTable:
    rows: list[Rating]

    def __post_init__(self):
        seen = set()
        for row in self.rows:
            key = (row.rater_id, row.prompt_id, row.dimension)
            if key in seen:
                raise DuplicateCellError(f"duplicate cell {key}")
            seen.add(key)
            if not (SCORE_MIN <= row.score <= SCORE_MAX):
                raise ScoreOutOfRangeError(f"score {row.score} outside [{SCORE_MIN}, {SCORE_MAX}]")

    def __len__(self) -> int:
        return len(self.rows)

    def raters(self, dimension: Dimension | None = None) -> list[str]:
        return sorted({r.rater_id for r in self.rows if dimension is None or r.dimension is dimension})

    def prompts(self, dimension: Dimension | None = None) -> list[str]:
        return sorted({r.prompt_id for r in self.rows if dimension is None or r.dimension is dimension})

    def dimensions(self) -> list[Dimension]:
        return sorted({r.dimension for r in self.rows}, key=lambda d: d.value)


def load_ratings(source) -> RatingTable:
    """Read a ratings CSV with header rater_id,prompt_id,dimension,score."""
    if hasattr(source, "read"):
        reader = csv.reader(source)
    else:
        reader = csv.reader(open(source, "r", encoding="utf-8", newline=""))
    rows = []
    header = next(reader, None)
    if header is None or tuple(h.strip() for h in header) != RATINGS_HEADER:
        raise MalformedRowError(f"expected header {','.join(RATINGS_HEADER)}")
    for line_no, raw in enumerate(reader, start=2):
        if not raw or all(not cell.strip() for cell in raw):
            continue
        if len(raw) != 4:
            raise MalformedRowError(f"line {line_no}: expected 4 columns, got {len(raw)}")
        rater, prompt, dim_name, score_text = (cell.strip() for cell in raw)
        if not rater or not prompt:
            raise MalformedRowError(f"line {line_no}: empty rater or prompt id")
        try:
            dimension = Dimension(dim_name)
        except ValueError as exc:
            raise MalformedRowError(f"line {line_no}: unknown dimension {dim_name!r}") from exc
        try:
            score = float(score_text)
        except ValueError as exc:
            raise MalformedRowError(f"line {line_no}: score {score_text!r} is not a number") from exc
        rows.append(Rating(rater, prompt, dimension, score))
    return RatingTable(rows)


# -- model ----------------------------------------------------------------------------

@dataclass(frozen=True)
class GibbsPriors:
    """Weakly-informative defaults for a 0-5 rating scale, all overridable."""

    mean_loc: float = 2.5
    mean_var: float = 100.0
    rater_var: float = 1.0
    prompt_var: float = 1.0
    dimension_var: float = 1.0
    resid_shape: float = 2.0  # inverse-gamma a0
    resid_scale: float = 1.0  # inverse-gamma b0


@dataclass
class ParameterSummary:
    name: str
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    ess: float
    rhat: float

    def to_json_dict(self) -> dict:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "ci95": [self.ci_low, self.ci_high],
            "ess": self.ess,
            "rhat": self.rhat,
        }


@dataclass
class PosteriorSummary:
    dimension: Dimension
    parameters: dict[str, ParameterSummary]
    n_samples: int
    n_burnin: int
    seed: int
    convergence_warning: bool
    draws: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def parameter(self, name: str) -> ParameterSummary:
        return self.parameters[name]

    def rater_effects(self) -> dict[str, float]:
        prefix = "rater:"
        return {
            name[len(prefix):]: p.mean for name, p in self.parameters.items() if name.startswith(prefix)
        }

    @property
    def dimension_effect(self) -> ParameterSummary:
        return self.parameters[f"dimension:{self.dimension.value}"]

    def to_json(self) -> str:
        return json.dumps(
            {
                "dimension": self.dimension.value,
                "n_samples": self.n_samples,
                "n_burnin": self.n_burnin,
                "seed": self.seed,
                "convergence_warning": self.convergence_warning,
                "parameters": {name: p.to_json_dict() for name, p in sorted(self.parameters.items())},
            },
            indent=2,
            sort_keys=True,
        )


def fit(
    table: RatingTable,
    dimension: Dimension,
    priors: GibbsPriors | None = None,
    n_samples: int = 10_000,
    n_burnin: int = 2_000,
    seed: int | None = None,
) -> PosteriorSummary:
    """Fit the partial-pooling model by Gibbs sampling and summarize the draws.

    All dimensions present in the table are fit jointly, each with its own
    offset; `dimension` names the offset reported as the headline effect.
    Each sweep draws the whole location block (mean, every rater effect,
    every prompt effect, every dimension offset) from its exact conjugate
    normal conditional, then the residual variance from its inverse-gamma
    conditional, so a fixed seed reproduces the chain bit for bit.
    """
    if seed is None:
        raise ValueError("seed is required; chains must be reproducible")
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    priors = priors or GibbsPriors()

    dim_rows = [r for r in table.rows if r.dimension is dimension]
    if len({r.rater_id for r in dim_rows}) < 2 or len({r.prompt_id for r in dim_rows}) < 2:
        raise InsufficientDataError(
            f"{dimension.value} needs at least 2 raters and 2 prompts"
        )

    raters = table.raters()
    prompt_keys = sorted({(r.dimension.value, r.prompt_id) for r in table.rows})
    dims = table.dimensions()
    rater_pos = {r: i for i, r in enumerate(raters)}
    prompt_pos = {p: i for i, p in enumerate(prompt_keys)}
    dim_pos = {d: i for i, d in enumerate(dims)}

    y = np.array([r.score for r in table.rows], dtype=np.float64)
    ri = np.array([rater_pos[r.rater_id] for r in table.rows], dtype=np.intp)
    pi = np.array([prompt_pos[(r.dimension.value, r.prompt_id)] for r in table.rows], dtype=np.intp)
    di = np.array([dim_pos[r.dimension] for r in table.rows], dtype=np.intp)
    n = len(y)
    n_raters, n_prompts, n_dims = len(raters), len(prompt_keys), len(dims)

    rng = np.random.default_rng(seed)

    # One location block: [mean, rater effects, prompt effects, dimension offsets].
    # Conditional on the residual variance the block is jointly Gaussian, so it
    # is drawn exactly in one conjugate multivariate-normal update per sweep.
    # (A parameter-at-a-time scan freezes on the mean/offset likelihood ridge
    # once the residual variance collapses, e.g. on all-equal scores.)
    p = 1 + n_raters + n_prompts + n_dims
    design = np.zeros((n, p))
    design[:, 0] = 1.0
    design[np.arange(n), 1 + ri] = 1.0
    design[np.arange(n), 1 + n_raters + pi] = 1.0
    design[np.arange(n), 1 + n_raters + n_prompts + di] = 1.0
    xtx = design.T @ design
    xty = design.T @ y
    prior_mean = np.zeros(p)
    prior_mean[0] = priors.mean_loc
    prior_precision = np.concatenate(
        [
            [1.0 / priors.mean_var],
            np.full(n_raters, 1.0 / priors.rater_var),
            np.full(n_prompts, 1.0 / priors.prompt_var),
            np.full(n_dims, 1.0 / priors.dimension_var),
        ]
    )

    sigma2 = 1.0
    total = n_burnin + n_samples
    out_mu = np.empty(n_samples)
    out_alpha = np.empty((n_samples, n_raters))
    out_theta = np.empty((n_samples, n_prompts))
    out_gamma = np.empty((n_samples, n_dims))
    out_sigma2 = np.empty(n_samples)

    a_shape = priors.resid_shape + n / 2.0
    for sweep in range(total):
        precision = xtx / sigma2
        precision[np.diag_indices_from(precision)] += prior_precision
        chol = np.linalg.cholesky(precision)
        h = prior_precision * prior_mean + xty / sigma2
        mean = np.linalg.solve(precision, h)
        beta = mean + np.linalg.solve(chol.T, rng.standard_normal(p))

        resid = y - design @ beta
        scale = priors.resid_scale + 0.5 * float(resid @ resid)
        sigma2 = scale / rng.gamma(a_shape)

        if sweep >= n_burnin:
            k = sweep - n_burnin
            mu = beta[0]
            alpha = beta[1 : 1 + n_raters]
            theta = beta[1 + n_raters : 1 + n_raters + n_prompts]
            gamma = beta[1 + n_raters + n_prompts :]
            # centering step: report sum-to-zero effects, shift absorbed by the mean
            a_bar = alpha.mean()
            t_bar = theta.mean()
            out_mu[k] = mu + a_bar + t_bar
            out_alpha[k] = alpha - a_bar
            out_theta[k] = theta - t_bar
            out_gamma[k] = gamma
            out_sigma2[k] = sigma2

    draws: dict[str, np.ndarray] = {"grand_mean": out_mu, "resid_var": out_sigma2}
    for i, rater in enumerate(raters):
        draws[f"rater:{rater}"] = out_alpha[:, i]
    for i, (dim_name, prompt) in enumerate(prompt_keys):
        draws[f"prompt:{dim_name}/{prompt}"] = out_theta[:, i]
    for i, dim in enumerate(dims):
        draws[f"dimension:{dim.value}"] = out_gamma[:, i]

    parameters = {name: _summarize(name, chain) for name, chain in draws.items()}
    warning = any(p.rhat > 1.1 for p in parameters.values())
    return PosteriorSummary(
        dimension=dimension,
        parameters=parameters,
        n_samples=n_samples,
        n_burnin=n_burnin,
        seed=seed,
        convergence_warning=warning,
        draws=draws,
    )


def _summarize(name: str, chain: np.ndarray) -> ParameterSummary:
    low, high = np.percentile(chain, [2.5, 97.5])
    return ParameterSummary(
        name=name,
        mean=float(chain.mean()),
        sd=float(chain.std(ddof=1)),
        ci_low=float(low),
        ci_high=float(high),
        ess=effective_sample_size(chain),
        rhat=split_chain_rhat(chain),
    )


def effective_sample_size(chain: np.ndarray) -> float:
    """ESS from the autocorrelation series, truncated at the first
    non-positive pair sum (Geyer's initial positive sequence)."""
    n = len(chain)
    centered = chain - chain.mean()
    if not np.any(centered):
        return float(n)
    size = 1 << (2 * n - 1).bit_length()
    spectrum = np.fft.rfft(centered, size)
    acov = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n] / n
    if acov[0] <= 0:
        return float(n)
    rho = acov / acov[0]
    positive_sum = 0.0
    t = 1
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        positive_sum += pair
        t += 2
    ess = n / (1.0 + 2.0 * positive_sum)
    return float(min(n, max(1.0, ess)))


def split_chain_rhat(chain: np.ndarray) -> float:
    """Gelman-Rubin ratio on the two halves of a single chain."""
    half = len(chain) // 2
    if half < 2:
        return 1.0
    a, b = chain[:half], chain[half : 2 * half]
    within = (a.var(ddof=1) + b.var(ddof=1)) / 2.0
    if within == 0:
        return 1.0
    grand = (a.mean() + b.mean()) / 2.0
    between = half * ((a.mean() - grand) ** 2 + (b.mean() - grand) ** 2)
    var_plus = (half - 1) / half * within + between / half
    return float(math.sqrt(var_plus / within))


# -- adjusted scores ---------------------------------------------------------------------

@dataclass
class AdjustedScore:
    rater_id: str
    prompt_id: str
    score: float
    adjusted: float


@dataclass
class AdjustedScores:
    dimension: Dimension
    dimension_effect: float
    rows: list[AdjustedScore]


def adjusted_scores(table: RatingTable, summary: PosteriorSummary) -> AdjustedScores:
    """Bias-correct the summary dimension's scores by each rater's posterior
    mean effect, alongside the posterior-mean dimension offset."""
    rows = [r for r in table.rows if r.dimension is summary.dimension]
    if not rows:
        raise DimensionMismatchError(
            f"table has no rows for dimension {summary.dimension.value}"
        )
    effects = summary.rater_effects()
    missing = {r.rater_id for r in rows} - set(effects)
    if missing:
        raise DimensionMismatchError(
            f"summary lacks rater effects for: {', '.join(sorted(missing))}"
        )
    adjusted = [
        AdjustedScore(r.rater_id, r.prompt_id, r.score, r.score - effects[r.rater_id])
        for r in rows
    ]
    return AdjustedScores(
        dimension=summary.dimension,
        dimension_effect=summary.dimension_effect.mean,
        rows=adjusted,
    )
