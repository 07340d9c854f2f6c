"""Exception types shared across the package."""


class RobodexError(Exception):
    """Base class for all robodex errors."""


# -- schema / data model ------------------------------------------------------

class DuplicateLabelError(RobodexError):
    """A schema label with this name already exists for its kind."""


class LabelNotFoundError(RobodexError):
    """No schema label with this name."""


class NotProvisionalError(RobodexError):
    """Promotion requested for a label that is already core."""


# -- graph store ---------------------------------------------------------------

class UnknownLabelError(RobodexError):
    """Label is not declared in the active schema."""


class DatasetNotFoundError(RobodexError):
    """One or more DOIs did not resolve to a dataset node."""

    def __init__(self, missing: list[str]):
        self.missing = list(missing)
        super().__init__(f"unknown dataset(s): {', '.join(self.missing)}")


class StoreIoError(RobodexError):
    """Snapshot file could not be read or written."""


class CorruptStoreError(RobodexError):
    """Snapshot failed its integrity check."""


class SchemaViolationError(RobodexError):
    """A proposed node or edge is not permitted by the active schema."""


# -- harvesting ----------------------------------------------------------------

class NetworkError(RobodexError):
    """Repository endpoint unreachable or transport-level failure."""


class RecordNotFoundError(RobodexError):
    """The repository does not know this persistent identifier."""


class MalformedResponseError(RobodexError):
    """Repository reply was not a JSON document."""


class MissingIdentifierError(RobodexError):
    """Metadata export carries no persistent identifier."""


class MissingTitleError(RobodexError):
    """Metadata export carries no title."""


# -- data reports --------------------------------------------------------------

class EmptyDocumentError(RobodexError):
    """Document contains no content."""


class MalformedPatternError(RobodexError):
    """File-name pattern template cannot be compiled."""


class DuplicatePriorityError(RobodexError):
    """Two file-name patterns share a priority."""


# -- retrieval / answering -----------------------------------------------------

class ProviderError(RobodexError):
    """An external embedding or completion provider failed."""


class DimensionMismatchError(RobodexError):
    """Dimension disagreement: embedding width or evaluation dimension."""


class EmptyIndexError(RobodexError):
    """Retrieval requested against an index with no chunks."""


class AmbiguousComparisonError(RobodexError):
    """Comparison cues present but fewer than two datasets were named."""


# -- service -------------------------------------------------------------------

class SessionNotFoundError(RobodexError):
    """Unknown chat session id."""


# -- ratings / evaluation model ------------------------------------------------

class DuplicateCellError(RobodexError):
    """A (rater, prompt, dimension) cell appears more than once."""


class ScoreOutOfRangeError(RobodexError):
    """Score outside the 0-5 rating scale."""


class MalformedRowError(RobodexError):
    """Ratings CSV row could not be parsed."""


class InsufficientDataError(RobodexError):
    """Not enough raters or prompts to fit the model."""
