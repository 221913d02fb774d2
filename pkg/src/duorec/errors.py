"""Exception hierarchy shared by all duorec modules."""


class DuorecError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DuorecError):
    """Invalid configuration value or unknown config key."""


class InputError(DuorecError):
    """An input file or stream could not be read."""


class CorpusError(DuorecError):
    """The input corpus is unusable (e.g. mostly malformed lines)."""


class UndefinedPmiError(DuorecError):
    """PMI requested for a pair with a zero count somewhere in the formula."""


class UndefinedSimilarityError(DuorecError):
    """Cosine similarity requested against a zero vector."""


class OutOfCoverageError(DuorecError):
    """The target item is unknown to the model (and, for IA, to the
    similarity provider as well)."""

    def __init__(self, item, message=None):
        self.item = item
        super().__init__(message or f"item {item!r} is out of coverage")


class TrainingStreamError(DuorecError):
    """A training example references an item outside the model vocabulary."""


class EvaluationError(DuorecError):
    """Evaluation cannot proceed (e.g. empty test set)."""


class TuningError(DuorecError):
    """Hyperparameter search failed on every trial."""
