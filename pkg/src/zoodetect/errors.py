"""Exception types shared across the package.

Everything derives from :class:`ZooDetectError` so callers can catch the
whole family at once; most classes also subclass :class:`ValueError`
because they signal invalid inputs.
"""


class ZooDetectError(Exception):
    """Base class for all zoodetect errors."""


# --- matrix file format -------------------------------------------------

class MagicMismatch(ZooDetectError, ValueError):
    """File does not start with a valid ZFM1 header."""


class TruncatedFile(ZooDetectError, ValueError):
    """Declared payload extends past the end of the file."""


class NonFiniteValue(ZooDetectError, ValueError):
    """Matrix contains NaN or Inf and validation is enabled."""


class DimOverflow(ZooDetectError, ValueError):
    """Declared dimensions are zero or implausibly large."""


# --- manifest -----------------------------------------------------------

class SchemaError(ZooDetectError, ValueError):
    """Manifest JSON is malformed: missing/unknown key, wrong type, bad path."""


class MissingSplit(ZooDetectError, ValueError):
    """A model lacks the mandatory id_train or id_val split."""


class DimMismatch(ZooDetectError, ValueError):
    """Matrix dimensions disagree where they must match."""


class DuplicateModelName(ZooDetectError, ValueError):
    """Two models in one manifest share a name."""


class UnreadableMatrix(ZooDetectError, ValueError):
    """A referenced matrix file exists but cannot be read."""


# --- score functions ----------------------------------------------------

class EmptyVector(ZooDetectError, ValueError):
    """Score function received a zero-length input."""


class NonFiniteInput(ZooDetectError, ValueError):
    """Score or p-value function received NaN/Inf input."""


class EmptyClass(ZooDetectError, ValueError):
    """A class index has no samples when fitting per-class statistics."""


class SingularCovariance(ZooDetectError, ValueError):
    """Shared covariance is not positive definite even after the ridge."""


class LabelOutOfRange(ZooDetectError, ValueError):
    """Class label falls outside [0, class_count)."""


class KTooLarge(ZooDetectError, ValueError):
    """Neighbor rank k exceeds the number of bank rows."""


class ZeroNormVector(ZooDetectError, ValueError):
    """Cannot L2-normalize a zero vector."""


class MissingInput(ZooDetectError, ValueError):
    """Manifest lacks the features/logits a configured score kind needs."""


# --- p-values and ensembling ---------------------------------------------

class EmptyInput(ZooDetectError, ValueError):
    """Operation received an empty collection."""


class ModelOrderMismatch(ZooDetectError, ValueError):
    """Reference and test score tables disagree on models or their order."""


class PValueOutOfRange(ZooDetectError, ValueError):
    """A p-value lies outside [0, 1]."""


# --- metrics and configuration -------------------------------------------

class DivisionByZeroGuard(ZooDetectError, ValueError):
    """Rate requested over an empty population."""


class ConfigError(ZooDetectError, ValueError):
    """Unknown scheme name or out-of-range configuration value."""
