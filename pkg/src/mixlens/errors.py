"""Exception and warning types shared across the toolkit."""


class MixlensError(Exception):
    """Base class for all mixlens errors."""


class AudioIOError(MixlensError):
    """WAV file could not be read or written, or uses an unsupported encoding."""


class DecompositionError(MixlensError):
    """A decomposition is structurally invalid or could not be built."""


class PredictorError(MixlensError):
    """A predictor failed: crash, timeout, or an error response."""


class ProtocolError(PredictorError):
    """The external predictor violated the wire protocol."""


class CapabilityError(PredictorError):
    """An operation was requested that the predictor does not support."""


class DegenerateExplanationError(MixlensError):
    """The quantity to be explained carries no signal (zero variance or all-zero)."""


class SingularSystemError(MixlensError):
    """The surrogate fit is not identifiable from the given perturbations."""


class ManifestError(MixlensError):
    """A dataset manifest is malformed."""


class StemResidualWarning(UserWarning):
    """Stem files do not sum to the mix within the configured threshold."""


class LabelRangeWarning(UserWarning):
    """A manifest label lies outside the nominal [-1, 1] range."""
