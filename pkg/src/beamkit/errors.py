"""Exception types shared across the package."""


class BeamkitError(Exception):
    """Base class for all beamkit errors."""


class AudioFormatError(BeamkitError):
    """Malformed or unsupported WAV data; messages name the byte offset."""


class MaskFormatError(BeamkitError):
    """Malformed MSK1 mask file; messages name the byte offset."""


class ConfigError(BeamkitError):
    """Bad run configuration; messages name the line or key at fault."""


class SingularMatrixError(BeamkitError):
    """A linear system stayed numerically singular after diagonal loading."""


class SceneError(BeamkitError):
    """Inconsistent or physically impossible scene specification."""
