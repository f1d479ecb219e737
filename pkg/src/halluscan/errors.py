"""Exception hierarchy and the process exit codes the CLI maps them to."""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_GATEWAY = 4
EXIT_VALIDATION = 5


class HalluscanError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = EXIT_VALIDATION


class ConfigError(HalluscanError):
    """Bad or inconsistent configuration (missing API key, bad flag combo)."""

    exit_code = EXIT_USAGE


class InputError(HalluscanError):
    """Unreadable or malformed input: video sources, frames, annotations."""

    exit_code = EXIT_INPUT


class EmptyInputError(InputError):
    """A source existed but yielded no usable data."""


class ContractError(HalluscanError):
    """A caller violated a documented precondition."""

    exit_code = EXIT_VALIDATION


class ValidationError(HalluscanError):
    """A constructed object or response failed its integrity checks."""

    exit_code = EXIT_VALIDATION


class GatewayError(HalluscanError):
    """Base class for model-gateway failures."""

    exit_code = EXIT_GATEWAY


class FixtureMissingError(GatewayError):
    """Replay backend holds no fixture for the request hash."""


class GatewayParseError(GatewayError):
    """No response validated against its schema, retries included."""


class GatewayTransportError(GatewayError):
    """Transport kept failing after backoff was exhausted."""


class KGExtractionError(GatewayParseError):
    """Graph extraction failed; carries the offending frame index if known."""

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index
