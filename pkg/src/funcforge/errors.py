"""Exception types shared across the pipeline."""


class FuncForgeError(Exception):
    """Base class for all pipeline errors."""


class ParseError(FuncForgeError):
    """Input file is not valid JSON/JSONL."""


class SchemaError(FuncForgeError):
    """Parsed input is missing required fields or has the wrong shape."""


class DuplicateName(SchemaError):
    """Two tools in one pool share a name."""


class DomainError(FuncForgeError):
    """A numeric argument is outside its documented domain."""


class MalformedScore(FuncForgeError):
    """Similarity backend reply is not a number in [0, 1] after one retry."""


class BackendError(FuncForgeError):
    """Backend call failed after exhausting retries."""


class AuthError(BackendError):
    """Credential rejected (HTTP 401/403); never retried."""


class RateLimited(BackendError):
    """HTTP 429 persisted through all retries."""


class BackendTimeout(BackendError):
    """Request timed out through all retries."""


class ScriptExhausted(BackendError):
    """Scripted backend has no reply left for the requested tag."""


class InsufficientTools(FuncForgeError):
    """No tool group is large enough for the requested target count."""


class DuplicateId(FuncForgeError):
    """A dialogue id was recorded twice in agent memory."""


class NoApplicableTool(FuncForgeError):
    """Function agent declined to produce any call."""


class InvalidArguments(FuncForgeError):
    """Function agent output failed validation even after one repair retry."""


class MalformedVerdict(FuncForgeError):
    """Judge or checker reply unparseable after one retry."""


class GenerationStalled(FuncForgeError):
    """Backend error budget exceeded mid-dialogue."""


class NotFound(FuncForgeError):
    """Review queue has no item with the requested id."""


class InvalidTransition(FuncForgeError):
    """Requested review decision is not legal for the item's current status."""


class NoEligibleCalls(FuncForgeError):
    """Corpus contains no call whose tool declares optional parameters."""


class IoError(FuncForgeError):
    """An output path could not be written."""


class MissingPrerequisite(FuncForgeError):
    """A pipeline stage ran before the stage that produces its input."""


class ConfigError(FuncForgeError):
    """Pipeline configuration file is missing or inconsistent."""
