"""Exception hierarchy shared by all modules."""


class LesiontrackError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(LesiontrackError, ValueError):
    """Invalid argument or parameter combination."""


class FormatError(LesiontrackError):
    """Malformed CTV file."""


class BadMagicError(FormatError):
    pass


class TruncatedPayloadError(FormatError):
    pass


class PayloadSizeError(FormatError):
    """Payload longer than the header dimensions allow."""


class CatalogError(LesiontrackError):
    """Malformed or inconsistent exam catalog."""


class DuplicateExamError(CatalogError):
    pass


class MissingVolumeError(CatalogError):
    pass


class PreconditionError(LesiontrackError):
    """Workflow called with exams that do not satisfy its contract."""


class WorkflowError(LesiontrackError):
    """The workflow cannot proceed with the catalog contents."""
