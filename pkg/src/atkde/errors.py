"""Exception hierarchy shared across the package."""


class AtKdeError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AtKdeError, ValueError):
    pass


class EventLogError(AtKdeError, ValueError):
    pass


class EmptyInputError(AtKdeError, ValueError):
    pass


class SplitError(AtKdeError, ValueError):
    pass


class InsufficientDataError(AtKdeError, ValueError):
    pass


class GenerationError(AtKdeError, RuntimeError):
    pass


class EvaluationError(AtKdeError, ValueError):
    pass


class ModelFileError(AtKdeError, ValueError):
    pass
