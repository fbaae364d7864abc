"""Exception types raised across petzlab."""


class PetzlabError(Exception):
    """Base class for all petzlab errors."""


class ShapeError(PetzlabError, ValueError):
    """Operator or channel dimensions do not match."""


class DomainError(PetzlabError, ValueError):
    """An input lies outside the domain of the requested operation."""


class ParameterError(PetzlabError, ValueError):
    """An invalid parameter was supplied."""


class ResourceError(PetzlabError, RuntimeError):
    """A dense construction would exceed the configured dimension cap."""


class ComputationError(PetzlabError, RuntimeError):
    """A numerical routine failed to produce a trustworthy result."""


class InstanceError(ComputationError):
    """A suite instance raised; carries the instance label."""

    def __init__(self, label: str, message: str):
        super().__init__(f"{label}: {message}")
        self.label = label
        self.message = message

    def __reduce__(self):
        return (type(self), (self.label, self.message))
