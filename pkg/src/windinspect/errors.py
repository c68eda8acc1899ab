"""Exception hierarchy shared by the package."""


class WindInspectError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(WindInspectError, ValueError):
    """A geometric or configuration parameter is out of range."""


class MeshIOError(WindInspectError, OSError):
    """Mesh file could not be written or parsed."""


class EmptyModelError(WindInspectError, ValueError):
    """The mesh holds nothing the planner can inspect."""


class MalformedGraphError(WindInspectError, ValueError):
    """Tour nodes do not come in complete cluster pairs."""


class InvalidParameterError(WindInspectError, ValueError):
    """A numeric parameter (spacing, speed, ...) is out of range."""


class DegenerateGeometryError(WindInspectError, ValueError):
    """Viewing geometry is singular, e.g. the drone is directly above the point."""


class NumericFault(WindInspectError, ArithmeticError):
    """A state or linearization became non-finite."""


class ConfigError(WindInspectError, ValueError):
    """Configuration file is malformed or holds unknown keys."""
