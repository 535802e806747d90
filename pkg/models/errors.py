"""Exception hierarchy shared by services, repositories and the CLI."""


class CurveSegError(Exception):
    """Base class for every error raised by curveseg."""

    exit_code = 1


class CurveParseError(CurveSegError):
    """Input file could not be turned into a CurveSet."""

    exit_code = 2


class ConfigurationError(CurveSegError, ValueError):
    """Run configuration is inconsistent (e.g. K does not divide P)."""

    exit_code = 3


class DomainError(CurveSegError, ValueError):
    """An operation was called outside its domain."""

    exit_code = 3


class InternalConsistencyError(CurveSegError, RuntimeError):
    """A numerical self-check failed."""

    exit_code = 4
