"""Exception hierarchy. The CLI maps each family to an exit code."""


class GEFLError(Exception):
    exit_code = 1


class InputError(GEFLError, ValueError):
    """Unreadable, malformed or inconsistent input (files, configs, arguments)."""

    exit_code = 2


class KnowledgeUnderflow(GEFLError):
    """A feature pool is too small for the requested draw."""

    exit_code = 3


class NumericalError(GEFLError, FloatingPointError):
    """Non-finite parameters, objective values or gradients."""

    exit_code = 4
