"""Exception hierarchy shared by all nlwave modules."""


class NLWaveError(Exception):
    """Base class for every error raised by nlwave."""


class InvalidGrid(NLWaveError, ValueError):
    pass


class ShapeMismatch(NLWaveError, ValueError):
    pass


class NotRealizable(NLWaveError, ValueError):
    """Spectrum is not conjugate-symmetric enough to represent a real field."""


class SnapshotFormatError(NLWaveError, ValueError):
    pass


class NegativeSymbol(NLWaveError, ValueError):
    """a_hat |xi|^2 + A_hat went negative, so eta would not be real."""


class DegenerateFit(NLWaveError, ValueError):
    pass


class Overflow(NLWaveError, ArithmeticError):
    """Field magnitude exceeded the overflow guard (upstream blow-up)."""


class NonzeroMean(NLWaveError, ValueError):
    pass


class InsufficientTrace(NLWaveError, ValueError):
    pass


class StepperError(NLWaveError):
    """Raised by the Picard stepper; carries the stats and the failure time."""

    def __init__(self, message, stats=None, t=None):
        super().__init__(message)
        self.stats = stats
        self.t = t


class NonContraction(StepperError):
    pass


class MaxIterExceeded(StepperError):
    pass


class ParseError(NLWaveError, ValueError):
    def __init__(self, message, line=None, section=None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")
        self.line = line
        self.section = section


class ValidationError(NLWaveError, ValueError):
    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field


class UnknownPreset(NLWaveError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else "unknown preset"
