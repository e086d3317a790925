"""Exception hierarchy; the CLI maps these onto exit codes."""


class SpectralLabError(Exception):
    exit_code = 1


class InvalidArgument(SpectralLabError, ValueError):
    exit_code = 2


class NumericalError(SpectralLabError, ArithmeticError):
    exit_code = 3


class NumericalSingularity(NumericalError):
    pass


class EmbeddedSpectrumSuspected(NumericalError):
    def __init__(self, lam, sigma):
        super().__init__(f"near-singular system at lambda={lam:.6g} (rcond {sigma:.3g})")
        self.lam = lam
        self.sigma = sigma


class ResonanceError(NumericalError):
    pass


class AliasingError(NumericalError):
    pass


class TruncationError(NumericalError):
    pass


class RefineNeeded(NumericalError):
    pass


class InvalidMultiplier(InvalidArgument):
    pass
