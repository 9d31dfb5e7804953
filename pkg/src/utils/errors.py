class SpectralError(Exception):
    pass


class DomainError(SpectralError, ValueError):
    pass


class UnsupportedOrderError(SpectralError, ValueError):
    pass


class DiagonalSingularityError(SpectralError, ValueError):
    pass


class FitFailureError(SpectralError):
    pass


class IntegrationError(SpectralError):
    pass


class NeumannSeriesError(SpectralError):
    pass


class UnsupportedPotentialError(SpectralError):
    pass


class ConfigError(SpectralError):

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
