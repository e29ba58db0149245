"""Exception hierarchy shared by every roughlab module."""


class RoughlabError(Exception):
    """Base class; the CLI maps these to exit code 2."""


class DivergentSeries(RoughlabError, ValueError):
    pass


class EmbeddingNotPSD(RoughlabError):
    pass


class OutOfGrid(RoughlabError, IndexError):
    pass


class NotSewable(RoughlabError, ValueError):
    pass


class QuadratureUnstable(RoughlabError):
    pass


class InvalidRegime(RoughlabError, ValueError):
    pass


class RegimeMismatch(RoughlabError, ValueError):
    pass


class GridMismatch(RoughlabError, ValueError):
    pass


class ConfigInvalid(RoughlabError, ValueError):
    pass


class TooFewSamples(RoughlabError, ValueError):
    pass


class DegenerateInput(RoughlabError, ValueError):
    pass
