"""Exception hierarchy with stable machine-readable codes.

Every error raised by the library carries a short ``code`` string that CLI
consumers and tests can match on without parsing messages.
"""


class SlqdetError(Exception):
    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


class DimensionError(SlqdetError):
    code = "dimension"


class BadConfigError(SlqdetError):
    code = "bad-config"


class BadVectorError(SlqdetError):
    code = "bad-vector"


class BadBasisError(SlqdetError):
    code = "bad-basis"


class DomainError(SlqdetError):
    """The scalar function is not finite at a quadrature node or eigenvalue."""

    code = "domain"


class NotPositiveDefiniteError(SlqdetError):
    code = "not-pd"


class TooLargeError(SlqdetError):
    code = "too-large"


class EigFailError(SlqdetError):
    code = "eig-fail"


class RankDeficientError(SlqdetError):
    """Sketch image has lower numerical rank than the requested basis size."""

    code = "rank-deficient"

    def __init__(self, message: str = "", achieved_rank: int = 0):
        super().__init__(message)
        self.achieved_rank = achieved_rank


class DegenerateSpectrumError(SlqdetError):
    code = "degenerate-spectrum"


class BadSpectrumError(SlqdetError):
    code = "bad-spectrum"


class MissingSpectralDataError(SlqdetError):
    code = "missing-spectral-data"


class MatrixMarketParseError(SlqdetError):
    code = "mm-parse"


class MatrixMarketNotSymmetricError(SlqdetError):
    code = "mm-not-symmetric"


class MatrixMarketInconsistentError(SlqdetError):
    code = "mm-inconsistent"
