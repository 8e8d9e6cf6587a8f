"""Exception hierarchy shared by every module of :mod:`otsr`."""


class OTSRError(Exception):
    """Base class for all errors raised by this package."""


class NegativeEntry(OTSRError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"negative entry at index {index}")


class NonFinite(OTSRError, ValueError):
    def __init__(self, index):
        self.index = index
        super().__init__(f"non-finite entry at index {index}")


class ZeroMass(OTSRError, ValueError):
    def __init__(self):
        super().__init__("input has zero total mass")


class DimensionMismatch(OTSRError, ValueError):
    pass


class NumericalUnderflow(OTSRError, FloatingPointError):
    """Raised by the direct-kernel Sinkhorn when a kernel row or column vanishes.

    Switch to the stabilized (log-domain) mode when this happens.
    """


class NotConverged(OTSRError, RuntimeError):
    pass


class EmptySupport(OTSRError, ValueError):
    pass


class AllZeroImage(OTSRError, ValueError):
    pass


class AllBandsZero(OTSRError, ValueError):
    pass


class TooLarge(OTSRError, ValueError):
    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"problem size {size} exceeds the brute-force limit {limit}")


class EmptyFeasibleSet(OTSRError, ValueError):
    pass


class ZeroBand(OTSRError, ValueError):
    """A single image band has no positive intensity."""
