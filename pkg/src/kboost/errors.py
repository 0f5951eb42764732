"""Exception types raised by the numerical routines."""


class OutsideSupportError(ValueError):
    """A point carries no kernel mass on the quadrature grid."""


class DesignError(ValueError):
    """The local design cannot support a smoother at this bandwidth."""


class SpectrumError(ValueError):
    """A smoother spectrum violates the range its construction guarantees."""


class DegenerateScaleError(ValueError):
    """A robust scale estimate is zero because all residuals coincide."""
