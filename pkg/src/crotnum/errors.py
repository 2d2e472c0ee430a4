"""Exception hierarchy.

Every numerical failure is a subclass of :class:`NumericalError` so the CLI can
map it to exit code 3 in one place.
"""


class CrotError(Exception):
    pass


class NumericalError(CrotError):
    pass


class VerificationError(CrotError):
    pass


class StripExceeded(NumericalError):
    def __init__(self, im, h):
        super().__init__(f"|Im z| = {im:.3g} exceeds strip half-width {h:.3g}")
        self.im = im
        self.h = h


class OrbitLeftStrip(NumericalError):
    def __init__(self, index, im, cap):
        super().__init__(f"orbit left |Im| <= {cap:.3g} at iterate {index} (|Im| = {im:.3g})")
        self.index = index


class NotADiffeomorphism(CrotError):
    pass


class NoConvergence(NumericalError):
    pass


class TailNotDecaying(NumericalError):
    pass


class DepthExceeded(CrotError):
    pass


class PrecisionLoss(NumericalError):
    pass


class PoleAtZero(CrotError):
    pass


class ImageAtInfinity(CrotError):
    pass


class NonPositiveImaginaryPart(CrotError):
    pass


class NotFound(CrotError):
    pass


class EmptyLocking(CrotError):
    pass


class RootFindingFailure(NumericalError):
    pass


class NotHyperbolic(CrotError):
    pass


class AlternationViolation(NumericalError):
    pass


class SlowConvergence(NumericalError):
    pass


class CurveInvalid(NumericalError):
    def __init__(self, clause, detail=""):
        super().__init__(f"{clause}: {detail}" if detail else clause)
        self.clause = clause


class NonInjectiveInterpolation(NumericalError):
    def __init__(self, min_jacobian, where):
        super().__init__(f"interpolation Jacobian {min_jacobian:.3g} <= 0 near {where}")
        self.min_jacobian = min_jacobian
        self.where = where


class DilatationTooLarge(NumericalError):
    pass


class AliasingDetected(NumericalError):
    pass


class ChartResidualTooLarge(NumericalError):
    pass


class NoReturnWithinCap(NumericalError):
    pass


class FitFailure(NumericalError):
    pass


class PrecisionFloor(NumericalError):
    pass
