"""Exception hierarchy shared by the library and the CLI."""


class NilflowError(Exception):
    """Base class for every error raised by nilflow."""


class InputError(NilflowError, ValueError):
    """Malformed or out-of-range input (CLI exit code 1)."""


class ContractViolation(NilflowError):
    """A checked mathematical contract failed (CLI exit code 2)."""


class NumericalFailure(NilflowError, ArithmeticError):
    """An integration or solve broke down (CLI exit code 3)."""


# lie_core
class ShapeMismatch(InputError):
    pass


class AntisymmetryViolation(InputError):
    def __init__(self, index, value):
        self.index = index
        super().__init__(f"c[k][i][j] + c[k][j][i] = {value:.3e} at (k,i,j)={index}")


class JacobiViolation(InputError):
    def __init__(self, index, value):
        self.index = index
        super().__init__(f"Jacobi sum {value:.3e} at (i,j,k,l)={index}")


class NotNilpotent(InputError):
    def __init__(self, step, dim):
        self.step = step
        super().__init__(
            f"lower central series stabilises at dimension {dim} after {step} steps"
        )


class ZeroGamma(InputError):
    pass


class NotPositiveDefinite(InputError):
    pass


# group_flow / bundle_reduction
class PositivityLost(NumericalFailure):
    def __init__(self, t, s=None):
        self.t = t
        self.s = s
        where = f"t={t:.6g}" if s is None else f"t={t:.6g}, s={s:.6g}"
        super().__init__(f"metric lost positivity at {where}; refine the time step")


class StiffnessOverflow(NumericalFailure):
    pass


class BlowUp(NumericalFailure):
    pass


class NonpositiveTime(InputError):
    pass


class NotASoliton(ContractViolation):
    pass


class ScaleOutOfRange(InputError):
    pass


class MisalignedTrajectories(InputError):
    pass


# soliton_bank
class ParameterOutOfRange(InputError):
    pass


class NormalizationViolated(InputError):
    pass


class DegenerateX(InputError):
    pass


class WrongFiber(InputError):
    pass


class ConfigError(InputError):
    pass
