"""Exception hierarchy shared by all modules."""


class LiouvilleError(Exception):
    """Base class for every error raised by this package."""


# --- potential analysis ---

class DegenerateCritical(LiouvilleError):
    """|G'| + |G''| below threshold at a root: the potential is not Morse."""


class NoConvergence(LiouvilleError):
    """An iterative solver exhausted its iteration budget."""


class DistinctValueViolation(LiouvilleError):
    """Two critical values coincide within tolerance."""


# the spec sheet for downstream consumers uses this alias
DegenerateValueCollision = DistinctValueViolation


class ZeroFirstHarmonic(LiouvilleError):
    """Cosine-like normalization impossible: first Fourier harmonic vanishes."""


class NotCosineLike(LiouvilleError):
    """Relative distance to the nearest shifted cosine exceeds 1/4."""


class NotNormalized(LiouvilleError):
    """phase_shift_b input does not have max = 1, min = -1."""


class TooFarFromCosine(LiouvilleError):
    """phase_shift_b input too far from cos for the construction to apply."""


# --- standard form ---

class DegenerateHessian(LiouvilleError):
    """Second p1-derivative vanishes where a nondegenerate extremum is needed."""


class NewtonDiverged(LiouvilleError):
    """Newton iteration failed to converge."""


class EpsTooLarge(LiouvilleError):
    """Perturbation size exceeds the empirical standardization threshold."""


class ContractionFailed(LiouvilleError):
    """A fixed-point contraction did not reach its residual target."""


class OrderViolation(LiouvilleError):
    """Continued critical points/energies lost the unperturbed ordering."""


# --- action map ---

class OutOfWindow(LiouvilleError):
    """Energy outside the open window of the requested region."""


class QuadratureTolNotMet(LiouvilleError):
    """Adaptive quadrature stopped before reaching the requested tolerance."""


class NotEven(LiouvilleError):
    """even_sqrt_compose input fails the evenness check."""


class OutOfRange(LiouvilleError):
    """Action value outside the image of the energy window."""


class LambdaOutOfRange(LiouvilleError):
    """Shrinking parameter lambda outside (0, lambda_max]."""


# --- separatrix fits ---

class IllConditionedFit(LiouvilleError):
    """Least-squares basis too ill-conditioned at the requested degree."""


class SignViolation(LiouvilleError):
    """Fitted psi(0) has the wrong sign for its region/branch."""


class BoundViolation(LiouvilleError):
    """A calibrated inequality check failed."""


class BranchCut(LiouvilleError):
    """Complex evaluation requested on the negative real axis."""


# --- normal form ---

class SmallDivisorZero(LiouvilleError):
    """Vanishing homological divisor (cannot happen while g != 0)."""


class ResidualTooLarge(LiouvilleError):
    """Normal-form residual above tolerance on the probe polydisk."""


class OutOfRadius(LiouvilleError):
    """Argument outside the validated local radius."""


class BranchViolation(LiouvilleError):
    """-J(E) left the right half-plane: square roots lose their branch."""


# --- oracle ---

class StepRejected(LiouvilleError):
    """Implicit midpoint step failed to converge."""
