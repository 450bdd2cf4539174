"""Exception taxonomy and the CLI exit-code mapping."""

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CERTIFICATION = 3
EXIT_VERIFICATION = 4
EXIT_NUMERICAL = 5


class RhlqrError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = EXIT_NUMERICAL


class InputError(RhlqrError):
    """Bad user input: file schema, shapes, flags, or violated preconditions."""

    exit_code = EXIT_INPUT


class CertificationError(RhlqrError):
    """A certificate cannot be constructed (assumption or constant violated)."""

    exit_code = EXIT_CERTIFICATION


class MarginViolation(CertificationError):
    """A uniformity margin of the lifted problem is not positive."""


class NoUniformDepth(CertificationError):
    """No lifting depth up to d_max gives full-rank controllability/observability."""

    def __init__(self, d_max, failing_k):
        self.d_max = d_max
        self.failing_k = failing_k
        super().__init__(
            f"no lifting depth d <= {d_max} is uniformly controllable and "
            f"observable (rank test fails at base index k={failing_k})"
        )


class VerificationError(RhlqrError):
    """A certified property failed when checked against a realized run."""

    exit_code = EXIT_VERIFICATION


class StabilityFailure(VerificationError):
    """Closed-loop state diverged under a policy that was certified stable."""


class NumericalError(RhlqrError):
    """A matrix factorization or solve failed beyond the configured tolerances."""

    exit_code = EXIT_NUMERICAL


class LiftingConsistencyError(NumericalError):
    """Base-domain propagation disagrees with the lifted trajectory."""
