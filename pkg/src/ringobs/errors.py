"""Error taxonomy shared across the package.

Three failure classes matter to callers (and map onto CLI exit codes):
plain ``ValueError``/``OSError`` for configuration and I/O problems,
:class:`AssumptionViolation` for inputs or trajectories that leave the
regime the estimator is designed for, and :class:`NumericFailure` for
breakdowns of the numerical machinery itself (non-convergence,
non-finite values).
"""


class AssumptionViolation(RuntimeError):
    """A structural assumption of the model/observer does not hold.

    Examples: the input wedge |I_(1:2) ^ dI_(1:2)| falls below half its
    certified bound, the constant-drive floor I_0 >= c fails on a grid,
    or the output crosses the switching threshold more than twice.
    """


class NumericFailure(RuntimeError):
    """A numerical routine failed to produce a usable result.

    Examples: bisection not converging within its iteration budget, or a
    non-finite value appearing at a Runge-Kutta stage.
    """
