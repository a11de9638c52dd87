"""Exception hierarchy shared by the solvers and the CLI."""


class ConvergenceError(RuntimeError):
    """An iterative method ran out of budget or left its admissible region."""


class NoConvergence(ConvergenceError):
    pass


class BracketFailure(ConvergenceError):
    pass


class MaxIters(ConvergenceError):
    pass


class PartCollapse(ConvergenceError):
    """A nodal iterate lost its positive or negative part."""


class FaceSignViolation(ValueError):
    """The Miranda face sign conditions fail on the sampled lattice."""
