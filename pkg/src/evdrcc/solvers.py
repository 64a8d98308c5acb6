"""Pluggable convex solver interface.

A solver is any object with ``solve(problem) -> SolveResult`` that accepts a
``cvxpy.Problem`` built from a convex quadratic objective, linear constraints
and second-order cones.  :class:`CvxpySolver` dispatches to any conic backend
cvxpy knows about.
"""

from dataclasses import dataclass

import cvxpy as cp

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
FAILED = "solver_error"


class SolverFailure(RuntimeError):
    """The backend crashed or returned no usable status."""


class InfeasibleModel(RuntimeError):
    """The model has no feasible point; ``diagnostic`` names the culprit."""

    def __init__(self, message, diagnostic=None):
        super().__init__(message)
        self.diagnostic = diagnostic


@dataclass
class SolveResult:
    status: str
    objective: float
    raw_status: str


class CvxpySolver:
    def __init__(self, name="CLARABEL", **options):
        self.name = name
        self.options = options

    def solve(self, problem):
        try:
            problem.solve(solver=self.name, **self.options)
        except cp.error.SolverError as exc:
            return SolveResult(FAILED, float("nan"), str(exc))
        raw = problem.status
        if raw in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            status = OPTIMAL
        elif raw in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            status = INFEASIBLE
        elif raw in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
            status = UNBOUNDED
        else:
            status = FAILED
        value = problem.value if problem.value is not None else float("nan")
        return SolveResult(status, float(value), raw)

    def __repr__(self):
        return f"CvxpySolver({self.name!r})"


def default_solver():
    return CvxpySolver("CLARABEL")
