"""Exception hierarchy shared by every qtree-spectra module.

Argument and structure problems derive from ValueError, numerical
failures from RuntimeError. The CLI maps both families to exit codes.
"""

from typing import Any, Optional


class ConditionViolation(ValueError):
    """A structural condition on the graph or cone system does not hold."""

    def __init__(self, condition: str, message: str, witness: Optional[Any] = None):
        super().__init__(f"{condition} violated: {message}")
        self.condition = condition
        self.witness = witness


class TreeSizeError(ValueError):
    """Truncated tree would exceed the configured vertex cap."""

    def __init__(self, count: int, cap: int):
        super().__init__(f"truncated tree needs {count} vertices, cap is {cap}")
        self.count = count
        self.cap = cap


class DirichletProximityError(ValueError):
    """Real energy lies inside the guard zone around a Dirichlet value."""

    def __init__(self, lam: float, nearest: float, guard: float):
        super().__init__(
            f"lambda={lam:.12g} is within {guard:g} of Dirichlet value {nearest:.12g}"
        )
        self.lam = lam
        self.nearest = nearest
        self.guard = guard


class BacktrackingPathError(ValueError):
    """Vertex sequence is not a non-backtracking path in the tree."""


class HerglotzViolation(RuntimeError):
    """A Herglotz quantity left the open upper half-plane at Im z > 0."""

    def __init__(self, where: str, value: complex):
        super().__init__(f"Herglotz violation at {where}: value {value!r}")
        self.where = where
        self.value = value


class NonConvergence(RuntimeError):
    """Iterative solver exhausted its iteration budget."""

    def __init__(self, message: str, last: Any = None, gap: float = float("nan")):
        super().__init__(f"{message} (gap={gap:.3e})")
        self.last = last
        self.gap = gap


class IntegrationError(RuntimeError):
    """ODE integration failed or missed the Wronskian tolerance."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


class QuadratureError(RuntimeError):
    """Quadrature refinement did not stabilise."""


class NoSignChangeError(RuntimeError):
    """Bracket search found no sign change for a scalar root."""
