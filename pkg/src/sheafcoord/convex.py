"""Node objectives and edge potentials: values, gradients, proximal operators.

Two prox conventions live side by side, deliberately:

* node side   prox_f(v)  = argmin_x f(x) + (1/(2*rho)) ||x - v||^2
* edge side   prox_U(v)  = argmin_w U(w) + (rho/2)    ||w - v||^2

so a *larger* rho trusts the node's anchor point more but pulls the edge
update harder toward v.  The ADMM solver relies on exactly this pairing;
:func:`node_prox` and :func:`edge_prox` implement it.

Indicator membership is tested with tolerance 1e-12 throughout (exact
floating-point equality is meaningless).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "NodeObjective",
    "ZeroObjective",
    "QuadraticObjective",
    "FixedValueObjective",
    "BoxObjective",
    "EdgePotential",
    "QuadraticPotential",
    "ZeroIndicatorPotential",
    "HuberPotential",
    "ProxQuery",
    "objective_value",
    "node_prox",
    "edge_value",
    "edge_gradient",
    "edge_prox",
]

_MEMBERSHIP_TOL = 1e-12


def _vec(v) -> np.ndarray:
    return np.atleast_1d(np.asarray(v, dtype=np.float64)).reshape(-1)


@dataclass(frozen=True)
class ProxQuery:
    """A prox evaluation point: the vector v and the parameter rho > 0."""

    point: np.ndarray
    rho: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", _vec(self.point))
        object.__setattr__(self, "rho", float(self.rho))
        if self.rho <= 0:
            raise ValueError("rho must be positive")


class NodeObjective:
    """Base class for the per-vertex convex objectives f_i."""

    def value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def prox(self, q: ProxQuery) -> np.ndarray:
        """argmin_x f(x) + (1/(2*rho)) ||x - v||^2, in closed form."""
        raise NotImplementedError

    def _check_len(self, x: np.ndarray, n: int | None) -> np.ndarray:
        x = _vec(x)
        if n is not None and x.size != n:
            raise ValueError(f"expected a vector of length {n}, got {x.size}")
        return x


@dataclass(frozen=True)
class ZeroObjective(NodeObjective):
    """f(x) = 0: the vertex expresses no preference."""

    def value(self, x) -> float:
        _vec(x)
        return 0.0

    def prox(self, q: ProxQuery) -> np.ndarray:
        return q.point.copy()


@dataclass(frozen=True)
class QuadraticObjective(NodeObjective):
    """f(x) = (w/2) ||x - reference||^2 with weight w >= 0."""

    reference: np.ndarray
    weight: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "reference", _vec(self.reference))
        object.__setattr__(self, "weight", float(self.weight))
        if self.weight < 0:
            raise ValueError("weight must be non-negative")

    def value(self, x) -> float:
        x = self._check_len(x, self.reference.size)
        d = x - self.reference
        return 0.5 * self.weight * float(d @ d)

    def prox(self, q: ProxQuery) -> np.ndarray:
        v = self._check_len(q.point, self.reference.size)
        rw = q.rho * self.weight
        return (v + rw * self.reference) / (1.0 + rw)


@dataclass(frozen=True)
class FixedValueObjective(NodeObjective):
    """Indicator of the single point c*: pins the vertex state."""

    point: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", _vec(self.point))

    def value(self, x) -> float:
        x = self._check_len(x, self.point.size)
        if np.max(np.abs(x - self.point), initial=0.0) <= _MEMBERSHIP_TOL:
            return 0.0
        return math.inf

    def prox(self, q: ProxQuery) -> np.ndarray:
        self._check_len(q.point, self.point.size)
        return self.point.copy()


@dataclass(frozen=True)
class BoxObjective(NodeObjective):
    """Indicator of the box {lower <= x <= upper} (entrywise, +/-inf allowed)."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self) -> None:
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64)).reshape(-1)
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64)).reshape(-1)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if lo.size != hi.size:
            raise ValueError("lower and upper must have equal length")
        if np.any(lo > hi):
            raise ValueError("box requires lower <= upper entrywise")

    def value(self, x) -> float:
        x = self._check_len(x, self.lower.size)
        if np.all(x >= self.lower - _MEMBERSHIP_TOL) and np.all(x <= self.upper + _MEMBERSHIP_TOL):
            return 0.0
        return math.inf

    def prox(self, q: ProxQuery) -> np.ndarray:
        v = self._check_len(q.point, self.lower.size)
        return np.clip(v, self.lower, self.upper)


class EdgePotential:
    """Base class for the per-edge convex potentials U_e."""

    def value(self, y: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def prox(self, q: ProxQuery) -> np.ndarray:
        """argmin_w U(w) + (rho/2) ||w - v||^2, in closed form."""
        raise NotImplementedError

    @property
    def differentiable(self) -> bool:
        return True

    def curvature_bound(self) -> float:
        """An upper bound on the Hessian norm of U (0 when flat)."""
        return 0.0

    def minimizer_target(self) -> np.ndarray:
        """The b_e this potential pulls the edge difference toward."""
        raise NotImplementedError


@dataclass(frozen=True)
class QuadraticPotential(EdgePotential):
    """U(y) = (k/2) ||y - target||^2 with stiffness k > 0."""

    target: np.ndarray
    stiffness: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", _vec(self.target))
        object.__setattr__(self, "stiffness", float(self.stiffness))
        if self.stiffness <= 0:
            raise ValueError("stiffness must be positive")

    def _check(self, y) -> np.ndarray:
        y = _vec(y)
        if y.size != self.target.size:
            raise ValueError(f"expected a vector of length {self.target.size}, got {y.size}")
        return y

    def value(self, y) -> float:
        d = self._check(y) - self.target
        return 0.5 * self.stiffness * float(d @ d)

    def gradient(self, y) -> np.ndarray:
        return self.stiffness * (self._check(y) - self.target)

    def prox(self, q: ProxQuery) -> np.ndarray:
        v = self._check(q.point)
        return (self.stiffness * self.target + q.rho * v) / (self.stiffness + q.rho)

    def curvature_bound(self) -> float:
        return self.stiffness

    def minimizer_target(self) -> np.ndarray:
        return self.target.copy()


@dataclass(frozen=True)
class ZeroIndicatorPotential(EdgePotential):
    """Indicator of {y = 0}: the hard constraint (delta x)_e = 0."""

    def value(self, y) -> float:
        y = _vec(y)
        if np.max(np.abs(y), initial=0.0) <= _MEMBERSHIP_TOL:
            return 0.0
        return math.inf

    def gradient(self, y) -> np.ndarray:
        raise ValueError(
            "ZeroIndicator has no gradient; use the prox path (e.g. admm_solve)"
        )

    def prox(self, q: ProxQuery) -> np.ndarray:
        return np.zeros_like(q.point)

    @property
    def differentiable(self) -> bool:
        return False

    def minimizer_target(self) -> np.ndarray:
        raise ValueError("ZeroIndicator has no fixed stalk dimension; target is 0")


@dataclass(frozen=True)
class HuberPotential(EdgePotential):
    """Huber penalty of r = ||y - target||: quadratic (k/2) r^2 for r <= threshold,
    linear k*threshold*(r - threshold/2) beyond.  Convex, differentiable, with
    gradient norm capped at k*threshold.
    """

    target: np.ndarray
    stiffness: float
    threshold: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", _vec(self.target))
        object.__setattr__(self, "stiffness", float(self.stiffness))
        object.__setattr__(self, "threshold", float(self.threshold))
        if self.stiffness <= 0:
            raise ValueError("stiffness must be positive")
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")

    def _check(self, y) -> np.ndarray:
        y = _vec(y)
        if y.size != self.target.size:
            raise ValueError(f"expected a vector of length {self.target.size}, got {y.size}")
        return y

    def value(self, y) -> float:
        d = self._check(y) - self.target
        r = float(np.linalg.norm(d))
        k, tau = self.stiffness, self.threshold
        if r <= tau:
            return 0.5 * k * r * r
        return k * tau * (r - 0.5 * tau)

    def gradient(self, y) -> np.ndarray:
        d = self._check(y) - self.target
        r = float(np.linalg.norm(d))
        k, tau = self.stiffness, self.threshold
        if r <= tau:
            return k * d
        return (k * tau / r) * d

    def prox(self, q: ProxQuery) -> np.ndarray:
        v = self._check(q.point)
        d = v - self.target
        r = float(np.linalg.norm(d))
        k, tau, rho = self.stiffness, self.threshold, q.rho
        if r <= tau * (k + rho) / rho:
            # Optimum lands in the quadratic zone.
            return self.target + (rho / (k + rho)) * d
        # Linear zone: shrink the radius by k*tau/rho.
        return self.target + (1.0 - k * tau / (rho * r)) * d

    def curvature_bound(self) -> float:
        return self.stiffness

    def minimizer_target(self) -> np.ndarray:
        return self.target.copy()


def objective_value(obj: NodeObjective, x) -> float:
    """f(x); +inf off the set for the indicator variants."""
    return obj.value(x)


def node_prox(obj: NodeObjective, q: ProxQuery) -> np.ndarray:
    """argmin_x f(x) + (1/(2*rho)) ||x - v||^2 (node-side convention)."""
    return obj.prox(q)


def edge_value(pot: EdgePotential, y) -> float:
    """U(y); +inf off the set for ZeroIndicator."""
    return pot.value(y)


def edge_gradient(pot: EdgePotential, y) -> np.ndarray:
    """grad U(y); raises for ZeroIndicator (not differentiable)."""
    return pot.gradient(y)


def edge_prox(pot: EdgePotential, q: ProxQuery) -> np.ndarray:
    """argmin_w U(w) + (rho/2) ||w - v||^2 (edge-side convention)."""
    return pot.prox(q)
