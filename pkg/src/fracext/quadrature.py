"""Quadrature engines and extrapolation utilities.

Three rule families cover every integral in the package:

* generalized Gauss-Laguerre rules (``scipy.special.roots_genlaguerre``) for
  integrands of the form ``t^{alpha-1} e^{-c t} * smooth``;
* tanh-sinh rules on ``(0, 1)`` combined with exact power substitutions, for
  integrands with an algebraic endpoint singularity ``x^p * smooth``;
* trapezoid rules on the log axis, whose transformed integrands decay
  exponentially (or double-exponentially) in both directions.

All adaptive drivers refine by halving the step and comparing successive
values; summation order over nodes is fixed, so results are deterministic for
a fixed :class:`QuadratureSpec`.  Failure to meet the tolerance within the
halving budget raises :class:`ConvergenceError` carrying the achieved
residual.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_genlaguerre

__all__ = [
    "QuadratureSpec",
    "ConvergenceError",
    "gauss_laguerre_rule",
    "gauss_legendre_rule",
    "tanh_sinh_rule",
    "integrate_unit",
    "trapezoid_refine",
    "richardson_table",
    "richardson",
]

SCHEMES = ("gauss_laguerre_generalized", "tanh_sinh_adaptive")


class ConvergenceError(RuntimeError):
    """Quadrature or extrapolation failed to reach the requested tolerance."""

    def __init__(self, message, achieved=None, required=None):
        if achieved is not None and required is not None:
            message = f"{message} (achieved residual {achieved:.3e}, required {required:.3e})"
        super().__init__(message)
        self.achieved = achieved
        self.required = required


@dataclass(frozen=True)
class QuadratureSpec:
    """Node/weight scheme selection for the semigroup-subordination integrals.

    ``scheme`` picks the rule family: ``gauss_laguerre_generalized`` for
    Laguerre-weighted integrands, ``tanh_sinh_adaptive`` for the
    double-exponential family (tanh-sinh on finite intervals, log-axis
    trapezoid on semi-infinite ones).  ``nodes`` sets the first-level node
    budget, ``alpha`` the Laguerre weight exponent, ``tol`` the refinement
    target.

    The Laguerre scheme is honored by the plain extension evaluator and the
    inverse fractional powers, where the weight matches the integrand; the
    derivative and boundary-trace machinery always integrates on the log
    axis, where the subordination kernel's essential singularity is benign.
    """

    scheme: str = "tanh_sinh_adaptive"
    nodes: int = 128
    alpha: float = 0.0
    tol: float = 1e-12

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if self.nodes < 8:
            raise ValueError(f"need at least 8 nodes, got {self.nodes}")
        if self.alpha <= -1.0:
            raise ValueError(f"Laguerre weight exponent must exceed -1, got {self.alpha}")
        if self.tol <= 0.0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")


# -- fixed rules ---------------------------------------------------------------


@lru_cache(maxsize=64)
def gauss_laguerre_rule(n, alpha):
    """Nodes and weights for ``int_0^inf x^alpha e^-x f(x) dx``.

    The Golub-Welsch weights degrade to non-finite values for very large
    rules (n >= ~512); those are rejected rather than silently returned.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        x, w = roots_genlaguerre(n, alpha)
    if not (np.isfinite(x).all() and np.isfinite(w).all()):
        raise ValueError(f"Gauss-Laguerre rule with {n} nodes is numerically degenerate")
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=16)
def gauss_legendre_rule(n):
    """Nodes and weights on ``[-1, 1]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=64)
def tanh_sinh_rule(h, tmax=4.0):
    """Endpoint-stable tanh-sinh nodes/weights on ``(0, 1)``.

    Nodes near 0 are computed through ``1/(1 + e^{2z})`` so their distance to
    the endpoint stays accurate down to ~1e-300; nodes that underflow to the
    endpoints are dropped (their weights are negligible).
    """
    k = np.arange(-int(tmax / h), int(tmax / h) + 1)
    z = 0.5 * np.pi * np.sinh(k * h)
    x = 1.0 / (1.0 + np.exp(-2.0 * z))
    w = h * (0.25 * np.pi) * np.cosh(k * h) / np.cosh(z) ** 2
    keep = (x > 0.0) & (x < 1.0) & (w > 1e-300)
    x, w = x[keep], w[keep]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


# -- adaptive drivers ----------------------------------------------------------


def _norm(value):
    return float(np.linalg.norm(np.atleast_1d(value)))


_EPS = float(np.finfo(float).eps)


def _refine_target(tol, current, mass):
    """Stopping threshold: the requested tolerance, floored by roundoff.

    ``mass`` is the L1 size of the weighted integrand; when it dwarfs the
    integral's value the achievable absolute accuracy is ``eps * mass`` and
    further refinement cannot improve on it.
    """
    return max(tol * max(1.0, _norm(current)), 32.0 * _EPS * mass)


def integrate_unit(f, tol, singular_power=0.0, nodes0=64, max_halvings=5, name="integral"):
    """Adaptive ``int_0^1 x^p f(x) dx`` with ``p = singular_power > -1``.

    The power substitution ``x = w^{1/(1+p)}`` removes the endpoint
    singularity exactly, after which tanh-sinh handles the remaining
    (derivative-level) endpoint behavior.  ``f`` must be vectorized, bounded
    on ``(0, 1]``, and may return arrays of shape ``(len(x), ...)``; the node
    axis is reduced.
    """
    if singular_power <= -1.0:
        raise ValueError(f"endpoint power must exceed -1, got {singular_power}")
    q = 1.0 / (1.0 + singular_power)
    h = min(0.5, 8.0 / max(nodes0, 16))
    previous = None
    achieved = np.inf
    for _ in range(max_halvings + 1):
        w_nodes, weights = tanh_sinh_rule(h)
        x = w_nodes**q if q != 1.0 else w_nodes
        vals = np.asarray(f(x))
        shaped = weights.reshape((-1,) + (1,) * (vals.ndim - 1))
        current = q * np.sum(shaped * vals, axis=0)
        mass = q * float(np.sum(shaped * np.abs(vals)))
        if previous is not None:
            achieved = _norm(current - previous)
            if achieved <= _refine_target(tol, current, mass):
                return current
        previous = current
        h *= 0.5
    raise ConvergenceError(
        f"{name}: tanh-sinh refinement stalled", achieved=achieved, required=tol
    )


def trapezoid_refine(g, lo, hi, tol, h0=0.25, max_halvings=6, name="integral"):
    """Adaptive composite trapezoid of a vectorized ``g`` on ``[lo, hi]``.

    Intended for integrands that decay (near) to zero at both window edges,
    where the trapezoid rule on an exponentially decaying smooth function
    converges geometrically in ``1/h``.
    """
    if hi <= lo:
        raise ValueError(f"empty integration window [{lo}, {hi}]")
    h = h0
    previous = None
    achieved = np.inf
    for _ in range(max_halvings + 1):
        x = np.arange(lo, hi + 0.5 * h, h)
        vals = np.asarray(g(x))
        weights = np.full(x.shape, h)
        weights[0] *= 0.5
        weights[-1] *= 0.5
        shaped = weights.reshape((-1,) + (1,) * (vals.ndim - 1))
        current = np.sum(shaped * vals, axis=0)
        mass = float(np.sum(shaped * np.abs(vals)))
        if previous is not None:
            achieved = _norm(current - previous)
            if achieved <= _refine_target(tol, current, mass):
                return current
        previous = current
        h *= 0.5
    raise ConvergenceError(
        f"{name}: trapezoid refinement stalled", achieved=achieved, required=tol
    )


# -- Richardson extrapolation ----------------------------------------------------


def richardson_table(values, exponents, ratio=2.0):
    """Richardson table for values sampled along ``y_j = y_0 ratio^{-j}``.

    ``values[j]`` is the quantity at ``y_j`` (scalars or arrays); the error is
    modeled as ``sum_k C_k y^{p_k}`` with ``p_k`` given by ``exponents`` in
    the order they are eliminated.  Returns the list of levels; ``levels[0]``
    is the input and each further level is one elimination deeper.
    """
    levels = [[np.asarray(v) for v in values]]
    for p in exponents:
        prev = levels[-1]
        if len(prev) < 2:
            break
        factor = ratio ** (-p)
        levels.append(
            [(prev[i + 1] - factor * prev[i]) / (1.0 - factor) for i in range(len(prev) - 1)]
        )
    return levels


def richardson(values, exponents, ratio=2.0):
    """Deepest Richardson extrapolant (last entry of the last level)."""
    return richardson_table(values, exponents, ratio)[-1][-1]


def extrapolation_spread(levels):
    """Cauchy estimate of the remaining extrapolation error.

    The difference of the last two entries on the deepest level that still
    has two; entries on one level are fully extrapolated estimates from
    shifted windows, so their gap bounds what is left.
    """
    for level in reversed(levels):
        if len(level) >= 2:
            return float(np.linalg.norm(np.atleast_1d(level[-1] - level[-2])))
    return np.inf
