"""Half-line convolution kernels on a uniform time grid.

Kernels are stored by their cell integrals ``K_i = int_{t_{i-1}}^{t_i} k``
rather than point values, so an integrable singularity at ``t = 0`` is
absorbed exactly into ``K_1``.  The discrete convolution is piecewise-constant
product integration, exact in the kernel factor:

    (a * v)(t_m) ~= sum_{j=1..m} A_{m-j+1} v_j
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.special import gammainc

# Relative slack used when reading positivity/monotonicity off stored cells.
FLAG_RTOL = 1e-12


class KernelError(ValueError):
    """Raised for invalid kernel parameters or degenerate discretizations."""


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise KernelError(f"horizon must be positive, got {self.horizon}")
        if int(self.steps) != self.steps or self.steps < 1:
            raise KernelError(f"steps must be a positive integer, got {self.steps}")

    @property
    def tau(self) -> float:
        return self.horizon / self.steps

    @property
    def nodes(self) -> np.ndarray:
        """Times ``t_0 .. t_M``."""
        return np.arange(self.steps + 1) * self.tau


def _flags(cells: np.ndarray) -> tuple[bool, bool]:
    slack = FLAG_RTOL * max(float(np.max(np.abs(cells))), 1e-300)
    nonneg = bool(np.all(cells >= -slack))
    noninc = bool(np.all(np.diff(cells) <= slack))
    return nonneg, noninc


@dataclass(frozen=True, eq=False)
class KernelGrid:
    """A kernel given by its cell integrals on ``grid``.

    The flags are derived from the stored cells, never passed in.
    """

    grid: TimeGrid
    cells: np.ndarray
    is_nonnegative: bool = field(init=False)
    is_nonincreasing: bool = field(init=False)

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float)
        if cells.shape != (self.grid.steps,):
            raise KernelError(
                f"expected {self.grid.steps} cell integrals, got shape {cells.shape}"
            )
        if not np.all(np.isfinite(cells)):
            raise KernelError("cell integrals must be finite")
        cells.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        nonneg, noninc = _flags(cells)
        object.__setattr__(self, "is_nonnegative", nonneg)
        object.__setattr__(self, "is_nonincreasing", noninc)

    @property
    def averages(self) -> np.ndarray:
        """Cell averages ``K_i / tau``, i.e. the kernel as a node sequence."""
        return self.cells / self.grid.tau

    def l1_distance(self, other: "KernelGrid") -> float:
        """Discrete L1([0,T]) distance between two kernels on the same grid."""
        _check_same_grid(self.grid, other.grid)
        return float(np.sum(np.abs(self.cells - other.cells)))


@dataclass(frozen=True)
class FracParams:
    alpha: float
    mu: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise KernelError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.mu >= 0.0:
            raise KernelError(f"mu must be nonnegative, got {self.mu}")


@dataclass(frozen=True, eq=False)
class KernelPair:
    """A PC pair ``(k, l)``; the residual is always recomputed from the grids."""

    k: KernelGrid
    l: KernelGrid

    def __post_init__(self):
        _check_same_grid(self.k.grid, self.l.grid)

    @property
    def grid(self) -> TimeGrid:
        return self.k.grid

    @property
    def identity_error(self) -> np.ndarray:
        """Nodewise ``(k*l)(t_m) - 1`` for ``m = 1..M``."""
        return convolve(self.k, self.l.averages) - 1.0

    @property
    def pair_residual(self) -> float:
        """``max_m |(k*l)(t_m) - 1|``."""
        return float(np.max(np.abs(self.identity_error)))

    @property
    def pair_residual_l1(self) -> float:
        """``tau * sum_m |(k*l)(t_m) - 1|``, the time-integrated pair defect."""
        return float(self.grid.tau * np.sum(np.abs(self.identity_error)))


def _check_same_grid(a: TimeGrid, b: TimeGrid) -> None:
    if a != b:
        raise KernelError(f"time grids differ: {a} vs {b}")


def rl_kernel(beta: float, grid: TimeGrid) -> KernelGrid:
    """Riemann-Liouville kernel ``g_beta(t) = t^(beta-1) / Gamma(beta)``.

    Cells are the exact antiderivative differences
    ``(t_i^beta - t_{i-1}^beta) / Gamma(beta + 1)``.
    """
    if not beta > 0:
        raise KernelError(f"beta must be positive, got {beta}")
    if beta == 1.0:
        # g_1 = 1; avoid roundoff in t_i - t_{i-1}
        return KernelGrid(grid, np.full(grid.steps, grid.tau))
    t = grid.nodes
    cells = np.diff(t**beta) / math.gamma(beta + 1.0)
    return KernelGrid(grid, cells)


def delta_kernel(grid: TimeGrid) -> KernelGrid:
    """Unit point mass at ``t = 0``: cells ``(1, 0, ..., 0)``.

    This is the ``alpha -> 1`` limit of ``g_{1-alpha}``; with it the time
    operator becomes the backward difference ``(u_m - u_{m-1}) / tau``.
    Note ``g_1`` is not that limit: ``d/dt (1 * w) = w`` has no time derivative.
    """
    cells = np.zeros(grid.steps)
    cells[0] = 1.0
    return KernelGrid(grid, cells)


def _scaled_gammainc(a: float, x: np.ndarray) -> np.ndarray:
    """``P(a, x) / x^a``, finite as ``x -> 0`` (limit ``1/Gamma(a+1)``).

    Power series ``e^{-x} sum_n x^n / Gamma(a+n+1)`` below ``x = 1``, the
    regularized incomplete gamma above.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1.0
    xs = x[small]
    term = np.full_like(xs, 1.0 / math.gamma(a + 1.0))
    acc = term.copy()
    for n in range(1, 40):
        term = term * xs / (a + n)
        acc += term
    out[small] = np.exp(-xs) * acc
    xl = x[~small]
    out[~small] = gammainc(a, xl) / xl**a
    return out


def _weighted_rl_primitive(a: float, mu: float, t: np.ndarray) -> np.ndarray:
    """``int_0^t g_a(s) exp(-mu s) ds = mu^-a P(a, mu t) = t^a P(a, mu t)/(mu t)^a``."""
    return t**a * _scaled_gammainc(a, mu * t)


def pc_pair(params: FracParams, grid: TimeGrid) -> KernelPair:
    """The pair ``k = g_{1-a} e^{-mu t}``, ``l = g_a e^{-mu t} + mu (1 * [g_a e^{-mu .}])``.

    For ``mu > 0`` the cells are evaluated through the regularized lower
    incomplete gamma function, including the nested term via
    ``int_0^t G = t G(t) - a mu^{-a-1} P(a+1, mu t)``.
    """
    a, mu = params.alpha, params.mu
    if mu == 0.0:
        return KernelPair(rl_kernel(1.0 - a, grid), rl_kernel(a, grid))
    t = grid.nodes
    x = mu * t
    k_cells = np.diff(_weighted_rl_primitive(1.0 - a, mu, t))
    g = _weighted_rl_primitive(a, mu, t)
    # primitive of G(t) = int_0^t g_a e^{-mu s} ds, written without mu^{-a-1}
    g_prim = t ** (a + 1.0) * (_scaled_gammainc(a, x) - a * _scaled_gammainc(a + 1.0, x))
    l_cells = np.diff(g) + mu * np.diff(g_prim)
    return KernelPair(KernelGrid(grid, k_cells), KernelGrid(grid, l_cells))


def convolve(a: KernelGrid, v: Sequence[float] | np.ndarray) -> np.ndarray:
    """Node values ``(a*v)(t_m)``, ``m = 1..M``, for ``v`` given at nodes ``1..M``.

    ``v`` may carry trailing axes (e.g. spatial cells); the convolution runs
    along axis 0.
    """
    v = np.asarray(v, dtype=float)
    M = a.grid.steps
    if v.shape[:1] != (M,):
        raise KernelError(f"expected {M} node values, got leading length {v.shape[:1]}")
    if v.ndim == 1:
        return np.convolve(a.cells, v)[:M]
    flat = v.reshape(M, -1)
    out = np.empty_like(flat)
    for c in range(flat.shape[1]):
        out[:, c] = np.convolve(a.cells, flat[:, c])[:M]
    return out.reshape(v.shape)


def resolvent_kernel(l: KernelGrid, n: int) -> KernelGrid:
    """Resolvent ``h_n`` of ``n l``: ``h + n (h*l) = n l`` at every node.

    In cell-integral unknowns ``H_m`` the equation is lower triangular,
    ``H_m (1 + n L_1) = n L_m - n sum_{j<m} L_{m-j+1} H_j``,
    and is solved by forward substitution.
    """
    if int(n) != n or n < 1:
        raise KernelError(f"n must be a positive integer, got {n}")
    if not l.is_nonnegative:
        raise KernelError("resolvent requires a nonnegative kernel l")
    L = l.cells
    lead = 1.0 + n * L[0]
    if not lead > 0:
        raise KernelError(f"degenerate leading weight 1 + n*L_1 = {lead}")
    M = l.grid.steps
    H = np.zeros(M)
    for m in range(M):
        hist = np.dot(L[m:0:-1], H[:m]) if m else 0.0
        H[m] = n * (L[m] - hist) / lead
    return KernelGrid(l.grid, H)


def resolvent_residual(l: KernelGrid, h: KernelGrid, n: int) -> float:
    """``max_m |H_m + n (h*l)_m - n L_m|`` in cell-integral form."""
    lhs = h.cells + n * np.convolve(l.cells, h.cells)[: l.grid.steps]
    return float(np.max(np.abs(lhs - n * l.cells)))


def yosida_kernel(pair: KernelPair, n: int) -> KernelGrid:
    """``k_n = k * h_n`` with cells ``tau * (k*h_n)(t_m)``."""
    h = resolvent_kernel(pair.l, n)
    tau = pair.grid.tau
    return KernelGrid(pair.grid, tau * convolve(pair.k, h.averages))


@dataclass(frozen=True)
class IdentityCheck:
    """Residuals of the fundamental identity and the basic inequality."""

    identity_residual: float
    inequality_violation: float
    lhs: np.ndarray
    rhs: np.ndarray


def _h_plus(y):
    return 0.5 * np.maximum(y, 0.0) ** 2


def _h_minus(y):
    return 0.5 * np.minimum(y, 0.0) ** 2


def check_fundamental_identity(
    k: KernelGrid,
    u: Sequence[float] | np.ndarray,
    variant: Literal["plus", "minus"] = "plus",
) -> IdentityCheck:
    """Discrete fundamental identity for ``H = H_+`` or ``H_-``.

    ``u`` holds values at nodes ``1..M``.  The operator ``d/dt (k*v)`` is the
    backward difference of the product-integration sum,
    ``B_m(v) = (S_m(v) - S_{m-1}(v)) / tau`` with ``S_m(v) = sum_j K_{m-j+1} v_j``.
    Writing ``d_i = K_i - K_{i+1}`` (the cell form of ``-kdot``) one has

        H'(u_m) B_m(u) = B_m(H(u)) + (H'(u_m) u_m - H(u_m)) K_m / tau
                         + sum_{i<m} [H(u_{m-i}) - H(u_m) - H'(u_m)(u_{m-i} - u_m)] d_i / tau

    exactly.  Returns the nodewise identity residual and the worst violation
    of the basic inequality ``u_pm B_m(u) >= B_m(H(u))``.
    """
    if not k.is_nonincreasing:
        raise KernelError("basic inequality requires a nonincreasing kernel")
    if variant not in ("plus", "minus"):
        raise KernelError(f"variant must be 'plus' or 'minus', got {variant!r}")
    u = np.asarray(u, dtype=float)
    M = k.grid.steps
    if u.shape != (M,):
        raise KernelError(f"u must have {M} node values, got shape {u.shape}")
    tau = k.grid.tau
    if variant == "plus":
        H, dH = _h_plus, (lambda y: np.maximum(y, 0.0))
    else:
        H, dH = _h_minus, (lambda y: np.minimum(y, 0.0))
    K = k.cells
    Hu = H(u)

    def B(v):
        S = np.concatenate(([0.0], np.convolve(K, v)[:M]))
        return np.diff(S) / tau

    lhs = dH(u) * B(u)
    BH = B(Hu)
    d = -np.diff(K)
    rhs = np.empty(M)
    for m in range(M):
        um, hm, dm = u[m], Hu[m], dH(u[m])
        past = u[m - 1 :: -1] if m else u[:0]  # u_{m-1}, ..., u_1 (0-based)
        rem = H(past) - hm - dm * (past - um)
        rhs[m] = BH[m] + (dm * um - hm) * K[m] / tau + np.dot(rem, d[:m]) / tau
    resid = float(np.max(np.abs(lhs - rhs)))
    violation = float(max(0.0, np.max(BH - lhs)))
    return IdentityCheck(resid, violation, lhs, BH)
