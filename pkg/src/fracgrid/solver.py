"""Implicit solver for ``d/dt (k * (u - u0)) - div a(Du) = b`` on rectangles.

Time: backward difference of the product-integration sum.  At step ``m``

    D_m(u) = (K_1/tau) (u_m - ubar_m),
    ubar_m = (K_m u_0 + sum_{j<m} (K_{m-j} - K_{m-j+1}) u_j) / K_1,

so for a nonincreasing kernel ``ubar_m`` is a convex combination of the
history.  Space: forward differences; the step minimizes the convex energy

    E(v) = vol * [ K_1/(2 tau) |v - ubar|^2 + sum (C0/p)(|D v|^2 + eps^2)^{p/2}
                   + sum (c2/gamma)(v^2 + eps^2)^{gamma/2} - <g, v> ]

over interior cells with Dirichlet values held fixed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .grid import DomainGrid, GridFunction, forward_gradient
from .kernels import FracParams, KernelGrid, KernelPair, TimeGrid, pc_pair

log = logging.getLogger(__name__)

Data = Union[float, np.ndarray, Callable[..., np.ndarray]]

KINDS = ("pLaplace", "pLaplaceLowerOrder", "naturalGrowth")


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class Nonlinearity:
    """Flux ``a = C0 (|eta|^2 + eps^2)^{(p-2)/2} eta`` plus an optional lower-order term.

    ``pLaplaceLowerOrder`` adds the absorption ``b = -c2 |u|^{gamma-2} u``
    (regularized like the flux); ``naturalGrowth`` adds the gradient source
    ``b = C2 min(|Du|^p, cap)``, treated by lagging.
    """

    kind: str = "pLaplace"
    p: float = 2.0
    gamma: float = 1.5
    C0: float = 1.0
    C1: float = 1.0
    C2: float = 0.0
    c0: float = 0.0
    c1: float = 0.0
    c2: float = 0.0
    eps_reg: Optional[float] = None
    cap: float = 1e6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.p > 1:
            raise ValueError("p must exceed 1")
        if not self.C0 > 0:
            raise ValueError("C0 must be positive")
        if self.eps_reg is None:
            # |eta|^p and |u|^gamma have unbounded curvature at 0 below exponent 2
            singular = self.p < 2 or (self.kind == "pLaplaceLowerOrder" and self.gamma < 2)
            object.__setattr__(self, "eps_reg", 1e-8 if singular else 0.0)
        if not self.eps_reg >= 0:
            raise ValueError("eps_reg must be nonnegative")

    @property
    def eps(self) -> float:
        return float(self.eps_reg)

    @property
    def absorption(self) -> float:
        return self.c2 if self.kind == "pLaplaceLowerOrder" else 0.0


@dataclass
class SolveConfig:
    kernel: Union[FracParams, KernelPair, KernelGrid]
    domain: DomainGrid
    time: TimeGrid
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity)
    u0: Data = 0.0
    boundary: Data = 0.0
    source: Data = 0.0
    tol: float = 1e-10
    max_iter: int = 200
    method: Literal["newton", "gd"] = "newton"
    fp_tol: float = 1e-10
    fp_max_iter: int = 100

    def __post_init__(self):
        if not (self.tol > 0 and self.fp_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def kernel_grid(self) -> KernelGrid:
        k = self.kernel
        if isinstance(k, FracParams):
            return pc_pair(k, self.time).k
        if isinstance(k, KernelPair):
            return k.k
        return k


# ---------------------------------------------------------------------------
# time weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StepWeights:
    """Weights of ``D_m``; ``history_diffs[i-1] = K_i - K_{i+1}``."""

    cells: np.ndarray
    tau: float

    @property
    def lead(self) -> float:
        """Coefficient of ``u_m``: ``K_1 / tau``."""
        return float(self.cells[0] / self.tau)

    @property
    def history_diffs(self) -> np.ndarray:
        return -np.diff(self.cells)

    @property
    def monotone(self) -> bool:
        return bool(np.all(self.history_diffs >= -1e-14 * self.cells[0]))

    def coefficients(self, m: int) -> np.ndarray:
        """Weights of ``u_0 .. u_{m-1}`` in ``K_1 ubar_m`` (they sum to ``K_1``)."""
        d = self.history_diffs
        return np.concatenate(([self.cells[m - 1]], d[: m - 1][::-1]))

    def target(self, m: int, history: np.ndarray) -> np.ndarray:
        """``ubar_m`` from slices ``u_0 .. u_{m-1}``."""
        c = self.coefficients(m)
        return np.tensordot(c, history[:m], axes=(0, 0)) / self.cells[0]

    def operator(self, m: int, history: np.ndarray, um: np.ndarray) -> np.ndarray:
        """``D_m(u)`` given ``u_0 .. u_{m-1}`` and ``u_m``."""
        return self.lead * (um - self.target(m, history))


def step_weights(k: KernelGrid) -> StepWeights:
    if not k.cells[0] > 0:
        raise SolverError(f"leading weight K_1 = {k.cells[0]} must be positive")
    return StepWeights(np.asarray(k.cells), k.grid.tau)


# ---------------------------------------------------------------------------
# spatial energy
# ---------------------------------------------------------------------------


def _diff_matrices(domain: DomainGrid) -> list[sp.csr_matrix]:
    """Sparse forward-difference operators, zero rows where no forward neighbour."""
    shape = domain.shape
    n = int(np.prod(shape))
    idx = np.arange(n).reshape(shape)
    mats = []
    for ax, h in enumerate(domain.spacing):
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        rows = idx[tuple(lo)].ravel()
        cols_hi = idx[tuple(hi)].ravel()
        data = np.concatenate((np.full(rows.size, 1.0 / h), np.full(rows.size, -1.0 / h)))
        mats.append(
            sp.csr_matrix(
                (data, (np.concatenate((rows, rows)), np.concatenate((cols_hi, rows)))),
                shape=(n, n),
            )
        )
    return mats


class StepProblem:
    """Energy, gradient and Hessian of one implicit step in interior unknowns."""

    def __init__(self, domain: DomainGrid, nl: Nonlinearity, lead: float):
        self.domain = domain
        self.nl = nl
        self.lead = lead
        self.vol = domain.cell_volume
        self.D = _diff_matrices(domain)
        self.DT = [d.T.tocsr() for d in self.D]
        self.interior = np.flatnonzero(domain.interior.ravel())
        self.D_int = [d[:, self.interior].tocsc() for d in self.D]
        self.DT_int = [d.T.tocsr() for d in self.D_int]
        # with p = 2 and no absorption the Hessian is the same at every v
        self._const_hessian = nl.p == 2.0 and not nl.absorption
        self._hess_cache = None
        self.full = np.zeros(int(np.prod(domain.shape)))
        self.target = None
        self.g = None

    def set_step(self, target: np.ndarray, boundary_slice: np.ndarray, g: np.ndarray):
        full = np.asarray(boundary_slice, dtype=float).ravel().copy()
        self.full = full
        self.target = np.asarray(target, dtype=float).ravel()[self.interior]
        self.g = np.asarray(g, dtype=float).ravel()[self.interior]

    def expand(self, v: np.ndarray) -> np.ndarray:
        w = self.full.copy()
        w[self.interior] = v
        return w

    def _grads(self, w):
        return [d @ w for d in self.D]

    def energy(self, v: np.ndarray) -> float:
        nl = self.nl
        w = self.expand(v)
        s = sum(e**2 for e in self._grads(w)) + nl.eps**2
        flux = nl.C0 / nl.p * np.sum(s ** (nl.p / 2.0))
        e = 0.5 * self.lead * np.sum((v - self.target) ** 2) + flux - np.dot(self.g, v)
        if nl.absorption:
            e += nl.absorption / nl.gamma * np.sum((v**2 + nl.eps**2 + 1e-300) ** (nl.gamma / 2.0))
        return float(self.vol * e)

    def _flux_coeff(self, s):
        p = self.nl.p
        if p == 2.0:
            return np.full_like(s, self.nl.C0)
        with np.errstate(divide="ignore", invalid="ignore"):
            c = np.where(s > 0, s ** ((p - 2.0) / 2.0), 0.0 if p > 2 else np.inf)
        return self.nl.C0 * c

    def gradient(self, v: np.ndarray) -> np.ndarray:
        nl = self.nl
        w = self.expand(v)
        grads = self._grads(w)
        s = sum(e**2 for e in grads) + nl.eps**2
        c = self._flux_coeff(s)
        div = sum(dt @ (c * e) for dt, e in zip(self.DT, grads))
        out = self.lead * (v - self.target) + div[self.interior] - self.g
        if nl.absorption:
            out += nl.absorption * (v**2 + nl.eps**2) ** ((nl.gamma - 2.0) / 2.0) * v
        return self.vol * out

    def hessian(self, v: np.ndarray) -> sp.csc_matrix:
        if self._const_hessian:
            if self._hess_cache is None:
                self._hess_cache = self._assemble_hessian(v)
            return self._hess_cache
        return self._assemble_hessian(v)

    def _assemble_hessian(self, v: np.ndarray) -> sp.csc_matrix:
        nl = self.nl
        p = nl.p
        w = self.expand(v)
        grads = self._grads(w)
        s = sum(e**2 for e in grads) + nl.eps**2
        c = self._flux_coeff(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            c2 = np.where(s > 0, nl.C0 * (p - 2.0) * s ** ((p - 4.0) / 2.0), 0.0)
        H = None
        for i in range(len(self.D)):
            for j in range(len(self.D)):
                diag = c2 * grads[i] * grads[j]
                if i == j:
                    diag = diag + c
                term = self.DT_int[i] @ sp.diags(diag) @ self.D_int[j]
                H = term if H is None else H + term
        d = np.full(self.interior.size, self.lead)
        if nl.absorption:
            g = nl.gamma
            d = d + nl.absorption * (g - 1.0 + (2.0 - g) * nl.eps**2 / (v**2 + nl.eps**2)) * (
                v**2 + nl.eps**2
            ) ** ((g - 2.0) / 2.0)
        return (self.vol * (H + sp.diags(d))).tocsc()


@dataclass
class InnerResult:
    v: np.ndarray
    iterations: int
    grad_norm: float
    energy: float
    converged: bool


def _line_search(prob: StepProblem, v: np.ndarray, d: np.ndarray, slope0: float) -> float:
    """Step along ``d`` with ``|phi'(t)| <= 0.1 |phi'(0)|``, ``phi(t) = E(v + t d)``.

    ``phi'`` is nondecreasing because the energy is convex, so its zero is
    bracketed and found by Illinois regula falsi.  A unit step is preferred.
    """

    def dphi(t):
        return float(np.dot(prob.gradient(v + t * d), d))

    target = 0.1 * abs(slope0)
    t_lo, f_lo = 0.0, slope0
    t_hi, f_hi = 1.0, dphi(1.0)
    if abs(f_hi) <= target:
        return 1.0
    while f_hi < 0 and t_hi < 1e6:
        t_lo, f_lo = t_hi, f_hi
        t_hi *= 4.0
        f_hi = dphi(t_hi)
    if f_hi < 0:
        return t_hi
    side = 0
    t = t_hi
    for _ in range(60):
        t = (t_lo * f_hi - t_hi * f_lo) / (f_hi - f_lo)
        ft = dphi(t)
        if abs(ft) <= target:
            return t
        if ft < 0:
            t_lo, f_lo = t, ft
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            t_hi, f_hi = t, ft
            if side == 1:
                f_lo *= 0.5
            side = 1
    return t


def minimize(
    prob: StepProblem,
    v0: np.ndarray,
    tol: float,
    max_iter: int,
    method: str = "newton",
) -> InnerResult:
    """Minimize the step energy; stop at ``|grad| <= tol (1 + |E|)``.

    ``newton`` uses the sparse Hessian, ``gd`` steepest descent; both with a
    curvature-condition line search.
    """
    v = np.array(v0, dtype=float)
    E = prob.energy(v)
    g = prob.gradient(v)
    gn = float(np.linalg.norm(g))
    for it in range(max_iter + 1):
        if gn <= tol * (1.0 + abs(E)):
            return InnerResult(v, it, gn, E, True)
        if it == max_iter:
            break
        d = -spsolve(prob.hessian(v), g) if method == "newton" else -g
        slope = float(np.dot(g, d))
        if not slope < 0:
            d, slope = -g, -(gn**2)
        t = _line_search(prob, v, d, slope)
        vn = v + t * d
        En = prob.energy(vn)
        gn_new = float(np.linalg.norm(prob.gradient(vn)))
        # near roundoff the energy can tick up; accept if the gradient shrinks
        if En > E + 1e-14 * (1.0 + abs(E)) and not gn_new < gn:
            break
        v, E = vn, En
        g = prob.gradient(v)
        gn = float(np.linalg.norm(g))
    return InnerResult(v, max_iter, gn, E, False)


# ---------------------------------------------------------------------------
# data resolution
# ---------------------------------------------------------------------------


def _resolve(data: Data, config: SolveConfig, m: Optional[int] = None) -> np.ndarray:
    """Evaluate a data spec on the grid (slice ``m`` of the time grid, if given)."""
    shape = config.domain.shape
    if callable(data):
        t = config.time.nodes[m] if m is not None else 0.0
        return np.broadcast_to(np.asarray(data(t, *config.domain.coordinates()), float), shape)
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape == shape:
        return arr
    if m is not None and arr.shape == (config.time.steps + 1,) + shape:
        return arr[m]
    raise ValueError(f"cannot broadcast data of shape {arr.shape} to grid {shape}")


def gradient_magnitude(v: np.ndarray, spacing) -> np.ndarray:
    g = forward_gradient(v, spacing)
    return np.sqrt(np.sum(g**2, axis=0))


# ---------------------------------------------------------------------------
# stepping
# ---------------------------------------------------------------------------


@dataclass
class SolveResult:
    field: GridFunction
    diagnostics: dict


class _Stepper:
    def __init__(self, config: SolveConfig):
        self.config = config
        self.k = config.kernel_grid()
        if self.k.grid != config.time:
            raise SolverError("kernel grid and time grid differ")
        self.weights = step_weights(self.k)
        self.prob = StepProblem(config.domain, config.nonlinearity, self.weights.lead)
        self.interior = config.domain.interior

    def setup(self, m: int, history: np.ndarray, g: np.ndarray):
        cfg = self.config
        target = self.weights.target(m, history)
        bslice = np.where(self.interior, 0.0, _resolve(cfg.boundary, cfg, m))
        self.prob.set_step(target, bslice, g)

    def solve(self, v0_slice: np.ndarray) -> tuple[np.ndarray, InnerResult]:
        cfg = self.config
        v0 = v0_slice.ravel()[self.prob.interior]
        res = minimize(self.prob, v0, cfg.tol, cfg.max_iter, cfg.method)
        out = self.prob.expand(res.v).reshape(cfg.domain.shape)
        return out, res


def implicit_step(
    history: np.ndarray, m: int, config: SolveConfig, stepper: Optional[_Stepper] = None
) -> tuple[np.ndarray, InnerResult]:
    """Compute ``u_m`` from ``u_0 .. u_{m-1}``.

    Raises ``SolverError`` when the inner minimization misses its tolerance.
    """
    st = stepper or _Stepper(config)
    g = _resolve(config.source, config, m)
    st.setup(m, history, g)
    um, res = st.solve(history[m - 1])
    if not res.converged:
        raise SolverError(
            f"step {m}: inner solver stopped after {res.iterations} iterations "
            f"with gradient norm {res.grad_norm:.3e}"
        )
    return um, res


def natural_growth_step(
    history: np.ndarray, m: int, config: SolveConfig, stepper: Optional[_Stepper] = None
) -> tuple[np.ndarray, InnerResult, dict]:
    """``u_m`` with the gradient source lagged inside a fixed-point loop.

    Returns the slice, the last inner result and ``{"fp_iterations", "cap_active"}``.
    """
    nl = config.nonlinearity
    st = stepper or _Stepper(config)
    f = _resolve(config.source, config, m)
    spacing = config.domain.spacing
    u = history[m - 1].copy()
    cap_active = False
    for it in range(1, config.fp_max_iter + 1):
        gm = gradient_magnitude(u, spacing) ** nl.p
        cap_active = cap_active or bool(np.any(gm > nl.cap))
        g = f + nl.C2 * np.minimum(gm, nl.cap)
        st.setup(m, history, g)
        un, res = st.solve(u)
        if not res.converged:
            raise SolverError(f"step {m}: inner solver failed (|grad|={res.grad_norm:.3e})")
        change = float(np.max(np.abs(un - u)))
        u = un
        if change <= config.fp_tol * (1.0 + float(np.max(np.abs(u)))):
            return u, res, {"fp_iterations": it, "cap_active": cap_active}
    raise SolverError(f"step {m}: fixed-point iteration stalled (last change {change:.3e})")


def solve(config: SolveConfig) -> SolveResult:
    """March ``m = 1..M``; diagnostics record inner iterations and slice extrema."""
    st = _Stepper(config)
    M = config.time.steps
    shape = config.domain.shape
    u = np.empty((M + 1,) + shape)
    u[0] = _resolve(config.u0, config)
    iters, grads, mx, mn, fp_iters = [], [], [], [], []
    cap_active = False
    natural = config.nonlinearity.kind == "naturalGrowth"
    for m in range(1, M + 1):
        if natural:
            u[m], res, info = natural_growth_step(u, m, config, st)
            fp_iters.append(info["fp_iterations"])
            cap_active = cap_active or info["cap_active"]
        else:
            u[m], res = implicit_step(u, m, config, st)
        iters.append(res.iterations)
        grads.append(res.grad_norm)
        mx.append(float(u[m].max()))
        mn.append(float(u[m].min()))
    diag = {
        "inner_iterations": iters,
        "grad_norms": grads,
        "slice_max": mx,
        "slice_min": mn,
        "history_monotone": st.weights.monotone,
        "method": config.method,
    }
    if natural:
        diag["fp_iterations"] = fp_iters
        diag["cap_active"] = cap_active
        diag["structure"] = "outside structure (Q)" if cap_active else "structure (Q)"
    return SolveResult(GridFunction(config.domain, config.time, u), diag)


def fractional_ode(k: KernelGrid, f: Data = 1.0, u0: float = 0.0) -> np.ndarray:
    """Spatially homogeneous problem ``d/dt (k * (u - u0)) = f``; returns ``u_0 .. u_M``.

    ``f`` is a constant, an array of node values ``f_1..f_M`` or a callable of ``t``.
    """
    w = step_weights(k)
    M = k.grid.steps
    t = k.grid.nodes
    if callable(f):
        fv = np.asarray(f(t[1:]), dtype=float)
    else:
        fv = np.broadcast_to(np.asarray(f, dtype=float), (M,))
    u = np.empty(M + 1)
    u[0] = u0
    for m in range(1, M + 1):
        u[m] = w.target(m, u) + fv[m - 1] / w.lead
    return u


def refinement_order(hs, errs) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


def heat_mode_error(n_cells: int, steps: int, horizon: float = 0.1) -> float:
    """Max-norm error at ``T`` for ``u = e^{-pi^2 t} sin(pi x)``, ``p = 2``, backward Euler.

    Uses the point-mass kernel, for which the time operator is the plain
    backward difference.
    """
    from .kernels import delta_kernel

    domain = DomainGrid((1.0,), (n_cells,))
    time = TimeGrid(horizon, steps)
    cfg = SolveConfig(
        kernel=delta_kernel(time),
        domain=domain,
        time=time,
        nonlinearity=Nonlinearity(p=2.0),
        u0=lambda t, x: np.sin(math.pi * x),
        boundary=0.0,
        source=0.0,
    )
    out = solve(cfg).field
    (x,) = domain.coordinates()
    exact = math.exp(-math.pi**2 * horizon) * np.sin(math.pi * x)
    return float(np.max(np.abs(out.values[-1] - exact)))
