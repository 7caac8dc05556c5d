"""De Giorgi level-set machinery on discrete space-time fields."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .exponents import ExponentSet, conjugate
from .grid import GridFunction, forward_gradient


class IterationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# geometric convergence lemmas
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecursionParams:
    C: float
    b: float
    alpha: float
    delta: Optional[float] = None

    def __post_init__(self):
        if not self.C > 1 or not self.b > 1:
            raise IterationError("C and b must exceed 1")
        if not self.alpha > 0:
            raise IterationError("alpha must be positive")
        if self.delta is not None and not self.delta >= self.alpha:
            raise IterationError("delta must be >= alpha")


def lemma_threshold(params: RecursionParams, mode: Literal["single", "double"]) -> float:
    """Largest admissible ``Y_0``: ``C^{-1/a} b^{-1/a^2}`` (``2C`` in double mode).

    Underflows to 0 for small ``alpha``; use ``log_lemma_threshold`` there.
    """
    return math.exp(log_lemma_threshold(params, mode))


def log_lemma_threshold(params: RecursionParams, mode: str) -> float:
    if mode not in ("single", "double"):
        raise IterationError(f"mode must be 'single' or 'double', got {mode!r}")
    c = params.C if mode == "single" else 2.0 * params.C
    a = params.alpha
    return -math.log(c) / a - math.log(params.b) / a**2


@dataclass
class LemmaRun:
    mode: str
    log_y: np.ndarray
    log_bound: np.ndarray
    holds: bool
    first_violation: Optional[int]
    diverged_at: Optional[int]

    @property
    def y(self) -> np.ndarray:
        with np.errstate(under="ignore"):
            return np.exp(self.log_y)

    @property
    def verdict(self) -> str:
        if self.diverged_at is not None:
            return f"diverged at {self.diverged_at}"
        return "pass" if self.holds else f"violated at {self.first_violation}"


def lemma_iterate(
    params: RecursionParams,
    y0: Optional[float] = None,
    n_max: int = 50,
    mode: Literal["single", "double"] = "single",
    rtol: float = 1e-9,
    log_y0: Optional[float] = None,
) -> LemmaRun:
    """Iterate the worst-case recursion with equality and test the decay bound.

    single: ``Y_{n+1} = C b^n Y_n^{1+a}``; double: ``Y_{n+1} = C b^n (Y_n^{1+a} + Y_n^{1+d})``.
    The bound is ``Y_n <= Y* b^{-n/a}`` with ``Y*`` the lemma threshold.

    The iteration runs on ``z_n = log(Y_n / (Y* b^{-n/a}))``, in which the
    single recursion reads ``z_{n+1} = (1+a) z_n`` and the double one
    ``z_{n+1} = log((e^{(1+a) z_n} + e^{(1+d) z_n + (d-a) log(Y* b^{-n/a})}) / 2)``.
    This is an exact rewrite; iterating ``Y`` directly amplifies rounding at
    the threshold by ``(1+a)^n``.  ``log_y0`` replaces ``y0`` when the
    start is below the floating-point range.
    """
    if log_y0 is None:
        if y0 is None or not y0 > 0:
            raise IterationError("Y_0 must be positive")
        log_y0 = math.log(y0)
    if mode == "double" and params.delta is None:
        raise IterationError("double mode needs delta")
    a = params.alpha
    d = params.delta if params.delta is not None else a
    log_b = math.log(params.b)
    log_star = log_lemma_threshold(params, mode)
    log_bound = log_star - np.arange(n_max + 1) * log_b / a

    z = np.full(n_max + 1, np.nan)
    z[0] = log_y0 - log_star
    diverged = None
    for n in range(n_max):
        zn = z[n]
        if mode == "single":
            nxt = (1.0 + a) * zn
        else:
            t1 = (1.0 + a) * zn
            t2 = (1.0 + d) * zn + (d - a) * log_bound[n]
            nxt = np.logaddexp(t1, t2) - math.log(2.0)
        # beyond ~1e300 in Y the sequence has left floating-point range
        if not math.isfinite(nxt) or nxt + log_bound[n + 1] > 690.0:
            diverged = n + 1
            break
        z[n + 1] = nxt
    done = ~np.isnan(z)
    viol = np.nonzero(done & (z > math.log1p(rtol)))[0]
    first = int(viol[0]) if viol.size else None
    holds = first is None and diverged is None
    return LemmaRun(mode, z + log_bound, log_bound, holds, first, diverged)


# ---------------------------------------------------------------------------
# level sets and truncated energies
# ---------------------------------------------------------------------------


def _weights(u: GridFunction) -> float:
    return u.domain.cell_volume * u.time.tau


def level_measure(u: GridFunction, kappa: float, gamma: float = 1.0) -> tuple[float, float]:
    """``(int_0^T |A_kappa(t)| dt, int int (u - kappa)_+^gamma)`` over all grid cells."""
    w = _weights(u)
    v = u.slices
    excess = np.maximum(v - kappa, 0.0)
    above = v > kappa
    return float(above.sum() * w), float(np.sum(excess[above] ** gamma) * w)


def truncated_energy(u: GridFunction, kappa: float, q: float, p: float) -> float:
    """``|(u-kappa)_+|^2_{L_2q(0,T;L_2)} + |D(u-kappa)_+|^p_{L_p}``."""
    vol, tau = u.domain.cell_volume, u.time.tau
    w = np.maximum(u.values - kappa, 0.0)
    sq = np.sum(w[1:] ** 2, axis=tuple(range(1, w.ndim))) * vol
    if math.isinf(q):
        term1 = float(sq.max())
    else:
        term1 = float(np.sum(sq**q) * tau) ** (1.0 / q)
    g = forward_gradient(w[1:], u.domain.spacing)
    mag = np.sqrt(np.sum(g**2, axis=0))
    term2 = float(np.sum(mag**p) * vol * tau)
    return term1 + term2


def energy_rhs(u: GridFunction, kappa: float, gamma: float, s: float) -> float:
    """``int int_{A_kappa} u_+^gamma + (int_0^T |A_kappa| dt)^{1/s'}`` (no constant)."""
    w = _weights(u)
    v = u.slices
    above = v > kappa
    if not above.any():
        return 0.0
    mass = float(np.sum(np.maximum(v[above], 0.0) ** gamma) * w)
    meas = float(above.sum() * w)
    return mass + meas ** (1.0 / conjugate(s))


def energy_ratio(u: GridFunction, kappa: float, exps: ExponentSet) -> float:
    """``truncated_energy / energy_rhs``; ``nan`` for an empty level set."""
    pr = exps.params
    rhs = energy_rhs(u, kappa, pr.gamma, pr.s)
    if rhs == 0.0:
        return math.nan
    return truncated_energy(u, kappa, pr.q, pr.p) / rhs


def positive_mass(u: GridFunction, gamma: float) -> float:
    """``int int u_+^gamma`` over ``(0, T) x Omega``."""
    return float(np.sum(np.maximum(u.slices, 0.0) ** gamma) * _weights(u))


def apriori_bound(K: float, C: float, gamma: float, exps: ExponentSet, mass_gamma: float) -> float:
    """``2 (K + max{1, C * mass^{theta/(r-gamma)}})``."""
    if not gamma < exps.r:
        raise IterationError(f"gamma={gamma} must be below r={exps.r}")
    if mass_gamma < 0:
        raise IterationError("mass must be nonnegative")
    return 2.0 * (K + max(1.0, C * mass_gamma ** (exps.theta / (exps.r - gamma))))


# ---------------------------------------------------------------------------
# iteration trace
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevelSequence:
    kappa: float
    tilde_kappa: float
    n_max: int

    def __post_init__(self):
        if not self.kappa >= max(self.tilde_kappa, 1.0):
            raise IterationError("base level must be >= max(tilde_kappa, 1)")

    @property
    def levels(self) -> np.ndarray:
        n = np.arange(self.n_max + 1)
        return self.kappa * (2.0 - 2.0 ** (-n))


@dataclass
class IterationTrace:
    levels: LevelSequence
    y: np.ndarray
    measures: np.ndarray
    energies: np.ndarray
    max_u: float
    collapsed_at: Optional[int]
    strictly_decreasing: bool
    decay_slope: Optional[float]
    extras: dict = field(default_factory=dict)

    @property
    def bounded(self) -> bool:
        return self.max_u <= 2.0 * self.levels.kappa

    @property
    def verdict(self) -> str:
        if not self.bounded:
            return "fail: max u exceeds 2 kappa"
        if not self.strictly_decreasing:
            return "fail: Y_n not strictly decreasing"
        if self.collapsed_at is not None:
            return f"pass (collapsed at {self.collapsed_at})"
        return "pass"

    @property
    def passed(self) -> bool:
        return self.verdict.startswith("pass")

    def rows(self):
        """``(n, kappa_n, Y_n, measure_n, energy_n)`` for the computed prefix."""
        lv = self.levels.levels
        return [
            (n, float(lv[n]), float(self.y[n]), float(self.measures[n]), float(self.energies[n]))
            for n in range(len(self.y))
        ]


def choose_kappa(mass: float, tilde_kappa: float, exps: ExponentSet, c_hat: float) -> float:
    """``tilde_kappa + max{1, (C_hat * mass)^{alpha r / (gamma (r - gamma))}}``."""
    g, r = exps.params.gamma, exps.r
    if not g < r:
        raise IterationError(f"gamma={g} must be below r={r}")
    expo = exps.alpha_dg * r / (g * (r - g))
    return tilde_kappa + max(1.0, (c_hat * mass) ** expo)


def run_iteration(
    u: GridFunction,
    tilde_kappa: float,
    exps: ExponentSet,
    c_hat: float,
    n_max: int = 40,
) -> IterationTrace:
    """Build the level sequence from the data and read ``Y_n`` off the field.

    Stops at the first empty level set.  ``decay_slope`` is the least-squares
    slope of ``log Y_n`` against ``n`` over the nonzero prefix (reported only).
    """
    if not exps.gamma_admissible:
        raise IterationError("gamma is not admissible for these exponents")
    pr = exps.params
    mass = positive_mass(u, pr.gamma)
    kappa = choose_kappa(mass, tilde_kappa, exps, c_hat)
    seq = LevelSequence(kappa, tilde_kappa, n_max)
    ys, meas, ens = [], [], []
    collapsed = None
    for n, k_n in enumerate(seq.levels):
        m, y = level_measure(u, k_n, pr.gamma)
        ys.append(y)
        meas.append(m)
        ens.append(truncated_energy(u, k_n, pr.q, pr.p))
        if y == 0.0:
            collapsed = n
            break
    y = np.array(ys)
    strict = bool(np.all(np.diff(y) < 0))
    nz = y > 0
    slope = None
    if nz.sum() >= 2:
        slope = float(np.polyfit(np.nonzero(nz)[0], np.log(y[nz]), 1)[0])
    return IterationTrace(
        levels=seq,
        y=y,
        measures=np.array(meas),
        energies=np.array(ens),
        max_u=float(u.values.max()),
        collapsed_at=collapsed,
        strictly_decreasing=strict,
        decay_slope=slope,
        extras={"mass_gamma": mass, "c_hat": c_hat},
    )
