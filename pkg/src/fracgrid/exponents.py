"""Structural exponents for the boundedness estimates.

``q = math.inf`` is a first-class value (the classical parabolic limit); every
formula is written in terms of ``1/q`` so it can be substituted by 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

INF = math.inf
IDENTITY_RTOL = 1e-12


class ExponentError(ValueError):
    pass


def _inv(x: float) -> float:
    return 0.0 if math.isinf(x) else 1.0 / x


def conjugate(x: float) -> float:
    """Hölder conjugate ``x' = x/(x-1)``; ``inf' = 1``."""
    if math.isinf(x):
        return 1.0
    return x / (x - 1.0)


@dataclass(frozen=True)
class StructureParams:
    N: int
    p: float
    q: float
    gamma: float = 1.5
    s: float = INF

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ExponentError(f"N must be a positive integer, got {self.N}")
        for name in ("p", "q", "gamma", "s"):
            if not getattr(self, name) > 1:
                raise ExponentError(f"{name} must exceed 1, got {getattr(self, name)}")

    @property
    def q_conj(self) -> float:
        return conjugate(self.q)

    @property
    def s_conj(self) -> float:
        return conjugate(self.s)


@dataclass(frozen=True)
class ExponentSet:
    params: StructureParams
    r: float
    beta: float
    eta: float
    theta: float
    s_threshold: float
    alpha_dg: float
    delta_dg: float
    gamma_admissible: bool
    s_admissible: bool

    def as_dict(self) -> dict:
        return {
            "r": self.r,
            "beta": self.beta,
            "eta": self.eta,
            "theta": self.theta,
            "sThreshold": self.s_threshold,
            "alphaDG": self.alpha_dg,
            "deltaDG": self.delta_dg,
            "gammaAdmissible": self.gamma_admissible,
            "sAdmissible": self.s_admissible,
        }


def r_exponent(N: int, p: float, q: float) -> float:
    iq = _inv(q)
    return (1.0 - iq + 2.0 / N) / ((1.0 - iq) / p + iq / N)


def beta_exponent(N: int, q: float) -> float:
    iq = _inv(q)
    return (1.0 - iq) / (1.0 - iq + 2.0 / N)


def eta_exponent(N: int, p: float, q: float) -> float:
    iq = _inv(q)
    return (1.0 - iq + 2.0 / N) / ((1.0 - iq) / p + 1.0 / N)


def theta_exponent(N: int, p: float, q: float, s: float) -> float:
    iq, is_ = _inv(q), _inv(s)
    num = (1.0 - iq) / N - is_ * ((1.0 - iq) / p + 1.0 / N)
    return num / ((1.0 - iq) / p + iq / N)


def s_threshold(N: int, p: float, q: float) -> float:
    """``N/p + q'``, the lower bound on the source integrability."""
    return N / p + conjugate(q)


def derive_exponents(params: StructureParams, tol: float = 0.0) -> ExponentSet:
    """All exponents for ``params``; admissibility uses strict inequalities.

    ``tol`` widens the strict comparisons (``x > y + tol``).
    """
    N, p, q, gamma, s = params.N, params.p, params.q, params.gamma, params.s
    r = r_exponent(N, p, q)
    beta = beta_exponent(N, q)
    eta = eta_exponent(N, p, q)
    s_conj = params.s_conj
    alpha_dg = gamma * (1.0 / (eta * s_conj) - 1.0 / r)
    delta_dg = gamma * (1.0 / eta - 1.0 / r)
    thr = s_threshold(N, p, q)
    return ExponentSet(
        params=params,
        r=r,
        beta=beta,
        eta=eta,
        theta=theta_exponent(N, p, q, s),
        s_threshold=thr,
        alpha_dg=alpha_dg,
        delta_dg=delta_dg,
        gamma_admissible=1.0 + tol < gamma < r - tol,
        s_admissible=s > thr + tol,
    )


def threshold_predicates(params: StructureParams) -> tuple[bool, bool, bool]:
    """The three equivalent forms of the source condition.

    ``s > N/p + q'``, ``1/(eta s') > 1/r`` and ``alpha_DG > 0``.
    """
    e = derive_exponents(params)
    return (
        params.s > e.s_threshold,
        1.0 / (e.eta * params.s_conj) > 1.0 / e.r,
        e.alpha_dg > 0,
    )


@dataclass(frozen=True)
class BranchCheck:
    applicable: bool
    value: Optional[float]
    target: float
    passed: Optional[bool]

    @property
    def verdict(self) -> str:
        if not self.applicable:
            return "not applicable"
        return "pass" if self.passed else "fail"


@dataclass(frozen=True)
class EmbeddingCheck:
    gn_branch: BranchCheck
    sobolev_branch: BranchCheck
    r_ge_2: bool
    p_ge_critical: bool

    @property
    def critical_growth_holds(self) -> bool:
        return self.r_ge_2 == self.p_ge_critical

    @property
    def passed(self) -> bool:
        ok = [b.passed for b in (self.gn_branch, self.sobolev_branch) if b.applicable]
        return all(ok) and self.critical_growth_holds


def _rel_close(a: float, b: float, rtol: float) -> bool:
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= rtol * max(abs(a), abs(b))


def check_embedding_identities(
    params: StructureParams, rtol: float = IDENTITY_RTOL
) -> EmbeddingCheck:
    """Verify the two exponent identities behind the parabolic embedding.

    Above the critical growth ``p > 2N/(N+2)`` the Hölder exponent
    ``(1-beta) r p / (p - beta r)`` must equal ``2q``; at or below it (with
    ``p < N``) the Sobolev branch needs ``r(1-beta) Np/(Np - (N-p) r beta) = 2``.
    Also records whether ``r >= 2`` agrees with ``p >= 2N/(N+2)``; at the
    critical value ``r = 2`` up to ``rtol``.
    """
    N, p, q = params.N, params.p, params.q
    r = r_exponent(N, p, q)
    beta = beta_exponent(N, q)
    crit = 2.0 * N / (N + 2.0)

    if p > crit:
        den = p - beta * r
        # for q = inf the denominator vanishes exactly; do not divide by its rounding
        r_hat = INF if abs(den) <= rtol * p else (1.0 - beta) * r * p / den
        gn = BranchCheck(True, r_hat, 2.0 * q, _rel_close(r_hat, 2.0 * q, rtol))
    else:
        gn = BranchCheck(False, None, 2.0 * q if not math.isinf(q) else INF, None)

    if p <= crit and p < N:
        val = r * (1.0 - beta) * N * p / (N * p - (N - p) * r * beta)
        sob = BranchCheck(True, val, 2.0, _rel_close(val, 2.0, rtol))
    else:
        sob = BranchCheck(False, None, 2.0, None)

    r_ge_2 = r >= 2.0 or _rel_close(r, 2.0, rtol)
    p_ge = p >= crit or _rel_close(p, crit, rtol)
    return EmbeddingCheck(gn, sob, r_ge_2, p_ge)


@dataclass(frozen=True)
class FractionalAdmissibility:
    threshold: float
    q_valid: bool
    q_condition: bool
    s_condition: bool
    bound_s_condition: bool

    @property
    def admissible(self) -> bool:
        return self.q_valid and self.q_condition and self.s_condition


def check_fractional_admissibility(
    N: int, p: float, alpha: float, q: float, s: float, tol: float = 0.0
) -> FractionalAdmissibility:
    """Joint condition ``s > N/p + q' > N/p + 1/alpha`` for ``k = g_{1-alpha}``.

    ``q_valid`` records ``1 < q < 1/(1-alpha)``, the range in which
    ``l = g_alpha`` lies in ``L_q``.
    """
    if not 0.0 < alpha < 1.0:
        raise ExponentError(f"alpha must lie in (0, 1), got {alpha}")
    thr = N / p + 1.0 / alpha
    mid = N / p + conjugate(q)
    return FractionalAdmissibility(
        threshold=thr,
        q_valid=1.0 < q < 1.0 / (1.0 - alpha),
        q_condition=mid > thr + tol,
        s_condition=s > mid + tol,
        bound_s_condition=s > thr + tol,
    )


@dataclass(frozen=True)
class SharpnessCase:
    N: int
    p: float
    alpha: float
    s: float
    r_hat: Optional[float] = None
    omega1: Optional[float] = None
    omega2: Optional[float] = None
    status: str = "unevaluated"

    @property
    def threshold(self) -> float:
        return self.N / self.p + 1.0 / self.alpha

    @property
    def verdict(self) -> Optional[bool]:
        if self.omega1 is None:
            return None
        return self.omega1 < self.omega2


def sharpness_window(N: int, p: float, alpha: float) -> Optional[tuple[float, float]]:
    """Open ``s``-interval on which the optimal-regularity argument applies.

    ``p = 2``: ``(1/alpha, inf)``; ``p > 2`` with ``alpha in (p'/N, 1)``:
    ``(max(1/alpha, N/p), N)``.  ``None`` when the case is outside that scope.
    """
    if not 0.0 < alpha < 1.0:
        return None
    if p == 2.0:
        return (1.0 / alpha, INF)
    if p > 2.0 and conjugate(p) / N < alpha:
        lo, hi = max(1.0 / alpha, N / p), float(N)
        return (lo, hi) if lo < hi else None
    return None


def sharpness_exponents(case: SharpnessCase) -> SharpnessCase:
    """Fill ``r_hat``, ``omega1``, ``omega2`` for the optimal-regularity class.

    ``(p-1)/r_hat = 1/s + (p-2)/N``,
    ``omega1 = (N/s) / (2 - N/r_hat + N/s)``,
    ``omega2 = (alpha - 1/s) / (alpha - 1/s + 1/(s(p-1)))``.
    ``status`` is ``"ok"``, ``"window empty"`` (parameters admit no ``s``),
    ``"outside window"`` (this ``s`` is not in the open window) or
    ``"out of scope (p < 2)"`` (``1 < p < 2``).
    """
    N, p, alpha, s = case.N, case.p, case.alpha, case.s
    if 1.0 < p < 2.0:
        return _replace(case, status="out of scope (p < 2)")
    win = sharpness_window(N, p, alpha)
    if win is None:
        return _replace(case, status="window empty")
    if not win[0] < s < win[1]:
        return _replace(case, status="outside window")
    r_hat = (p - 1.0) / (1.0 / s + (p - 2.0) / N)
    omega1 = (N / s) / (2.0 - N / r_hat + N / s)
    a = alpha - 1.0 / s
    omega2 = a / (a + 1.0 / (s * (p - 1.0)))
    return _replace(case, r_hat=r_hat, omega1=omega1, omega2=omega2, status="ok")


def _replace(case: SharpnessCase, **kw) -> SharpnessCase:
    from dataclasses import replace

    return replace(case, **kw)


def sharpness_flip(
    N: int, p: float, alpha: float, xtol: float = 1e-12, max_iter: int = 200
) -> float:
    """Locate the sign change of ``omega2 - omega1`` in ``s`` by bisection."""
    win = sharpness_window(N, p, alpha)
    if win is None:
        raise ExponentError(f"empty sharpness window for N={N}, p={p}, alpha={alpha}")
    lo, hi = win
    if math.isinf(hi):
        hi = 4.0 * (N / p + 1.0 / alpha) + 1.0
    span = hi - lo
    lo, hi = lo + 1e-9 * span, hi - 1e-9 * span

    def pred(s):
        return sharpness_exponents(SharpnessCase(N, p, alpha, s)).verdict

    if pred(lo) or not pred(hi):
        raise ExponentError("omega1 < omega2 does not change sign across the window")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if pred(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= xtol:
            break
    return 0.5 * (lo + hi)
