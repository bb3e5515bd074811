"""Chart performance measures: closed forms, Markov engine, inversion.

Shewhart measures follow from the geometric run-length law.  CUSUM
measures are computed from the update distribution by an absorbing
Markov chain on ``[0, c)``: one state holds the reflecting barrier at 0
exactly and the remaining ``N - 1`` cells use their midpoints, which
keeps the heavy in-control mass at the barrier where it belongs.

Threshold inversion factors the scale of the update law out first and
bisects on the scale-free problem; the scale multiplies back at the
end.  Besides being faster to reason about, this makes calibration
exactly equivariant: scaled and unscaled variants of the same chart
produce thresholds whose ratio is the scale, to rounding error.

Everything here is pure; the Monte Carlo fallback takes an explicit
generator.  The private ``_*Batch`` classes evaluate many update laws
of one family at once (one bootstrap's worth), performing per-problem
arithmetic identical to the scalar path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dgecon
from scipy.special import ndtr

from . import charts as _charts
from .charts import (
    CustomUpdate,
    DiscreteAtoms,
    ExpAffineUpdate,
    NormalUpdate,
    ShewhartStandardized,
    UpdateLaw,
    update_distribution,
)
from .errors import (
    BracketFailure,
    InputError,
    NonAbsorbing,
    TargetUnattainable,
    TransformDomain,
    TruncatedRuns,
    ZeroExceedance,
)
from .models import (
    EmpiricalModel,
    model_cdf_left,
    model_survival,
)

__all__ = [
    "PerfMeasure",
    "MarkovConfig",
    "McConfig",
    "shewhart_exceedance",
    "shewhart_measures",
    "markov_transition",
    "arl_markov",
    "hit_markov",
    "invert_threshold",
    "eval_measure",
]

_BRACKET_CAP = 2.0**16
_BRACKET_FLOOR = 2.0**-16
_WIDTH_TOL = 1e-6


@dataclass(frozen=True)
class MarkovConfig:
    """Grid control for the Markov-chain engine."""

    grid_points: int = 75
    richardson: bool = False

    def __post_init__(self):
        if self.grid_points < 2:
            raise InputError("grid_points must be >= 2")


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo evaluation settings (used only when requested)."""

    runs: int = 10_000
    horizon_cap: int | None = None

    def __post_init__(self):
        if self.runs < 100:
            raise InputError("Monte Carlo needs at least 100 runs")


@dataclass(frozen=True)
class PerfMeasure:
    """Which in-control property is computed, with an optional transform.

    ``arl``/``hit`` are evaluated at a fixed threshold ``c``; ``c_arl``
    and ``c_hit`` return the threshold attaining a target average run
    length ``gamma`` or false-alarm probability ``beta`` within ``T``
    steps.  ``log`` applies to everything except ``hit``; ``logit``
    only to ``hit``.
    """

    kind: str
    c: float | None = None
    T: int | None = None
    gamma: float | None = None
    beta: float | None = None
    transform: str = "identity"

    def __post_init__(self):
        if self.kind not in ("arl", "hit", "c_arl", "c_hit"):
            raise InputError(f"unknown measure kind {self.kind!r}")
        if self.transform not in ("identity", "log", "logit"):
            raise InputError(f"unknown transform {self.transform!r}")
        if self.kind in ("arl", "hit") and not (self.c is not None and self.c > 0):
            raise InputError("arl/hit need a threshold c > 0")
        if self.kind in ("hit", "c_hit"):
            if not (self.T is not None and self.T >= 1 and self.T == int(self.T)):
                raise InputError("hit measures need an integer horizon T >= 1")
        if self.kind == "c_arl" and not (self.gamma is not None and self.gamma > 1):
            raise InputError("c_arl needs gamma > 1")
        if self.kind == "c_hit" and not (self.beta is not None and 0 < self.beta < 1):
            raise InputError("c_hit needs beta in (0, 1)")
        if self.transform == "logit" and self.kind != "hit":
            raise InputError("logit transform applies only to hit")
        if self.transform == "log" and self.kind == "hit":
            raise InputError("log transform does not apply to hit")

    @classmethod
    def arl(cls, c: float, transform: str = "identity") -> "PerfMeasure":
        return cls(kind="arl", c=c, transform=transform)

    @classmethod
    def hit(cls, c: float, T: int, transform: str = "identity") -> "PerfMeasure":
        return cls(kind="hit", c=c, T=int(T), transform=transform)

    @classmethod
    def c_arl(cls, gamma: float, transform: str = "identity") -> "PerfMeasure":
        return cls(kind="c_arl", gamma=gamma, transform=transform)

    @classmethod
    def c_hit(cls, T: int, beta: float, transform: str = "identity") -> "PerfMeasure":
        return cls(kind="c_hit", T=int(T), beta=beta, transform=transform)

    @property
    def direction(self) -> str:
        """Which one-sided bound guarantees the measure."""
        return "lower-bound-on-q" if self.kind == "arl" else "upper-bound-on-q"

    def apply_transform(self, value: float) -> float:
        if self.transform == "identity":
            return float(value)
        if self.transform == "log":
            if not value > 0:
                raise TransformDomain(f"log transform needs a positive value, got {value}")
            return float(np.log(value))
        if not 0 < value < 1:
            raise TransformDomain(f"logit transform needs a value in (0,1), got {value}")
        return float(np.log(value) - np.log1p(-value))

    def invert_transform(self, value: float) -> float:
        if self.transform == "identity":
            return float(value)
        if self.transform == "log":
            return float(np.exp(value))
        return float(1.0 / (1.0 + np.exp(-value)))


# ---------------------------------------------------------------------------
# Shewhart closed forms
# ---------------------------------------------------------------------------


def shewhart_exceedance(model, params, c: float, two_sided: bool = False) -> float:
    """Per-observation exceedance probability ``P(f(X, xi) > c)``."""
    p = float(model_survival(model, params.mu + c * params.sigma))
    if two_sided:
        p += float(model_cdf_left(model, params.mu - c * params.sigma))
    return p


def _shewhart_arl(p: float) -> float:
    if p <= 0.0:
        raise ZeroExceedance("exceedance probability is 0; run length has no mean")
    return 1.0 / p


def _shewhart_hit(p: float, T: int) -> float:
    if p >= 1.0:
        return 1.0
    return float(-np.expm1(T * np.log1p(-p)))


def _shewhart_invert(model, params, target: float, two_sided: bool) -> float:
    """Smallest positive threshold with exceedance probability <= target."""

    def p_of(c: float) -> float:
        return shewhart_exceedance(model, params, c, two_sided)

    if isinstance(model, EmpiricalModel):
        z = (model.values - params.mu) / params.sigma
        cand = np.unique(np.abs(z) if two_sided else z)
        cand = cand[cand > 0]
        ok = [c for c in cand if p_of(float(c)) <= target]
        if not ok:
            hi = float(cand.max()) if cand.size else 1.0
            if p_of(hi) <= target:
                return hi
            raise TargetUnattainable(
                "empirical exceedance never reaches the target at a positive threshold"
            )
        c_star = min(ok)
        # the target may already hold for arbitrarily small thresholds
        below = cand[cand < c_star]
        probe = float(below.max()) if below.size else c_star / 2.0
        if p_of(probe) <= target:
            raise TargetUnattainable(
                "target attained by arbitrarily small thresholds (discrete exceedance)"
            )
        return float(c_star)

    lo = hi = 1.0
    while p_of(hi) > target:
        hi *= 2.0
        if hi > 2.0**40:
            raise TargetUnattainable("no finite threshold attains the target")
    while p_of(lo) <= target:
        lo /= 2.0
        if lo < 2.0**-40:
            raise TargetUnattainable("target attained by arbitrarily small thresholds")
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if p_of(mid) <= target:
            hi = mid
        else:
            lo = mid
    return hi


def shewhart_measures(
    p: float | None,
    measure: PerfMeasure,
    model=None,
    params=None,
    two_sided: bool = False,
) -> float:
    """Evaluate a Shewhart measure from the exceedance probability.

    ``arl`` and ``hit`` need only ``p``; the threshold inversions need
    the model and parameters to invert ``p(c)`` by bisection (monotone
    nonincreasing in ``c``).  Transforms are applied by the caller.
    """
    if measure.kind == "arl":
        return _shewhart_arl(p)
    if measure.kind == "hit":
        return _shewhart_hit(p, measure.T)
    if model is None or params is None:
        raise InputError("threshold inversion needs model and params")
    if measure.kind == "c_arl":
        target = 1.0 / measure.gamma
    else:
        target = float(-np.expm1(np.log1p(-measure.beta) / measure.T))
    return float(_shewhart_invert(model, params, target, two_sided))


# ---------------------------------------------------------------------------
# Batched update-law families
# ---------------------------------------------------------------------------
#
# A batch holds K update laws of one family.  tables(c, N) returns the
# CDF evaluations the grid needs:
#   A[k, t]   = F_k((t - N + 0.5) * w_k), t = 0..2N   (midpoint offsets)
#   B[k, j]   = F_k(j * w_k),             j = 0..N    (zero-row edges)
#   AtopL[k, i] = F_k^-((N - i - 0.5) * w_k), i = 1..N-1 (top column)
#   BtopL[k]  = F_k^-(N * w_k)
# with w = c / N.  Left limits differ from values only for atoms.


class _NormalBatch:
    def __init__(self, mu, sigma, loc, den):
        self.mu = np.asarray(mu, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        self.loc = np.asarray(loc, dtype=float)
        self.den = np.asarray(den, dtype=float)

    @property
    def size(self) -> int:
        return self.mu.size

    def take(self, idx):
        return _NormalBatch(self.mu[idx], self.sigma[idx], self.loc[idx], self.den[idx])

    def canonical(self):
        a = (self.mu - self.loc) / self.sigma
        ones = np.ones_like(a)
        return _NormalBatch(a, ones, np.zeros_like(a), ones), self.sigma / self.den

    def tables(self, c, N):
        w = c / N
        mean = (self.mu - self.loc) / self.den
        sd = self.sigma / self.den
        tmid = np.arange(2 * N + 1) - N + 0.5
        A = ndtr((tmid[None, :] * w[:, None] - mean[:, None]) / sd[:, None])
        jj = np.arange(N + 1, dtype=float)
        B = ndtr((jj[None, :] * w[:, None] - mean[:, None]) / sd[:, None])
        i = np.arange(1, N)
        return A, B, A[:, 2 * N - 1 - i], B[:, N]


class _ExpAffineBatch:
    def __init__(self, slope, intercept, rate):
        self.slope = np.asarray(slope, dtype=float)
        self.intercept = np.asarray(intercept, dtype=float)
        self.rate = np.asarray(rate, dtype=float)

    @property
    def size(self) -> int:
        return self.slope.size

    def take(self, idx):
        return _ExpAffineBatch(self.slope[idx], self.intercept[idx], self.rate[idx])

    def canonical(self):
        s = np.abs(self.slope) / self.rate
        return _ExpAffineBatch(self.slope / s, self.intercept / s, self.rate), s

    def _cdf(self, x):
        z = (x - self.intercept[:, None]) / self.slope[:, None]
        pos = self.slope[:, None] > 0
        up = -np.expm1(-self.rate[:, None] * np.maximum(z, 0.0))
        down = np.where(z <= 0, 1.0, np.exp(-self.rate[:, None] * np.maximum(z, 0.0)))
        return np.where(pos, up, down)

    def tables(self, c, N):
        w = c / N
        tmid = np.arange(2 * N + 1) - N + 0.5
        A = self._cdf(tmid[None, :] * w[:, None])
        jj = np.arange(N + 1, dtype=float)
        B = self._cdf(jj[None, :] * w[:, None])
        i = np.arange(1, N)
        return A, B, A[:, 2 * N - 1 - i], B[:, N]


class _DiscreteBatch:
    """K discrete laws queried as ``P(v_k <= y * mul_k + add_k)``."""

    def __init__(self, sources, cums, mul, add, basis_sds=None):
        self.sources = sources
        self.cums = cums
        self.mul = np.asarray(mul, dtype=float)
        self.add = np.asarray(add, dtype=float)
        self.shared = all(s is sources[0] for s in sources)
        if basis_sds is None:
            basis_sds = np.array([self._basis_scale(k) for k in range(len(sources))])
        self.basis_sds = basis_sds

    def _basis_scale(self, k) -> float:
        v = self.sources[k]
        cw = self.cums[k]
        w = np.diff(np.concatenate(([0.0], cw)))
        m = float(v @ w)
        sd = float(np.sqrt(((v - m) ** 2) @ w))
        if sd > 0:
            return sd
        atoms = (v - self.add[k]) / self.mul[k]
        amax = float(np.max(np.abs(atoms)))
        return amax if amax > 0 else 1.0

    @property
    def size(self) -> int:
        return self.mul.size

    def take(self, idx):
        idx = np.atleast_1d(idx)
        return _DiscreteBatch(
            [self.sources[i] for i in idx],
            [self.cums[i] for i in idx],
            self.mul[idx],
            self.add[idx],
            self.basis_sds[idx],
        )

    def canonical(self):
        batch = _DiscreteBatch(
            self.sources, self.cums, self.basis_sds, self.add, self.basis_sds
        )
        return batch, self.basis_sds / self.mul

    def _lookup(self, queries, side):
        K, m = queries.shape
        out = np.empty((K, m))
        if self.shared:
            v = self.sources[0]
            cw0 = np.concatenate(([0.0], self.cums[0]))
            idx = np.searchsorted(v, queries.ravel(), side=side)
            return cw0[idx].reshape(K, m)
        for k in range(K):
            cw0 = np.concatenate(([0.0], self.cums[k]))
            out[k] = cw0[np.searchsorted(self.sources[k], queries[k], side=side)]
        return out

    def tables(self, c, N):
        w = c / N
        tmid = np.arange(2 * N + 1) - N + 0.5
        qA = tmid[None, :] * w[:, None] * self.mul[:, None] + self.add[:, None]
        jj = np.arange(N + 1, dtype=float)
        qB = jj[None, :] * w[:, None] * self.mul[:, None] + self.add[:, None]
        i = np.arange(1, N)
        ttop = np.concatenate((N - i - 0.5, [float(N)]))
        qT = ttop[None, :] * w[:, None] * self.mul[:, None] + self.add[:, None]
        A = self._lookup(qA, "right")
        B = self._lookup(qB, "right")
        top = self._lookup(qT, "left")
        return A, B, top[:, :-1], top[:, -1]


class _CustomBatch:
    def __init__(self, laws):
        self.laws = list(laws)

    @property
    def size(self) -> int:
        return len(self.laws)

    def take(self, idx):
        return _CustomBatch([self.laws[i] for i in np.atleast_1d(idx)])

    def canonical(self):
        pairs = [law.canonical() for law in self.laws]
        return _CustomBatch([p[0] for p in pairs]), np.array([p[1] for p in pairs])

    def tables(self, c, N):
        w = c / N
        tmid = np.arange(2 * N + 1) - N + 0.5
        jj = np.arange(N + 1, dtype=float)
        i = np.arange(1, N)
        ttop = np.concatenate((N - i - 0.5, [float(N)]))
        K = len(self.laws)
        A = np.empty((K, 2 * N + 1))
        B = np.empty((K, N + 1))
        top = np.empty((K, N))
        for k, law in enumerate(self.laws):
            A[k] = law.cdf(tmid * w[k])
            B[k] = law.cdf(jj * w[k])
            top[k] = law.cdf_left(ttop * w[k])
        return A, B, top[:, :-1], top[:, -1]


def _batch_from_updates(updates) -> object:
    first = updates[0]
    if isinstance(first, NormalUpdate):
        if not all(isinstance(u, NormalUpdate) for u in updates):
            raise InputError("mixed update families in one batch")
        return _NormalBatch(
            [u.mu for u in updates],
            [u.sigma for u in updates],
            [u.loc for u in updates],
            [u.den for u in updates],
        )
    if isinstance(first, ExpAffineUpdate):
        return _ExpAffineBatch(
            [u.slope for u in updates],
            [u.intercept for u in updates],
            [u.rate for u in updates],
        )
    if isinstance(first, DiscreteAtoms):
        sources, cums, mul, add = [], [], [], []
        for u in updates:
            if u.source_values is not None:
                sources.append(u.source_values)
                mul.append(u.den)
                add.append(u.loc)
                cums.append(u.cumweights)
            else:
                sources.append(u.atoms)
                mul.append(1.0)
                add.append(0.0)
                cums.append(u.cumweights)
        return _DiscreteBatch(sources, cums, mul, add)
    if isinstance(first, CustomUpdate):
        return _CustomBatch(updates)
    raise InputError(f"cannot batch update law {type(first).__name__}")


# ---------------------------------------------------------------------------
# Grid assembly and the Markov engine
# ---------------------------------------------------------------------------


_IDX_CACHE: dict = {}


def _grid_indices(N: int):
    cached = _IDX_CACHE.get(N)
    if cached is None:
        i = np.arange(1, N)
        cached = (i, N - i, 2 * N - 2 - i, np.arange(N))
        _IDX_CACHE[N] = cached
    return cached


def _assemble(A, B, AtopL, BtopL, N, negate: bool):
    """(K, N, N) transition matrix Q, or I - Q when ``negate``."""
    K = A.shape[0]
    sgn = -1.0 if negate else 1.0
    _, col0_idx, coltop_idx, diag = _grid_indices(N)
    out = np.empty((K, N, N))
    DA = sgn * (A[:, 1:] - A[:, :-1])
    # row i >= 1 is the contiguous slice DA[N-1-i : 2N-1-i]
    windows = np.lib.stride_tricks.sliding_window_view(DA, N, axis=1)
    out[:, 1:, :] = windows[:, N - 2 :: -1, :]
    out[:, 1:, 0] = sgn * A[:, col0_idx]
    out[:, 1:, N - 1] = sgn * (AtopL - A[:, coltop_idx])
    out[:, 0, :] = sgn * (B[:, 1:] - B[:, :-1])
    out[:, 0, 0] = sgn * B[:, 1]
    out[:, 0, N - 1] = sgn * (BtopL - B[:, N - 1])
    if negate:
        out[:, diag, diag] += 1.0
    return out


def _batch_q(batch, c, N):
    return _assemble(*batch.tables(np.asarray(c, dtype=float), N), N, negate=False)


def _batch_arl(batch, c, N):
    """ARL from the zero state for each problem; +inf where non-absorbing."""
    c = np.asarray(c, dtype=float)
    M = _assemble(*batch.tables(c, N), N, negate=True)
    K = M.shape[0]
    rhs = np.ones((K, N, 1))
    try:
        a0 = np.linalg.solve(M, rhs)[:, 0, 0]
    except np.linalg.LinAlgError:
        a0 = np.empty(K)
        for k in range(K):
            try:
                a0[k] = np.linalg.solve(M[k], rhs[k])[0, 0]
            except np.linalg.LinAlgError:
                a0[k] = np.inf
    bad = ~np.isfinite(a0) | (a0 < 1.0 - 1e-6) | (a0 > 1e13)
    vals = np.where(bad, np.inf, np.maximum(a0, 1.0))
    return vals


def _batch_hit(batch, c, N, T):
    """Alarm probability within T steps for each problem."""
    Q = _batch_q(batch, c, N)
    s = Q.sum(axis=2)
    for _ in range(int(T) - 1):
        s_new = (Q @ s[:, :, None])[:, :, 0]
        if np.array_equal(s_new, s):
            break
        s = s_new
    return np.clip(1.0 - s[:, 0], 0.0, 1.0)


def _batch_hit_le(batch, c, N, T, beta):
    """Exact predicate ``hit(c) <= beta`` with monotone early exit.

    The alarm probability within ``t`` steps only grows with ``t``, so
    a problem whose partial hit already exceeds beta is decided; rows
    are physically dropped only when at least half are decided, which
    keeps the per-step matvec bandwidth-bound rather than copy-bound.
    """
    Q = _batch_q(batch, c, N)
    K = Q.shape[0]
    res = np.ones(K, dtype=bool)
    idx = np.arange(K)
    s = Q.sum(axis=2)
    t = 1
    while True:
        res[idx[(1.0 - s[:, 0]) > beta]] = False
        alive = res[idx]
        if t >= T or not alive.any():
            break
        if 2 * int(alive.sum()) <= idx.size:
            Q = Q[alive]
            s = s[alive]
            idx = idx[alive]
        s = (Q @ s[:, :, None])[:, :, 0]
        t += 1
    return res


def _batch_invert(batch, measure: PerfMeasure, cfg: MarkovConfig):
    """Vectorised threshold inversion; returns (thresholds, ok mask).

    Bisection runs on the scale-free canonical problems and the scale
    multiplies back into the returned thresholds.  ``ok`` is False where
    no bracket exists within the caps.
    """
    N = cfg.grid_points
    canon, factor = batch.canonical()
    K = batch.size

    if measure.kind == "c_arl":
        gamma = measure.gamma

        def pred(sub, cc):
            return _batch_arl(sub, cc, N) >= gamma

    else:
        T, beta = measure.T, measure.beta

        def pred(sub, cc):
            return _batch_hit_le(sub, cc, N, T, beta)

    lo = np.full(K, np.nan)
    hi = np.full(K, np.nan)
    ok = np.ones(K, dtype=bool)

    c_now = np.ones(K)
    p_now = pred(canon, c_now)
    hi[p_now] = 1.0
    lo[~p_now] = 1.0

    # grow upward where the target side was not reached at c = 1
    need = np.nonzero(~p_now)[0]
    c_cur = np.ones(K)
    while need.size:
        c_try = c_cur[need] * 2.0
        over = c_try > _BRACKET_CAP
        if over.any():
            ok[need[over]] = False
            keep = ~over
            need = need[keep]
            c_try = c_try[keep]
            if need.size == 0:
                break
        p = pred(canon.take(need), c_try)
        c_cur[need] = c_try
        hi[need[p]] = c_try[p]
        lo[need[~p]] = c_try[~p]
        need = need[~p]

    # shrink downward where the target already held at c = 1
    need = np.nonzero(p_now)[0]
    c_cur = np.ones(K)
    while need.size:
        c_try = c_cur[need] * 0.5
        under = c_try < _BRACKET_FLOOR
        if under.any():
            ok[need[under]] = False
            keep = ~under
            need = need[keep]
            c_try = c_try[keep]
            if need.size == 0:
                break
        p = pred(canon.take(need), c_try)
        c_cur[need] = c_try
        lo[need[~p]] = c_try[~p]
        hi[need[p]] = c_try[p]
        need = need[p]

    active = np.nonzero(ok & ((hi - lo) > _WIDTH_TOL * np.maximum(1.0, hi)))[0]
    while active.size:
        mid = 0.5 * (lo[active] + hi[active])
        p = pred(canon.take(active), mid)
        hi[active[p]] = mid[p]
        lo[active[~p]] = mid[~p]
        keep = (hi[active] - lo[active]) > _WIDTH_TOL * np.maximum(1.0, hi[active])
        active = active[keep]

    out = np.where(ok, hi * factor, np.nan)
    return out, ok


# ---------------------------------------------------------------------------
# Public scalar API
# ---------------------------------------------------------------------------


def markov_transition(update: UpdateLaw, c: float, cfg: MarkovConfig) -> np.ndarray:
    """Substochastic transition matrix over the transient states.

    The state space splits ``[0, c)`` into ``grid_points`` cells of
    width ``c / grid_points``; the first state represents the chart
    value 0 exactly (and absorbs the reflected mass), the others their
    cell midpoints.  Mass at or above ``c`` is absorbed; mass landing
    exactly on an interior cell edge counts toward the lower cell.
    """
    if not c > 0:
        raise InputError("threshold must be positive")
    batch = _batch_from_updates([update])
    return _batch_q(batch, np.array([c]), cfg.grid_points)[0]


def _arl_single(update, c, N) -> float:
    import warnings

    Q = markov_transition(update, c, MarkovConfig(grid_points=N))
    M = np.eye(N) - Q
    anorm = np.linalg.norm(M, 1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # rcond check below handles singularity
        lu, piv = lu_factor(M)
    rcond = dgecon(lu, anorm)[0]
    if not np.isfinite(rcond) or rcond < 1e-12:
        raise NonAbsorbing(
            f"absorption is not certain (condition estimate {1.0 / max(rcond, 1e-300):.2e})"
        )
    a = lu_solve((lu, piv), np.ones(N))
    return float(max(a[0], 1.0))


def arl_markov(update: UpdateLaw, c: float, cfg: MarkovConfig) -> float:
    """In-control ARL from the zero state via the absorbing chain."""
    N = cfg.grid_points
    if cfg.richardson:
        v1 = _arl_single(update, c, N)
        v2 = _arl_single(update, c, 2 * N)
        return (4.0 * v2 - v1) / 3.0
    return _arl_single(update, c, N)


def _hit_single(update, c, T, N) -> float:
    batch = _batch_from_updates([update])
    return float(_batch_hit(batch, np.array([c]), N, T)[0])


def hit_markov(update: UpdateLaw, c: float, T: int, cfg: MarkovConfig) -> float:
    """False-alarm probability within ``T`` steps via the chain."""
    if T < 1:
        raise InputError("T must be >= 1")
    N = cfg.grid_points
    if cfg.richardson:
        v1 = _hit_single(update, c, T, N)
        v2 = _hit_single(update, c, T, 2 * N)
        return float(np.clip((4.0 * v2 - v1) / 3.0, 0.0, 1.0))
    return _hit_single(update, c, T, N)


def invert_threshold(update: UpdateLaw, measure: PerfMeasure, cfg: MarkovConfig) -> float:
    """Threshold attaining the target measure, by canonical bisection.

    The bracket doubles up from 1 (or halves down when the target is
    already met there) and bisection stops when the bracket is narrower
    than ``1e-6 * max(1, c)``; the upper end is returned, so the target
    is guaranteed at the result.
    """
    if measure.kind not in ("c_arl", "c_hit"):
        raise InputError("invert_threshold expects a c_arl or c_hit measure")
    batch = _batch_from_updates([update])
    c, ok = _batch_invert(batch, measure, cfg)
    if not ok[0]:
        raise BracketFailure(
            "could not bracket the target threshold within 2**±16"
        )
    return float(c[0])


# ---------------------------------------------------------------------------
# Monte Carlo fallback
# ---------------------------------------------------------------------------


def _mc_run_lengths(chart, model, params, c, runs, cap, rng):
    """Vectorised run lengths, capped at ``cap``; returns (lengths, truncated)."""
    from .models import JointModel, sample_from

    lengths = np.full(runs, cap, dtype=np.int64)
    S = np.zeros(runs)
    alive = np.arange(runs)
    joint = isinstance(model, JointModel)
    for t in range(1, cap + 1):
        m = alive.size
        if m == 0:
            break
        drawn = sample_from(model, m, rng)
        if joint:
            obs = np.column_stack((drawn.y, drawn.x))
        else:
            obs = drawn.values
        inc = _charts._increments(chart, params, obs)
        S[alive] = np.maximum(0.0, S[alive] + inc)
        hit = S[alive] >= c
        lengths[alive[hit]] = t
        alive = alive[~hit]
    return lengths, alive.size


def _mc_measure(chart, model, params, measure, mc: McConfig, rng) -> float:
    if rng is None:
        raise InputError("Monte Carlo evaluation needs an explicit rng")
    if measure.kind == "arl":
        cap = mc.horizon_cap or 100_000
        lengths, trunc = _mc_run_lengths(chart, model, params, measure.c, mc.runs, cap, rng)
        if trunc > 0.001 * mc.runs:
            raise TruncatedRuns(
                f"{trunc}/{mc.runs} runs truncated at horizon {cap}"
            )
        return float(lengths.mean())
    if measure.kind == "hit":
        lengths, _ = _mc_run_lengths(chart, model, params, measure.c, mc.runs, measure.T, rng)
        return float(np.mean(lengths <= measure.T))
    if measure.kind == "c_hit":
        maxima = _mc_maxima(chart, model, params, measure.T, mc.runs, rng)
        k = math.ceil((1.0 - measure.beta) * mc.runs)
        return float(np.sort(maxima)[k - 1])
    # c_arl: bisection on the Monte Carlo ARL with common random numbers
    seed = int(rng.integers(0, 2**63 - 1))
    cap = mc.horizon_cap or int(100 * measure.gamma)

    def mc_arl(c: float) -> float:
        from .seeding import substream

        lengths, trunc = _mc_run_lengths(
            chart, model, params, c, mc.runs, cap, substream(seed, 0)
        )
        if trunc > 0.001 * mc.runs:
            raise TruncatedRuns(f"{trunc}/{mc.runs} runs truncated at horizon {cap}")
        return float(lengths.mean())

    lo = hi = 1.0
    while mc_arl(hi) < measure.gamma:
        hi *= 2.0
        if hi > _BRACKET_CAP:
            raise BracketFailure("Monte Carlo ARL never reaches gamma")
    while mc_arl(lo) >= measure.gamma:
        lo *= 0.5
        if lo < _BRACKET_FLOOR:
            raise BracketFailure("Monte Carlo ARL exceeds gamma at tiny thresholds")
    while hi - lo > _WIDTH_TOL * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if mc_arl(mid) >= measure.gamma:
            hi = mid
        else:
            lo = mid
    return hi


def _mc_maxima(chart, model, params, T, runs, rng):
    from .models import JointModel, sample_from

    joint = isinstance(model, JointModel)
    S = np.zeros(runs)
    M = np.zeros(runs)
    for _ in range(T):
        drawn = sample_from(model, runs, rng)
        if joint:
            obs = np.column_stack((drawn.y, drawn.x))
        else:
            obs = drawn.values
        inc = _charts._increments(chart, params, obs)
        S = np.maximum(0.0, S + inc)
        M = np.maximum(M, S)
    return M


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def eval_measure(
    chart,
    model,
    params,
    measure: PerfMeasure,
    markov: MarkovConfig | None = None,
    mc: McConfig | None = None,
    rng=None,
) -> float:
    """Evaluate a performance measure for a chart under a model.

    Shewhart charts use the geometric closed forms; CUSUM charts reduce
    to their scalar update law and go through the Markov engine.  The
    Monte Carlo path runs only when ``mc`` is given.  The measure's
    transform is applied last.
    """
    markov = markov or MarkovConfig()
    if isinstance(chart, ShewhartStandardized):
        p = shewhart_exceedance(model, params, measure.c, chart.two_sided) if measure.kind in ("arl", "hit") else None
        raw = shewhart_measures(p, measure, model=model, params=params, two_sided=chart.two_sided)
    elif mc is not None:
        raw = _mc_measure(chart, model, params, measure, mc, rng)
    else:
        update = update_distribution(chart, model, params)
        if measure.kind == "arl":
            raw = arl_markov(update, measure.c, markov)
        elif measure.kind == "hit":
            raw = hit_markov(update, measure.c, measure.T, markov)
        else:
            raw = invert_threshold(update, measure, markov)
    return measure.apply_transform(raw)
