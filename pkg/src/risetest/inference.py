"""Within-sample rank sums, permutation moments and the RISE test statistics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.special import comb, ndtr

from .errors import DegenerateCovarianceError, ValidationError
from .rankweights import RankMatrix

DEGENERACY_EPS = 1e-12
EXACT_LIMIT = 1_000_000
MC_CHUNK = 1024
STATISTICS = ("t_r", "z_w", "r_max")


def resolve_threads(threads: int | None = None) -> int:
    """Explicit value, else ``RISE_THREADS``, else the CPU count."""
    if threads is None:
        env = os.environ.get("RISE_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise ValidationError(f"RISE_THREADS must be an integer, got {env!r}") from None
        else:
            threads = os.cpu_count() or 1
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")
    return threads


@dataclass(frozen=True)
class SampleSplit:
    """Group labels of the pooled sample; ``labels[i]`` is True for sample X."""

    m: int
    n: int
    labels: np.ndarray | None = None

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise ValidationError(f"both samples need at least 2 observations, got m={self.m}, n={self.n}")
        if self.labels is None:
            lab = np.zeros(self.m + self.n, dtype=bool)
            lab[: self.m] = True
        else:
            lab = np.asarray(self.labels).astype(bool)
            if lab.shape != (self.m + self.n,):
                raise ValidationError(
                    f"labels must have length m+n={self.m + self.n}, got shape {lab.shape}")
            if int(lab.sum()) != self.m:
                raise ValidationError(f"labels mark {int(lab.sum())} X observations, expected m={self.m}")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def N(self) -> int:
        return self.m + self.n

    def swapped(self) -> "SampleSplit":
        return SampleSplit(self.n, self.m, ~self.labels)


@dataclass(frozen=True)
class MomentSummary:
    """Permutation-null moments of (U_x, U_y) and of the derived statistics."""

    N: int
    m: int
    n: int
    r0: float
    r1_sq: float
    rd_sq: float
    Vr: float
    Vd: float
    mu_x: float
    mu_y: float
    var_x: float
    var_y: float
    cov_xy: float
    mu_w: float
    sigma_w_sq: float
    mu_diff: float
    sigma_diff_sq: float
    c1_degenerate: bool
    c2_degenerate: bool

    @property
    def covariance(self) -> np.ndarray:
        return np.array([[self.var_x, self.cov_xy], [self.cov_xy, self.var_y]])


class Degeneracy(NamedTuple):
    status: str
    c1_ratio: float
    c2_ratio: float


def _finite_or_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


@dataclass
class TestResult:
    u_x: float
    u_y: float
    t_r: float
    z_w: float
    z_diff: float
    r_max: float
    p_chi2: float
    p_zw: float
    p_max: float
    diagnostics: MomentSummary
    condition_ratios: dict
    p_perm: float | None = None
    perm_mode: str | None = None
    perm_statistic: str | None = None
    config: dict = field(default_factory=dict)

    __test__ = False  # keep pytest from collecting this class

    def to_dict(self) -> dict:
        out = asdict(self)
        out["diagnostics"] = {k: _finite_or_none(v) for k, v in asdict(self.diagnostics).items()}
        out["condition_ratios"] = {k: _finite_or_none(float(v))
                                   for k, v in self.condition_ratios.items()}
        for key in ("u_x", "u_y", "t_r", "z_w", "z_diff", "r_max"):
            out[key] = _finite_or_none(float(out[key]))
        return out


def _matrix(r) -> np.ndarray:
    return r.r if isinstance(r, RankMatrix) else np.asarray(r, dtype=np.float64)


def rank_sums(r, split: SampleSplit) -> tuple[float, float]:
    """Sums of R over ordered pairs inside X and inside Y."""
    R = _matrix(r)
    if R.shape != (split.N, split.N):
        raise ValidationError(f"rank matrix is {R.shape}, split has N={split.N}")
    x = split.labels
    y = ~x
    return float(R[np.ix_(x, x)].sum()), float(R[np.ix_(y, y)].sum())


def _row_means(R: np.ndarray) -> np.ndarray:
    return (R.sum(axis=1) - np.diag(R)) / (R.shape[0] - 1)


def permutation_moments(r, m: int, n: int) -> MomentSummary:
    """Exact mean and covariance of (U_x, U_y) under uniform label permutation."""
    R = _matrix(r)
    N = R.shape[0]
    if N <= 3:
        raise ValidationError(f"permutation moments need N >= 4, got N={N}")
    if m + n != N:
        raise ValidationError(f"m + n = {m + n} does not match rank matrix size {N}")
    if m < 2 or n < 2:
        raise ValidationError(f"both samples need at least 2 observations, got m={m}, n={n}")
    rbar = _row_means(R)
    r0 = float(rbar.mean())
    r1_sq = float(np.mean(rbar**2))
    off = R.copy()
    np.fill_diagonal(off, 0.0)
    rd_sq = float((off**2).sum() / (N * (N - 1)))
    # clip tiny negative round-off; both are variances
    Vr = max(r1_sq - r0**2, 0.0)
    Vd = max(rd_sq - r0**2, 0.0)

    den = (N - 2) * (N - 3)
    var_x = 2 * m * n * (m - 1) / den * ((n - 1) * Vd + 2 * (m - 2) * (N - 1) * Vr)
    var_y = 2 * m * n * (n - 1) / den * ((m - 1) * Vd + 2 * (n - 2) * (N - 1) * Vr)
    cov = 2 * m * (m - 1) * n * (n - 1) / den * (Vd - 2 * (N - 1) * Vr)
    mu_x = m * (m - 1) * r0
    mu_y = n * (n - 1) * r0
    mu_w = N * (n - 1) * (m - 1) * r0 / (N - 2)
    c2_gap = (N - 2) * Vd - 2 * (N - 1) * Vr
    sigma_w_sq = max(2 * m * (m - 1) * n * (n - 1) * c2_gap / ((N - 2) ** 2 * (N - 3)), 0.0)
    mu_diff = (N - 1) * (m - n) * r0
    sigma_diff_sq = 4 * (N - 1) * m * n * Vr
    c1 = Vr <= DEGENERACY_EPS * rd_sq
    c2 = abs(c2_gap) <= DEGENERACY_EPS * N * rd_sq
    return MomentSummary(N=N, m=m, n=n, r0=r0, r1_sq=r1_sq, rd_sq=rd_sq, Vr=Vr, Vd=Vd,
                         mu_x=mu_x, mu_y=mu_y, var_x=var_x, var_y=var_y, cov_xy=cov,
                         mu_w=mu_w, sigma_w_sq=sigma_w_sq, mu_diff=mu_diff,
                         sigma_diff_sq=sigma_diff_sq, c1_degenerate=bool(c1),
                         c2_degenerate=bool(c2))


def degeneracy_check(ms: MomentSummary) -> Degeneracy:
    """Classify the covariance as ``ok``, ``c1`` (V_r = 0) or ``c2``.

    ``c1_ratio = r1^2 / r0^2`` and ``c2_ratio = (N-2) V_d / (2 (N-1) V_r)``
    both exceed 1 for a healthy rank matrix.
    """
    N = ms.N
    c1_ratio = ms.r1_sq / ms.r0**2 if ms.r0 > 0 else math.nan
    c2_ratio = (N - 2) * ms.Vd / (2 * (N - 1) * ms.Vr) if ms.Vr > 0 else math.inf
    if ms.c1_degenerate:
        status = "c1"
    elif ms.c2_degenerate:
        status = "c2"
    else:
        status = "ok"
    return Degeneracy(status, float(c1_ratio), float(c2_ratio))


def _degenerate_error(status: str) -> DegenerateCovarianceError:
    what = {"c1": "all row means of R are equal (V_r = 0)",
            "c2": "(N-2) V_d = 2 (N-1) V_r"}[status]
    return DegenerateCovarianceError(
        f"covariance of (U_x, U_y) is singular: {what}. Use a permutation p-value for a "
        f"statistic that stays defined, or build a different similarity graph "
        f"(e.g. another graph kind or rank scheme).", condition=status)


def _standardize(ux, uy, ms: MomentSummary):
    m, n, N = ms.m, ms.n, ms.N
    uw = ((n - 1) * ux + (m - 1) * uy) / (N - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        z_w = (uw - ms.mu_w) / math.sqrt(ms.sigma_w_sq) if ms.sigma_w_sq > 0 else np.nan * uw
        z_diff = ((ux - uy) - ms.mu_diff) / math.sqrt(ms.sigma_diff_sq) \
            if ms.sigma_diff_sq > 0 else np.nan * uw
    return z_w, z_diff


def _pick(stat: str, z_w, z_diff):
    if stat == "t_r":
        return z_w**2 + z_diff**2
    if stat == "z_w":
        return z_w
    return np.maximum(z_w, np.abs(z_diff))


def p_max_from(t: float) -> float:
    """1 - Phi(t)(2 Phi(t) - 1), rewritten in the upper tail q to avoid cancellation."""
    q = float(ndtr(-t))
    return min(1.0, 3.0 * q - 2.0 * q * q)


def _a5_numerator(R: np.ndarray, rt: np.ndarray) -> float:
    v = R @ rt
    return float(abs((v**2).sum() - ((R**2) @ (rt**2)).sum()))


def condition_diagnostics(r) -> dict:
    """Ratios A_3 and A_5 that proxy the asymptotic-normality conditions.

    Both should be small. ``king`` reports ``max R / (N^2 r_d^2)``.
    """
    R = _matrix(r).copy()
    np.fill_diagonal(R, 0.0)
    N = R.shape[0]
    rbar = _row_means(R)
    r0 = rbar.mean()
    rt = rbar - r0
    Vr = float(np.mean(rbar**2) - r0**2)
    rd_sq = float((R**2).sum() / (N * (N - 1)))
    if Vr <= DEGENERACY_EPS * rd_sq:
        raise _degenerate_error("c1")
    a3 = float((np.abs(rt) ** 3).sum() / (N * Vr) ** 1.5)
    a5 = _a5_numerator(R, rt) / (N**3 * rd_sq * Vr)
    king = float(R.max() / (N**2 * rd_sq))
    return {"a3": a3, "a5": a5, "king": king}


@njit(cache=True, nogil=True)
def _sums_for_subsets(R, rowsum, total, idx):
    """U_x and U_y for each row of ``idx`` (indices of X)."""
    b, m = idx.shape
    ux = np.empty(b)
    uy = np.empty(b)
    for t in range(b):
        s = 0.0
        sx = 0.0
        for p in range(m):
            a = idx[t, p]
            sx += rowsum[a]
            for q in range(p + 1, m):
                s += R[a, idx[t, q]]
        ux[t] = 2.0 * s
        uy[t] = total - 2.0 * sx + 2.0 * s
    return ux, uy


@njit(cache=True, nogil=True)
def _enumerate_sums(R, rowsum, total, m, count):
    N = R.shape[0]
    ux = np.empty(count)
    uy = np.empty(count)
    c = np.arange(m)
    for t in range(count):
        s = 0.0
        sx = 0.0
        for p in range(m):
            a = c[p]
            sx += rowsum[a]
            for q in range(p + 1, m):
                s += R[a, c[q]]
        ux[t] = 2.0 * s
        uy[t] = total - 2.0 * sx + 2.0 * s
        # next combination in lexicographic order
        p = m - 1
        while p >= 0 and c[p] == N - m + p:
            p -= 1
        if p < 0:
            break
        c[p] += 1
        for q in range(p + 1, m):
            c[q] = c[q - 1] + 1
    return ux, uy


def enumerate_rank_sums(r, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(U_x, U_y) for every one of the C(N, m) label assignments."""
    R = np.ascontiguousarray(_matrix(r))
    N = R.shape[0]
    count = int(comb(N, m, exact=True))
    rowsum = R.sum(axis=1)
    return _enumerate_sums(R, rowsum, float(rowsum.sum()), m, count)


def _check_stat_defined(stat: str, ms: MomentSummary) -> None:
    if stat not in STATISTICS:
        raise ValidationError(f"unknown statistic {stat!r}; expected one of {STATISTICS}")
    if stat == "z_w":
        if ms.sigma_w_sq <= 0 or ms.c2_degenerate:
            raise _degenerate_error("c2")
        return
    status = degeneracy_check(ms).status
    if status != "ok":
        raise _degenerate_error(status)


def permutation_pvalue(r, split: SampleSplit, statistic: str = "t_r", budget: int = 2000,
                       seed: int = 0, threads: int | None = None) -> tuple[float, str]:
    """Permutation p-value of ``statistic``; exact when C(N, m) <= 10**6.

    Monte Carlo replicates are drawn in fixed-size chunks, each from its own
    seed-derived stream, so the result depends on ``(seed, budget)`` only.
    """
    if budget < 1:
        raise ValidationError(f"permutation budget must be >= 1, got {budget}")
    R = np.ascontiguousarray(_matrix(r))
    ms = permutation_moments(R, split.m, split.n)
    _check_stat_defined(statistic, ms)
    N, m = split.N, split.m
    rowsum = R.sum(axis=1)
    total = float(rowsum.sum())

    obs_idx = np.nonzero(split.labels)[0][None, :].astype(np.int64)
    ox, oy = _sums_for_subsets(R, rowsum, total, obs_idx)
    t_obs = float(_pick(statistic, *_standardize(ox, oy, ms))[0])
    tol = 1e-9 * max(1.0, abs(t_obs))

    if comb(N, m, exact=True) <= EXACT_LIMIT:
        ux, uy = _enumerate_sums(R, rowsum, total, m, int(comb(N, m, exact=True)))
        t = _pick(statistic, *_standardize(ux, uy, ms))
        return float(np.count_nonzero(t >= t_obs - tol) / t.size), "exact"

    nchunks = -(-budget // MC_CHUNK)

    def chunk(c: int) -> int:
        size = min(MC_CHUNK, budget - c * MC_CHUNK)
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c,)))
        idx = np.argsort(rng.random((size, N)), axis=1)[:, :m].astype(np.int64)
        ux, uy = _sums_for_subsets(R, rowsum, total, idx)
        t = _pick(statistic, *_standardize(ux, uy, ms))
        return int(np.count_nonzero(t >= t_obs - tol))

    workers = min(resolve_threads(threads), nchunks)
    if workers == 1:
        hits = sum(map(chunk, range(nchunks)))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            hits = sum(pool.map(chunk, range(nchunks)))
    return (1 + hits) / (1 + budget), "monte_carlo"


def rise_test(r, split: SampleSplit, permutation: str | None = None, budget: int = 2000,
              seed: int = 0, threads: int | None = None,
              diagnostics: bool = True) -> TestResult:
    """RISE test of equal distributions from a rank matrix and group labels.

    Parameters
    ----------
    r : RankMatrix or ndarray
        Symmetric, zero-diagonal, nonnegative weights.
    split : SampleSplit
        Which observations belong to sample X.
    permutation : {None, "t_r", "z_w", "r_max"}
        Also compute a permutation p-value for this statistic.
    budget, seed, threads
        Passed to :func:`permutation_pvalue`.
    diagnostics : bool
        Compute the condition ratios A_3 and A_5 (O(N^2)).

    Returns
    -------
    TestResult

    Raises
    ------
    DegenerateCovarianceError
        If the permutation covariance of (U_x, U_y) is singular.
    """
    R = _matrix(r)
    ms = permutation_moments(R, split.m, split.n)
    deg = degeneracy_check(ms)
    if deg.status != "ok":
        raise _degenerate_error(deg.status)
    ux, uy = rank_sums(R, split)
    z_w, z_diff = (float(v) for v in _standardize(np.float64(ux), np.float64(uy), ms))
    t_r = z_w**2 + z_diff**2
    r_max = max(z_w, abs(z_diff))
    ratios = {"c1_ratio": deg.c1_ratio, "c2_ratio": deg.c2_ratio}
    if diagnostics:
        ratios.update(condition_diagnostics(R))
    res = TestResult(u_x=ux, u_y=uy, t_r=t_r, z_w=z_w, z_diff=z_diff, r_max=r_max,
                     p_chi2=math.exp(-t_r / 2.0), p_zw=float(ndtr(-z_w)),
                     p_max=p_max_from(r_max), diagnostics=ms, condition_ratios=ratios)
    if permutation is not None:
        res.p_perm, res.perm_mode = permutation_pvalue(R, split, permutation, budget, seed, threads)
        res.perm_statistic = permutation
    return res
