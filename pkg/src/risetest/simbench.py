"""Simulation settings and size/power experiments.

Settings follow the four benchmark families used to compare RISE with other
two-sample tests: Gaussian (``I``), Gaussian mixture (``II``), log-normal
(``III``) and multivariate t_5 (``IV``). Family ``J`` adds isotropic Gaussian
alternatives used by the k-sweep and the high-dimension low-sample-size check.
Logarithms are natural.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegenerateCovarianceError, InfeasibleMatchingError, ValidationError
from .geometry import ObservationSet, distance_matrix
from .graphseq import build_graph, resolve_k
from .inference import SampleSplit, resolve_threads, rise_test
from .rankweights import rank_matrix

VARIANTS = {
    "I": ("null", "a", "b", "c", "d", "e"),
    "II": ("null", "a", "b", "c"),
    "III": ("null", "a", "b", "c", "d"),
    "IV": ("null", "a", "b", "c", "d"),
    "J": ("null", "a", "b"),
}
FAMILY_NAMES = {"I": "gaussian_I", "II": "mixture_II", "III": "lognormal_III",
                "IV": "t5_IV", "J": "isotropic_J"}
CSV_COLUMNS = ("setting", "variant", "d", "m", "n", "graph", "rank", "k", "alpha", "reps",
               "power", "stderr", "errors", "seconds")

# replicate streams use spawn_key (1, rep); the fixed direction uses (0,)
_DIRECTION_KEY = (0,)
_REPLICATE_KEY = 1


@dataclass(frozen=True)
class SimSetting:
    family: str
    variant: str
    d: int

    def __post_init__(self):
        if self.family not in VARIANTS:
            raise ValidationError(
                f"unknown setting family {self.family!r}; expected one of {tuple(VARIANTS)}")
        if self.variant not in VARIANTS[self.family]:
            raise ValidationError(
                f"setting {self.family} has no variant {self.variant!r}; "
                f"valid: {VARIANTS[self.family]}")
        if self.d < 2:
            raise ValidationError(f"dimension must be >= 2, got d={self.d}")

    @classmethod
    def parse(cls, token: str, d: int) -> "SimSetting":
        """``"I-a"``, ``"III-null"``, ``"J-b"`` and so on."""
        fam, sep, var = token.strip().partition("-")
        if not sep:
            raise ValidationError(f"setting token must look like 'I-a' or 'I-null', got {token!r}")
        return cls(fam.upper(), var.lower(), d)

    @property
    def token(self) -> str:
        return f"{self.family}-{self.variant}"


@dataclass(frozen=True)
class MethodConfig:
    graph: str = "knn"
    rank: str = "induced"
    k: int | str = 10
    metric: str = "euclidean"
    approx_matching: bool = False
    kernel: str = "gaussian"
    sigma: float | None = None

    def rank_options(self) -> dict:
        if self.rank != "kernel":
            return {}
        return {"kernel": self.kernel, "sigma": self.sigma}


@dataclass
class PowerReport:
    setting: str
    variant: str
    d: int
    m: int
    n: int
    graph: str
    rank: str
    k: int
    alpha: float
    reps: int
    power: float
    stderr: float
    errors: int
    seconds: float
    error_detail: list = field(default_factory=list)
    pvalues: np.ndarray | None = field(default=None, repr=False)

    def rate_at(self, alpha: float) -> float:
        """Rejection rate at another level, reusing the stored p-values."""
        p = self.pvalues[np.isfinite(self.pvalues)]
        return float(np.mean(p < alpha)) if p.size else math.nan

    def row(self, timing: bool = True) -> dict:
        out = {c: getattr(self, c) for c in CSV_COLUMNS}
        if not timing:
            out["seconds"] = None
        return out


def _ar_cov(rho: float, d: int) -> np.ndarray:
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


@lru_cache(maxsize=32)
def _ar_cholesky(rho: float, d: int) -> np.ndarray:
    if rho == 0.0:
        return np.eye(d)
    L = np.linalg.cholesky(_ar_cov(rho, d))
    L.setflags(write=False)
    return L


def direction(setting: SimSetting, seed: int) -> np.ndarray:
    """The fixed unit direction mu'/||mu'|| shared by every replicate of an experiment."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=_DIRECTION_KEY))
    v = rng.standard_normal(setting.d)
    return v / np.linalg.norm(v)


def _sparse_mean(d: int, coef: float) -> np.ndarray:
    mu = np.zeros(d)
    s = int(math.floor(0.05 * d))
    j = np.arange(1, s + 1)
    mu[:s] = (-1.0) ** j * coef * math.log(d) / math.sqrt(d)
    return mu


def _gauss(rng, size, d, rho=0.0, scale=1.0, mean=0.0):
    z = rng.standard_normal((size, d))
    L = _ar_cholesky(float(rho), d)
    if rho != 0.0:
        z = z @ L.T
    return mean + scale * z


def _t5(rng, size, d, rho, scale=1.0, mean=0.0):
    g = _gauss(rng, size, d, rho, scale)
    w = np.sqrt(5.0 / rng.chisquare(5.0, size))
    return mean + g * w[:, None]


def _mixture(rng, size, d, means, scales, rho=0.0):
    w = rng.random(size) < 0.5
    a = _gauss(rng, size, d, rho, scales[0], means[0])
    b = _gauss(rng, size, d, rho, scales[1], means[1])
    return np.where(w[:, None], a, b)


def _draw_x(s: SimSetting, rng, size):
    d = s.d
    if s.family == "I":
        return _gauss(rng, size, d, 0.6)
    if s.family == "II":
        return _mixture(rng, size, d, (0.3, -0.3), (1.0, math.sqrt(2.0)))
    if s.family == "III":
        return np.exp(_gauss(rng, size, d, 0.6))
    if s.family == "IV":
        return _t5(rng, size, d, 0.6)
    return _gauss(rng, size, d)


def mean_vector(s: SimSetting, N: int, mu_dir: np.ndarray | None = None) -> np.ndarray | None:
    """Location of F_Y for the Gaussian, log-normal and t families (None for mixtures)."""
    d, v = s.d, s.variant
    if s.family == "II":
        return None
    ld, rd = math.log(d), math.sqrt(d)
    zero = np.zeros(d)
    if v == "null":
        return zero
    if s.family == "J":
        return np.full(d, 20.0 / math.sqrt(N * d) if v == "a" else 1.0)
    if s.family == "I" and v in ("b", "e"):
        if mu_dir is None:
            raise ValidationError(f"setting {s.token} needs a fixed direction")
        return (0.5 if v == "b" else 0.2) * ld * mu_dir
    if v == "b":
        return _sparse_mean(d, 2.8 if s.family == "III" else 2.1)
    if v == "a" or (s.family == "IV" and v == "d"):
        return np.full(d, 0.5 * ld / rd)
    if s.family == "III" and v == "d":
        return np.full(d, 0.25 * ld / rd)
    return zero


def _draw_y(s: SimSetting, rng, size, N, mu_dir):
    d, v = s.d, s.variant
    if v == "null":
        return _draw_x(s, rng, size)
    ld, rd = math.log(d), math.sqrt(d)
    fam = s.family
    if fam == "II":
        if v == "a":
            loc = 0.3 + 0.75 / ld
            return _mixture(rng, size, d, (loc, -loc), (1.0, math.sqrt(2.0)))
        if v == "b":
            sig = 0.12 * math.sqrt(50.0 / d)
            return _mixture(rng, size, d, (0.3, -0.3), (1 + sig, math.sqrt(2.0) + sig))
        return _mixture(rng, size, d, (0.35, -0.35), (1.0, math.sqrt(2.0)), rho=0.5)
    mu = mean_vector(s, N, mu_dir)
    if fam == "I":
        if v == "c":
            return _gauss(rng, size, d, 0.6, scale=1 + 0.12 * ld / rd)
        return _gauss(rng, size, d, 0.15 if v in ("d", "e") else 0.6, mean=mu)
    if fam == "III":
        if v == "c":
            return np.exp(_gauss(rng, size, d, 0.6, scale=1 + 0.15 * ld / rd))
        if v == "d":
            # covariance sigma * Sigma_X, not squared
            sig = 1 + 0.1 * (50.0 / d) ** 0.25
            return np.exp(_gauss(rng, size, d, 0.6, scale=math.sqrt(sig), mean=mu))
        return np.exp(_gauss(rng, size, d, 0.6, mean=mu))
    if fam == "IV":
        if v == "c":
            return _t5(rng, size, d, 0.1, scale=math.sqrt(0.7))
        return _t5(rng, size, d, 0.8 if v == "d" else 0.6, mean=mu)
    return _gauss(rng, size, d, mean=mu)


def _sample(s, m, n, rng, mu_dir):
    x = _draw_x(s, rng, m)
    y = _draw_y(s, rng, n, m + n, mu_dir)
    return ObservationSet(np.vstack([x, y])), SampleSplit(m, n)


def sample_setting(s: SimSetting, m: int, n: int, seed: int,
                   mu_dir: np.ndarray | None = None) -> tuple[ObservationSet, SampleSplit]:
    """Draw m observations from F_X followed by n from F_Y.

    Parameters
    ----------
    s : SimSetting
    m, n : int
        Sample sizes.
    seed : int
        Seeds the draw. Unless ``mu_dir`` is given it also seeds the fixed
        direction of the directed-location variants.
    mu_dir : ndarray, optional
        Unit direction for ``I-b`` and ``I-e``.

    Returns
    -------
    ObservationSet, SampleSplit
    """
    if mu_dir is None:
        mu_dir = direction(s, seed)
    return _sample(s, m, n, np.random.default_rng(seed), mu_dir)


def _replicate_pvalue(s, method, m, n, seed, rep, mu_dir):
    ss = np.random.SeedSequence(seed, spawn_key=(_REPLICATE_KEY, rep))
    obs, split = _sample(s, m, n, np.random.default_rng(ss), mu_dir)
    dist = distance_matrix(obs, method.metric)
    k = resolve_k(method.k, split.N)
    g = build_graph(dist, method.graph, k, approx_matching=method.approx_matching)
    r = rank_matrix(g, method.rank, **method.rank_options())
    return rise_test(r, split, diagnostics=False).p_chi2


def estimate_power(s: SimSetting, method: MethodConfig, m: int, n: int, alpha: float = 0.05,
                   reps: int = 1000, seed: int = 0, threads: int | None = None) -> PowerReport:
    """Rejection rate of the asymptotic RISE test (p_chi2 < alpha) over ``reps`` replicates.

    Replicate ``r`` draws from its own seed-derived stream, so the report
    does not depend on the thread count. Replicates with a singular
    covariance or an infeasible matching count as errors and are left out
    of the denominator.
    """
    if reps < 1:
        raise ValidationError(f"reps must be >= 1, got {reps}")
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")
    k = resolve_k(method.k, m + n)
    mu_dir = direction(s, seed)
    t0 = time.perf_counter()

    def one(rep):
        try:
            return _replicate_pvalue(s, method, m, n, seed, rep, mu_dir), None
        except (DegenerateCovarianceError, InfeasibleMatchingError) as exc:
            return math.nan, f"replicate {rep}: {exc}"

    workers = min(resolve_threads(threads), reps)
    if workers == 1:
        out = [one(r) for r in range(reps)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(one, range(reps)))
    pv = np.array([p for p, _ in out])
    detail = [e for _, e in out if e is not None]
    ok = pv[np.isfinite(pv)]
    power = float(np.mean(ok < alpha)) if ok.size else math.nan
    stderr = math.sqrt(power * (1 - power) / ok.size) if ok.size else math.nan
    return PowerReport(setting=s.family, variant=s.variant, d=s.d, m=m, n=n,
                       graph=method.graph, rank=method.rank, k=k, alpha=alpha, reps=reps,
                       power=power, stderr=stderr, errors=len(detail),
                       seconds=time.perf_counter() - t0, error_detail=detail[:10], pvalues=pv)


def sweep_k(graph: str, N: int, lam: float) -> int:
    """k for exponent lambda: 2 floor(N^lambda) for knn/mdp, floor(N^lambda) for mst."""
    base = int(math.floor(N**lam))
    if graph == "mst":
        return min(base, N // 2)
    if graph == "mdp":
        return min(2 * base, N - 2)
    return min(2 * base, N - 1)


def power_vs_k_sweep(s: SimSetting, method: MethodConfig, m: int, n: int, alpha: float,
                     reps: int, lambdas, seed: int = 0,
                     threads: int | None = None) -> list[PowerReport]:
    lambdas = [float(x) for x in lambdas]
    bad = [x for x in lambdas if not 0.0 < x < 1.0]
    if not lambdas or bad:
        raise ValidationError(f"lambda values must lie in (0, 1), got {bad or lambdas}")
    out = []
    for lam in lambdas:
        cfg = MethodConfig(**{**asdict(method), "k": sweep_k(method.graph, m + n, lam)})
        out.append(estimate_power(s, cfg, m, n, alpha, reps, seed, threads))
    return out


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def reports_to_csv(reports, timing: bool = True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for rep in reports:
        row = rep.row(timing)
        w.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def reports_to_json(reports, timing: bool = True, config: dict | None = None) -> str:
    rows = []
    for rep in reports:
        row = rep.row(timing)
        row["power"] = None if math.isnan(rep.power) else rep.power
        row["stderr"] = None if math.isnan(rep.stderr) else rep.stderr
        row["error_detail"] = rep.error_detail
        rows.append(row)
    return json.dumps({"config": config or {}, "reports": rows}, indent=2, sort_keys=True) + "\n"
