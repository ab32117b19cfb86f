"""Edge weighting schemes turning a graph sequence into a symmetric rank matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError
from .graphseq import GraphSequence

SCHEMES = ("induced", "overall", "depth", "binary", "kernel")
KERNELS = ("gaussian", "negdist_affine")


@dataclass(frozen=True)
class RankMatrix:
    r: np.ndarray
    scheme: str

    @property
    def n(self) -> int:
        return self.r.shape[0]

    def to_csv(self, path) -> None:
        np.savetxt(path, self.r, delimiter=",", fmt="%.17g")


def symmetrize(raw) -> np.ndarray:
    """(R + R^T) / 2 with a zero diagonal."""
    raw = np.asarray(raw, dtype=np.float64)
    out = 0.5 * (raw + raw.T)
    np.fill_diagonal(out, 0.0)
    return out


def _from_edges(g: GraphSequence, values) -> np.ndarray:
    r = np.zeros((g.n, g.n))
    r[g.i, g.j] = values
    r[g.j, g.i] = values
    return r


def graph_induced_rank(g: GraphSequence) -> RankMatrix:
    """Number of layers containing each edge.

    For knn the directed weight ``k - position + 1`` is symmetrized, so a
    one-sided neighbour relation contributes half.
    """
    if g.kind == "knn":
        pos = g.directed_rank()
        directed = np.where(pos > 0, g.k - pos + 1, 0).astype(np.float64)
        return RankMatrix(symmetrize(directed), "induced")
    return RankMatrix(_from_edges(g, (g.k - g.layer + 1).astype(np.float64)), "induced")


def overall_rank(g: GraphSequence) -> RankMatrix:
    """Midrank of each edge's similarity among all edges of G_k (closest pair ranks highest)."""
    return RankMatrix(_from_edges(g, rankdata(-g.dist, method="average")), "overall")


def graph_depth_rank(g: GraphSequence) -> RankMatrix:
    """Layer count minus one plus the within-increment normalized similarity rank.

    Inside each increment ``G_l minus G_(l-1)`` of M edges, the most similar
    edge scores 1 and the least similar 1/M.
    """
    vals = np.empty(g.n_edges)
    for lay in np.unique(g.layer):
        sel = g.layer == lay
        m = int(sel.sum())
        vals[sel] = (g.k - lay) + rankdata(-g.dist[sel], method="average") / m
    return RankMatrix(_from_edges(g, vals), "depth")


def binary_weight(g: GraphSequence) -> RankMatrix:
    return RankMatrix(_from_edges(g, 1.0), "binary")


def kernel_weight(g: GraphSequence, kernel: str = "gaussian", sigma: float | None = None
                  ) -> RankMatrix:
    """Kernel or affine negative-distance weights on the edges of G_k.

    Weights are divided by the smallest positive raw weight so every edge
    weight is at least 1. ``sigma`` defaults to the median edge distance.
    """
    if g.n_edges == 0:
        raise ValidationError("kernel weights need a nonempty graph")
    if kernel == "gaussian":
        if sigma is None:
            sigma = float(np.median(g.dist))
            if sigma <= 0:
                sigma = 1.0
        if not sigma > 0:
            raise ValidationError(f"gaussian kernel needs sigma > 0, got {sigma}")
        raw = np.exp(-g.dist**2 / (2.0 * sigma**2))
    elif kernel == "negdist_affine":
        raw = g.dist.max() - g.dist + 1.0
    else:
        raise ValidationError(f"unknown kernel {kernel!r}; expected one of {KERNELS}")
    pos = raw[raw > 0]
    if pos.size == 0:
        # every kernel value underflowed; all edges are equally far
        raw = np.ones_like(raw)
        pos = raw
    return RankMatrix(_from_edges(g, raw / pos.min()), "kernel")


def rank_matrix(g: GraphSequence, scheme: str, **kernel_opts) -> RankMatrix:
    if scheme == "induced":
        return graph_induced_rank(g)
    if scheme == "overall":
        return overall_rank(g)
    if scheme == "depth":
        return graph_depth_rank(g)
    if scheme == "binary":
        return binary_weight(g)
    if scheme == "kernel":
        return kernel_weight(g, **kernel_opts)
    raise ValidationError(f"unknown rank scheme {scheme!r}; expected one of {SCHEMES}")
