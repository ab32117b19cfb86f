"""When does the chi-square approximation apply?

Compares the moment diagnostics of three graph and rank pairs on the same
data.  Matching layers with graph-induced ranks give a constant row sum,
which makes the covariance singular; the test refuses it and points at the
permutation fallback on Z_w.
"""
import numpy as np

from risetest import DegenerateCovarianceError, SampleSplit, build_graph, rank_matrix, rise_test
from risetest.geometry import ObservationSet, distance_matrix
from risetest.inference import (condition_diagnostics, degeneracy_check, permutation_moments,
                                permutation_pvalue)

rng = np.random.default_rng(7)
d = distance_matrix(ObservationSet(rng.normal(size=(80, 20)))).d
split = SampleSplit(40, 40)

for graph, rank in (("knn", "induced"), ("mdp", "overall"), ("mdp", "induced")):
    r = rank_matrix(build_graph(d, graph, 5), rank)
    deg = degeneracy_check(permutation_moments(r.r, 40, 40))
    line = f"{graph}/{rank:<8} status={deg.status:<3} c1={deg.c1_ratio:.3g} c2={deg.c2_ratio:.3g}"
    if deg.status == "ok":
        c = condition_diagnostics(r)
        line += f"  A3={c['a3']:.3f} A5={c['a5']:.4f}"
    print(line)
    try:
        rise_test(r.r, split)
    except DegenerateCovarianceError as err:
        print("   ", err)
        p, mode = permutation_pvalue(r.r, split, "z_w", budget=2000, seed=0)
        print(f"    Z_w permutation p = {p:.3f} ({mode})")
