"""Two samples, one test.

Draws two Gaussian samples whose means differ slightly, builds a 10-NN graph,
and reports the asymptotic and permutation p-values side by side.
"""
import numpy as np

from risetest import ObservationSet, SampleSplit, build_graph, distance_matrix, rank_matrix, rise_test

rng = np.random.default_rng(0)
x = rng.normal(size=(60, 30))
y = rng.normal(size=(60, 30)) + 0.25

obs = ObservationSet(np.vstack([x, y]))
d = distance_matrix(obs)
g = build_graph(d.d, "knn", 10)
r = rank_matrix(g, "induced")

res = rise_test(r.r, SampleSplit(60, 60), permutation="t_r", budget=4000, seed=1)
print(f"T_R   = {res.t_r:8.3f}   p (chi-square, 2 df) = {res.p_chi2:.4g}")
print(f"Z_w   = {res.z_w:8.3f}   Z_diff = {res.z_diff:.3f}")
print(f"R_max = {res.r_max:8.3f}   p = {res.p_max:.4g}")
print(f"permutation p ({res.perm_mode}) = {res.p_perm:.4g}")
