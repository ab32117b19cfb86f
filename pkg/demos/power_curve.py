"""Power against neighborhood size.

Sweeps k = N^lambda for a scale alternative and prints one line per lambda.
Small reps keep this quick; raise them for smoother curves.
"""
from risetest.simbench import MethodConfig, SimSetting, power_vs_k_sweep

setting = SimSetting.parse("I-c", 200)
for graph, rank in (("knn", "induced"), ("mdp", "overall")):
    reports = power_vs_k_sweep(setting, MethodConfig(graph, rank), 50, 50, 0.05, 100,
                               [0.2, 0.35, 0.5, 0.65, 0.8], seed=3)
    for rep in reports:
        print(f"{graph:>4}/{rank:<8} k={rep.k:>3}  power={rep.power:.2f} ± {rep.stderr:.2f}")
