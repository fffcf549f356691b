"""Error decomposition of the squared-deviation statistic against beta.

With M = (c* N)^(1-beta) series and L = (c* N)^beta lags, err1 measures the fluctuation
of the fully-estimated statistic around its deterministic equivalent and err2 the
distance between that equivalent and the MP value c. err2 falls with beta (more lags,
smaller normalization error) while err1 grows (fewer series). The crossing sits near
beta = 1/3. This is a reduced run (N=600, 60 replications); the acceptance suite uses 200.
"""
from blockcorr.harness import ExperimentConfig, crossover_estimate, run_error_curves

cfg = ExperimentConfig(c_star=0.5, N_list=[600], beta_list=[0.2, 0.3, 0.4, 0.5, 0.6, 0.7], rho=0.5, reps=60)
curves = run_error_curves(cfg, threads=4)
print("beta    M    L    err1        err2")
for cell in curves.for_N(600):
    print(f"{cell.beta:.1f}  {cell.M:4d} {cell.L:4d}   {cell.err1:.3e}   {cell.err2:.3e}")
x = crossover_estimate(curves, 600)
print("crossover:", "none" if x is None else f"beta = {x.beta:.3f}, bracketed by {x.bracket}")
