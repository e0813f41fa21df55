"""Small Monte Carlo study: bias and RMSE by sample size, then kernel selection.

Reduced replicate counts keep the run to about a minute; the CLI command
``ironq simulate --config scenario.json`` runs the same studies at full size.
Set IRONQ_THREADS to use several worker processes.

    python3 notebooks/03_monte_carlo.py
"""
from ironq import ScenarioConfig, run_bias_rmse, run_model_selection

bias = run_bias_rmse(ScenarioConfig(kernels=["normal"], gamma=[0.5, 1.5, -0.5], lam=2.0, tau=0.5,
                                    sample_sizes=[30, 100, 600], replicates=50, seed=11))
print("relative bias and RMSE (Normal kernel, 50 replicates)")
for r in bias.rows:
    print(f"  n={r['n']:>4} {r['parameter']:<7} RB={r['rb']:+.4f} RMSE={r['rmse']:.4f}")

sel = run_model_selection(ScenarioConfig(mode="model_selection", generator="ep:0.75",
                                         kernels=["normal", "t", "logistic", "ep"], lam=0.5,
                                         gamma=[2.0, 1.5, -0.5], tau_grid=[0.3], sample_sizes=[100],
                                         replicates=20, seed=12))
print("\nAIC selection, EP(0.75) data (20 replicates)")
for r in sel.rows:
    print(f"  tau={r['tau']} {r['kernel']:<9} {r['selection_percent']:.0f}%")
