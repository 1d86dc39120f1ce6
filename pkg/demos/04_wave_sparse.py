"""Wave equation u_tt = 4 u_xx with sparse LAR-KKT versus plain LAR.

Both methods see the same 20 simulations; the constrained fit also sees 10
boundary/initial points and the PDE at virtual points. The PDE residual R2_L
shows the physical consistency gained.
"""
from pc2.bench import builtin_case, run_convergence

case = builtin_case("wave2d")
report = run_convergence(case, ["lar-kkt", "lar"], [10, 20], trials=3, validation=(5000, 100))
print(f"{'method':>8} {'n_sim':>5} {'p':>5} {'eps_mean':>10} {'R2_L':>10} {'R2_B':>10}")
for agg in report.aggregate():
    print(f"{agg['method']:>8} {agg['n_sim']:>5} {agg['mean_p_selected']:>5.1f} {agg['mean_eps_mean']:>10.2e} "
          f"{agg['mean_r2_L']:>10.2e} {agg['mean_r2_B']:>10.2e}")
