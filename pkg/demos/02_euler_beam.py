"""Cantilever beam u'''' = -1 on [0, 1] without any data.

Clamped at x = 0 (u = u' = 0) and free at x = 1 (u'' = u''' = 0). The
boundary rows and the fourth-order equation at virtual points determine the
polynomial completely, so no simulation runs are needed.
"""
import numpy as np

from pc2 import TrainingData, builtin_case, fit_kkt
from pc2.operators import residual

case = builtin_case("euler_beam")
problem = case.problem
model, report = fit_kkt(problem, TrainingData.empty(1), p_range=range(4, 13))
print(f"selected p = {report.p} with {report.n_v} virtual points")

x = np.linspace(0, 1, 6)[:, None]
exact = case.reference.evaluate({"x": x[:, 0]})
for xi, u, ue in zip(x[:, 0], model.evaluate(x), exact):
    print(f"  x = {xi:.1f}: u = {u: .10f}  exact {ue: .10f}")

for k, bc in enumerate(problem.bcs):
    loc = np.array([[bc.location_map["x"]]])
    r = residual(bc.operator, model, model.to_standard(loc))[0]
    print(f"  boundary condition {k}: residual {r:.1e}")
