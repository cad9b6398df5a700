"""Alternating-method gluing for u' = -u + u^2: error history and decay in T."""
from vfckit.gluing import bvp_oracle, glue, logistic_problem, sup_distance, t_decay_experiment

problem = logistic_problem()
st = glue(problem, ([0.3], [0.3]), 4.0, min_steps=3)
print("errors:", ["%.2e" % h for h in st.history], "mu=%.2e" % st.mu)
print("oracle distance: %.2e" % sup_distance(st.core_values(), bvp_oracle(problem, 4.0, (0.3, 0.3)).core_values()))
rep = t_decay_experiment(problem, ([0.3], [0.3]), range(4, 13))
print(rep.csv())
print("residual fit", rep.residual_fit)
print("dT fit", rep.dT_fit)
