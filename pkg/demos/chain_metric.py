"""Chain distances on the three-subset diagram and the doubled-point witness."""
from vfckit import fixtures as fx
from vfckit.quotient import QuotientComplex, hausdorff_report, neighborhood_basis

d = fx.three_subset_diagram()
qc = QuotientComplex(d)
pts = [("3", (2.0, 0.0, 0.0)), ("1", (-1.0,)), ("2", (1.0, 1.0)), ("1", (1.0,))]
print(qc.metric_matrix(pts))
print(hausdorff_report(d, qc=qc).summary())
basis, rep = neighborhood_basis(("1", (0.0,)), d, 0.1)
print([(b["piece"], round(b["radius"], 6)) for b in basis], rep.passed)
print(hausdorff_report(fx.doubled_point_diagram(), force=True).summary())
