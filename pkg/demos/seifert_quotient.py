"""Circle quotient of the Seifert chart and its empty perturbed zero set."""
from vfckit import fixtures as fx
from vfckit.multisection import PerturbationPlan
from vfckit.s1 import equivariant_perturb, minimal_isotropy_angle, quotient_structure

s1 = fx.seifert_circle()
q = quotient_structure(s1)
ch = q.structure.chart("1")
print("quotient chart: dim %d, group order %d, vdim %d -> %d" % (
    ch.dim, ch.group.order, s1.structure.virtual_dimension, q.structure.virtual_dimension))
print("isotropy at the central orbit:", minimal_isotropy_angle(s1.chart("1"), [0, 0, 0]))
for seed in range(5):
    print("seed", seed, "empty:", equivariant_perturb(s1, PerturbationPlan(1e-2, seed)).empty)
