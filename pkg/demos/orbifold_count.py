"""Weighted zero count of the antipodal Z2 chart for a few perturbations."""
from vfckit import fixtures as fx
from vfckit.goodcoords import build_gcs
from vfckit.multisection import PerturbationPlan, count

gcs = build_gcs(fx.z2_chart_structure())
for eps in (1e-1, 1e-2, 1e-3):
    for seed in range(3):
        vc, system, zc = count(gcs, PerturbationPlan(eps, seed))
        pts = ", ".join("(%.4f, %.4f) w=%s" % (e.point[0], e.point[1], e.weight) for e in vc.entries)
        print("eps=%-6g seed=%d delta=%-5g total=%s  %s" % (eps, seed, zc.delta, vc.total_weight, pts))
