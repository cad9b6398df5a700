"""Build, check and shrink the three-chart system; trace its perturbed zero set."""
from vfckit import fixtures as fx
from vfckit.goodcoords import build_gcs, check_gcs, shrink
from vfckit.multisection import PerturbationPlan, perturb, zero_complex

gcs = build_gcs(fx.three_chart_structure())
print(check_gcs(gcs).summary())
small = shrink(gcs, fx.three_chart_shrink_schedule())
for p in small.indices:
    print("chart", p, small.chart(p).region.to_json())
zc = zero_complex(perturb(small, PerturbationPlan(1e-2, 0)), 0.05)
for seg in zc.segments:
    print("segment in chart %d from %s to %s (%d vertices)" % (seg.chart, seg.points[0], seg.points[-1],
                                                              len(seg.points)))
