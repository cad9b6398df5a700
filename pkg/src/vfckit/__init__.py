"""Computational toolkit for Kuranishi structures and virtual counts."""
from .smoothmap import Region, SmoothMap, compose, eval_map, jacobian, parse_map, sample_grid
from .kuranishi import (CoordinateChange, FiniteGroupAction, KuranishiChart, KuranishiStructure,
                        StronglyContinuousMap, check_cocycle, check_tangent_condition,
                        validate_chart, validate_coordinate_change, validate_structure)
from .quotient import GluingDiagram, QuotientComplex, chain_metric, hausdorff_report, neighborhood_basis
from .goodcoords import GoodCoordinateSystem, build_gcs, check_gcs, shrink
from .multisection import (Multisection, PerturbationPlan, check_cycle, count, equivalence_check,
                           perturb, refine, virtual_chain, zero_complex)
from .s1 import CircleAction, S1Structure, check_locally_free, equivariant_perturb, quotient_structure
from .gluing import (ModelProblem, WeightedNorm, bvp_oracle, glue, preglue, solve_half_line, step,
                     t_decay_experiment)
from .reports import Report, report_schema_version

__version__ = "0.1.0"
