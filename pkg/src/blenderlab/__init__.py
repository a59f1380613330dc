"""blenderlab: a numerical laboratory for blender dynamics on the annulus.

Explicit expanding/dissipative/coupled skew-product families on R/6Z x R,
truncated parameter-jet arithmetic, greedy paratangency coding, the
tangency-to-sink perturbation pipeline, and exhaustive coverage / trapping
certificates, with lattice parameter sweeps tying it together.
"""

__version__ = "0.1.0"

from .dynamics import (BumpPerturbation, CircleValue, FamilyHandle,
                       SnapPerturbation, eval_Q, eval_family, from_config,
                       jacobian, make_family, param_jets, push_perturbation)
from .errors import (BlenderlabError, BudgetExceeded, CertificationError,
                     ConvergenceError, DimensionMismatch, DomainError,
                     InconclusiveError, InvariantError, NonHyperbolicError,
                     SeamError, SupportError)
from .hyperbolic import (AdaptedChart, HyperbolicPointData, LocalManifold,
                         PolyGraph, adapted_chart, conjugation_residual,
                         continue_coded_orbit, continue_fixed_point,
                         graph_transform_manifold, inclination_test,
                         invariant_line_field)
from .ifs import (CoverageCertificate, JetPoint, SymbolWord, jet_coverage_certificate,
                  jet_reachable_set, limit_set_cover, y_series)
from .jets import (Jet, SignedPolynomial, d_prime, eval_P_delta, identity_jets,
                   jet_add, jet_compose_scalar, jet_mul, multi_indices)
from .paratangency import (GreedyTrace, MinJet, ParabolaFamily, constant_parabola,
                           eta_jet, greedy_code, greedy_step, min_gamma_jet,
                           parabola_preimage, paratangency_verdict)
from .sinks import (SinkRecord, TangencyData, TrappingCertificate,
                    build_sink_pipeline, detect_sinks, dissipation_check,
                    flatten_perturbation, quasi_snap_perturbation,
                    sink_translation_perturbation, tangency_normal_form,
                    trapping_box_check)
from .sweep import (SweepConfig, SweepReport, emit_plots, export_report,
                    import_report, lattice_points, run_sweep)

__all__ = [n for n in dir() if not n.startswith("_")]
