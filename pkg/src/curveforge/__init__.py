"""Noise-robust single-qubit gate design via Bezier space curves.

A qubit evolution maps to a space curve: the drive envelope is the signed
curvature, the drive phase integrates the torsion, and time is arclength.
Closure of the curve gives first-order dephasing robustness; vanishing
tangent-sphere area gives drive-amplitude robustness.  This package fixes a
target gate exactly through endpoint constraints on a Bezier curve, then
optimizes the interior control points for robustness, extracts laboratory
control fields, and verifies the result by brute-force propagation.
"""

from .bezier import (ControlPointSet, bernstein_basis, bezier_eval,
                     derivatives_on_grid, load_curve, save_curve)
from .errors import (CurveForgeError, DegenerateFrameError, DomainError,
                     EvaluationError, FrameUndefinedError, NumericalError,
                     PreconditionError, RegularityError, ValidationError)
from .frenet import (FrenetData, evaluate_frenet, robustness_measures,
                     uniform_time_grid)
from .gatemap import (ControlFields, GateTarget, adjoint_of_su2,
                      extract_controls, final_adjoint, gate_fidelity_adjoint,
                      gate_fidelity_su2, load_pulse, predicted_adjoint,
                      save_pulse, ttc_detuning)
from .barq import (BarqConfig, BarqParameters, build_control_points,
                   init_parameters, load_design, save_design,
                   verify_gate_encoding)
from .optimize import (AdamParams, LossSpec, OptimizationTrace, gradient,
                       run_adam, total_loss)
from .bench import (ColoredNoise, StaticNoise, cfi, cfi_infidelity,
                    filter_function, generate_colored_noise, mc_infidelity,
                    overlap_infidelity, propagate, static_sweep)
from .kernels import backend_name

__version__ = "0.1.0"

__all__ = [
    "AdamParams", "BarqConfig", "BarqParameters", "ColoredNoise",
    "ControlFields", "ControlPointSet", "CurveForgeError",
    "DegenerateFrameError", "DomainError", "EvaluationError", "FrenetData",
    "FrameUndefinedError", "GateTarget", "LossSpec", "NumericalError",
    "OptimizationTrace", "PreconditionError", "RegularityError",
    "StaticNoise", "ValidationError", "adjoint_of_su2", "backend_name",
    "bernstein_basis", "bezier_eval", "build_control_points", "cfi",
    "cfi_infidelity", "derivatives_on_grid", "evaluate_frenet",
    "extract_controls", "filter_function", "final_adjoint",
    "gate_fidelity_adjoint", "gate_fidelity_su2", "generate_colored_noise",
    "gradient", "init_parameters", "load_curve", "load_design", "load_pulse",
    "mc_infidelity", "overlap_infidelity", "predicted_adjoint", "propagate",
    "robustness_measures", "run_adam", "save_curve", "save_design",
    "save_pulse", "static_sweep", "total_loss", "ttc_detuning",
    "uniform_time_grid", "verify_gate_encoding",
]
