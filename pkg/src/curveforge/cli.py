"""Configuration-driven command line for designing and checking pulses.

Commands: design, pulse, frame, bench-static, bench-dynamic, filterfn, cfi.
Parameters come from an optional JSON config document; command-line flags
override config fields.  Every run writes a manifest (resolved parameters,
their hash, seed, versions) next to its outputs so it can be replayed.

Exit codes: 0 success, 2 invalid input (the diagnostic names the offending
field), 3 numerical failure (for aborted optimizations the diagnostic
includes the trace path).
"""

import argparse
import hashlib
import os
import platform
import sys

import numpy as np

from . import barq, bench, frenet, gatemap, kernels, optimize
from .bezier import ControlPointSet, load_curve, save_curve
from .errors import EvaluationError, NumericalError, ValidationError
from ._jsonio import dump_json, dumps_json, load_json, write_csv

try:
    from importlib.metadata import version as _dist_version
    _VERSION = _dist_version("curveforge")
except Exception:  # pragma: no cover - not installed
    _VERSION = "unknown"


# ---------------------------------------------------------------------------
# config / flag resolution

class _Picker:
    """Flag-over-config resolution that records every resolved value."""

    def __init__(self, args, config):
        self.args = args
        self.config = config
        self.resolved = {}

    def get(self, key, default=None, required=False):
        value = getattr(self.args, key, None)
        if value is None:
            value = self.config.get(key, default)
        if value is None and required:
            raise ValidationError(f"{key}: required (flag or config field)")
        self.resolved[key] = value
        return value


def _load_config(path):
    if path is None:
        return {}
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise ValidationError("config: top level must be a JSON object")
    return doc


def _resolve_gate(pick):
    unitary = pick.get("unitary")
    name = pick.get("gate")
    if unitary is not None:
        reals = np.asarray(unitary, dtype=float)
        if reals.shape != (8,):
            raise ValidationError(
                "unitary: expected 8 reals (row-major re/im pairs)")
        u = (reals[0::2] + 1.0j * reals[1::2]).reshape(2, 2)
        return gatemap.GateTarget.from_matrix(u)
    if name is not None:
        return gatemap.GateTarget.from_name(str(name))
    raise ValidationError("gate: missing (provide --gate or --unitary)")


def _out_paths(pick, default_tag):
    out_dir = str(pick.get("out", "."))
    tag = str(pick.get("tag", default_tag))
    os.makedirs(out_dir, exist_ok=True)
    return lambda suffix: os.path.join(out_dir, tag + suffix)


def _write_manifest(path_for, command, pick, outputs):
    resolved = {k: pick.resolved[k] for k in sorted(pick.resolved)}
    digest = hashlib.sha256(
        dumps_json(resolved).encode("utf-8")).hexdigest()
    manifest = {
        "command": command,
        "parameters": resolved,
        "config_hash": digest,
        "seed": pick.resolved.get("seed"),
        "versions": {
            "curveforge": _VERSION,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "kernel_backend": kernels.backend_name(),
        },
        "outputs": [os.path.basename(p) for p in outputs],
    }
    path = path_for(f".{command}.manifest.json")
    dump_json(manifest, path)
    return path


# ---------------------------------------------------------------------------
# shared input loading

def _stem(path):
    base = os.path.basename(path)
    return base.split(".")[0] if "." in base else base


def _load_design_source(pick):
    """-> (config, params, points, theta_B, tag)."""
    design_path = pick.get("design", required=True)
    config, params = barq.load_design(design_path)
    if params is None:
        params = barq.init_parameters(config)
    points = barq.build_control_points(params, config)
    theta = barq.effective_theta_b(config, params)
    return config, params, points, theta, _stem(design_path)


def _load_curve_source(pick):
    """Accept --design or --curve; -> (points, theta_B or None, tag)."""
    if getattr(pick.args, "design", None) or "design" in pick.config:
        config, params, points, theta, tag = _load_design_source(pick)
        return points, theta, tag
    curve_path = pick.get("curve", required=True)
    arr, meta = load_curve(curve_path)
    theta = pick.get("theta_b")
    if theta is None and isinstance(meta, dict):
        theta = meta.get("theta_B")
    return (ControlPointSet(arr),
            None if theta is None else float(theta), _stem(curve_path))


def _load_fields_source(pick, default_mode="ttc"):
    """Accept --pulse, --design, or --curve; -> (fields, target, tag)."""
    if getattr(pick.args, "pulse", None) or "pulse" in pick.config:
        pulse_path = pick.get("pulse", required=True)
        return gatemap.load_pulse(pulse_path), None, _stem(pulse_path)
    target = None
    if getattr(pick.args, "design", None) or "design" in pick.config:
        config, params, points, theta, tag = _load_design_source(pick)
        target = config.target
    else:
        points, theta, tag = _load_curve_source(pick)
    mode = str(pick.get("mode", default_mode))
    grid = int(pick.get("grid", frenet.DEFAULT_GRID))
    samples = int(pick.get("samples", 2049))
    fd = frenet.evaluate_frenet(points, grid_size=grid)
    fields = gatemap.extract_controls(fd, mode=mode, theta_B=theta,
                                      n_samples=samples)
    return fields, target, tag


# ---------------------------------------------------------------------------
# commands

def cmd_design(args):
    pick = _Picker(args, _load_config(args.config))
    target = _resolve_gate(pick)
    config = barq.BarqConfig(
        target=target,
        n_free=int(pick.get("n_free", 10)),
        theta_B=float(pick.get("theta_b", 0.0)),
        nu=float(pick.get("nu", 0.25)),
        pgf_kind=str(pick.get("pgf_kind", "symmetric")),
        lambda_overrides=dict(pick.get("lambda_overrides", {}) or {}),
        optimize_theta_B=bool(pick.get("optimize_theta_b", False)),
        seed=int(pick.get("seed", 0, required=True)))
    steps = int(pick.get("steps", 5000))
    path_for = _out_paths(pick, target.name)
    params = barq.init_parameters(config)
    outputs = []

    if steps > 0:
        spec = optimize.LossSpec.default(
            rabi_weight=float(pick.get("rabi_weight",
                                       optimize.DEFAULT_RABI_WEIGHT)))
        spec = optimize.LossSpec(
            terms=spec.terms,
            grid_size=int(pick.get("opt_grid", optimize.OPT_GRID)),
            smooth_max=not bool(pick.get("exact_max", False)))
        hyper = optimize.AdamParams(lr=float(pick.get("lr", 5e-3)))
        stride = pick.get("trace_stride")
        trace = optimize.run_adam(config, params, spec, steps=steps,
                                  hyper=hyper,
                                  trace_stride=None if stride is None
                                  else int(stride))
        trace_path = path_for(".trace.csv")
        trace.to_csv(trace_path)
        outputs.append(trace_path)
        if trace.aborted:
            raise EvaluationError(
                f"optimization aborted at step {trace.abort_step}; "
                f"trace written to {trace_path}")
        params = trace.final_params

    points = barq.build_control_points(params, config)
    theta = barq.effective_theta_b(config, params)
    residual = barq.verify_gate_encoding(points, config, theta_B=theta)
    design_path = path_for(".design.json")
    barq.save_design(design_path, config, params)
    curve_path = path_for(".curve.json")
    save_curve(curve_path, points,
               metadata={"gate": target.name, "theta_B": theta})
    outputs += [design_path, curve_path]
    manifest = _write_manifest(path_for, "design", pick, outputs)
    print(f"design: {design_path} (gate residual {residual:.3e}, "
          f"manifest {os.path.basename(manifest)})")
    return 0


def cmd_pulse(args):
    pick = _Picker(args, _load_config(args.config))
    points, theta, tag = _load_curve_source(pick)
    mode = str(pick.get("mode", "ttc"))
    grid = int(pick.get("grid", frenet.DEFAULT_GRID))
    samples = int(pick.get("samples", 2049))
    nonneg = bool(pick.get("nonnegative", False))
    fd = frenet.evaluate_frenet(points, grid_size=grid)
    fields = gatemap.extract_controls(fd, mode=mode, theta_B=theta,
                                      n_samples=samples,
                                      nonnegative_envelope=nonneg)
    path_for = _out_paths(pick, tag)
    pulse_path = path_for(".pulse.csv")
    gatemap.save_pulse(pulse_path, fields)
    manifest = _write_manifest(path_for, "pulse", pick,
                               [pulse_path, pulse_path + ".json"])
    print(f"pulse: {pulse_path} (mode {fields.mode}, T_g "
          f"{fields.T_g:.6g}, manifest {os.path.basename(manifest)})")
    return 0


def cmd_frame(args):
    pick = _Picker(args, _load_config(args.config))
    points, _, tag = _load_curve_source(pick)
    grid = int(pick.get("grid", frenet.DEFAULT_GRID))
    fd = frenet.evaluate_frenet(points, grid_size=grid)
    path_for = _out_paths(pick, tag)
    frame_path = path_for(".frame.csv")
    write_csv(frame_path, frenet.FRENET_CSV_HEADER,
              frenet.frenet_columns(fd))
    scalars_path = path_for(".frame.json")
    scalars = frenet.frenet_scalars(fd)
    meas = frenet.robustness_measures(fd)
    scalars["closure_gap"] = meas.closure_gap
    scalars["tangent_area"] = meas.tangent_area
    dump_json(scalars, scalars_path)
    manifest = _write_manifest(path_for, "frame", pick,
                               [frame_path, scalars_path])
    print(f"frame: {frame_path} (M={fd.M}, "
          f"manifest {os.path.basename(manifest)})")
    return 0


def cmd_bench_static(args):
    pick = _Picker(args, _load_config(args.config))
    fields, target, tag = _load_fields_source(pick)
    reference = str(pick.get("reference", "target"))
    if target is None and (getattr(args, "gate", None) is not None
                           or getattr(args, "unitary", None) is not None
                           or "gate" in pick.config
                           or "unitary" in pick.config):
        target = _resolve_gate(pick)
    if reference == "target" and target is None:
        raise ValidationError(
            "gate: required for reference 'target' (or use --reference "
            "noise_free)")
    n_steps = int(pick.get("steps", bench.DEFAULT_STEPS))
    eps_max = float(pick.get("eps_max", 0.1))
    eps_points = int(pick.get("eps_points", 41))
    dz_max = float(pick.get("dz_max", 0.5))
    dz_points = int(pick.get("dz_points", 41))
    result = bench.static_sweep(
        fields,
        None if target is None else target.unitary,
        epsilons=np.linspace(-eps_max, eps_max, eps_points),
        delta_zs=np.linspace(-dz_max, dz_max, dz_points) / fields.T_g,
        n_steps=n_steps, reference=reference)
    path_for = _out_paths(pick, tag)
    sweep_path = path_for(".sweep.csv")
    bench.sweep_to_csv(sweep_path, result)
    manifest = _write_manifest(path_for, "bench-static", pick, [sweep_path])
    center = result.infidelity[eps_points // 2, dz_points // 2]
    print(f"bench-static: {sweep_path} (center infidelity {center:.3e}, "
          f"manifest {os.path.basename(manifest)})")
    return 0


def cmd_bench_dynamic(args):
    pick = _Picker(args, _load_config(args.config))
    fields, target, tag = _load_fields_source(pick)
    alpha = int(pick.get("alpha", required=True))
    lam = pick.get("lam")
    tg_lam = pick.get("tg_lam")
    if (lam is None) == (tg_lam is None):
        raise ValidationError("lam: provide exactly one of lam / tg_lam")
    lam = float(lam) if lam is not None else float(tg_lam) / fields.T_g
    n = int(pick.get("n", 256))
    seed = pick.get("seed", required=True)
    n_steps = int(pick.get("steps", bench.DEFAULT_STEPS))
    reference = str(pick.get("reference", "noise_free"))
    result = bench.mc_infidelity(
        fields, bench.ColoredNoise(alpha=alpha, lam=lam), n, int(seed),
        n_steps=n_steps, reference=reference,
        target_unitary=None if target is None else target.unitary)
    path_for = _out_paths(pick, tag)
    mc_path = path_for(".mc.json")
    bench.mc_to_json(mc_path, result)
    manifest = _write_manifest(path_for, "bench-dynamic", pick, [mc_path])
    print(f"bench-dynamic: {mc_path} (mean {result.mean:.4e} "
          f"+- {result.stderr:.1e}, manifest {os.path.basename(manifest)})")
    return 0


def cmd_filterfn(args):
    pick = _Picker(args, _load_config(args.config))
    if getattr(args, "pulse", None) or "pulse" in pick.config:
        source, _, tag = _load_fields_source(pick)
        t_g = source.T_g
    else:
        points, _, tag = _load_curve_source(pick)
        grid = int(pick.get("grid", frenet.DEFAULT_GRID))
        source = frenet.evaluate_frenet(points, grid_size=grid)
        t_g = source.T_g
    n_points = int(pick.get("points", 1024))
    lo = float(pick.get("lo", 1e-3))
    hi = float(pick.get("hi", 200.0))
    n_time = int(pick.get("time_grid", 2049))
    omega = bench.default_omega_grid(t_g, n=n_points, lo=lo, hi=hi)
    f_vals = bench.filter_function(source, omega, n_time=n_time)
    path_for = _out_paths(pick, tag)
    filter_path = path_for(".filter.csv")
    bench.filter_to_csv(filter_path, omega, f_vals)
    manifest = _write_manifest(path_for, "filterfn", pick, [filter_path])
    print(f"filterfn: {filter_path} ({n_points} frequencies, "
          f"manifest {os.path.basename(manifest)})")
    return 0


def cmd_cfi(args):
    pick = _Picker(args, _load_config(args.config))
    points, _, tag = _load_curve_source(pick)
    grid = int(pick.get("grid", frenet.DEFAULT_GRID))
    fd = frenet.evaluate_frenet(points, grid_size=grid)
    value = bench.cfi(fd)
    path_for = _out_paths(pick, tag)
    cfi_path = path_for(".cfi.json")
    dump_json({"cfi": value, "T_g": fd.T_g}, cfi_path)
    manifest = _write_manifest(path_for, "cfi", pick, [cfi_path])
    print(f"cfi: {value:.9e} ({cfi_path}, "
          f"manifest {os.path.basename(manifest)})")
    return 0


# ---------------------------------------------------------------------------
# parser

def _add_common(p):
    p.add_argument("--config", help="JSON config document")
    p.add_argument("--out", help="output directory (default .)")
    p.add_argument("--tag", help="output basename (default from input)")


def _add_gate_flags(p):
    p.add_argument("--gate", help="named gate (identity, x, y, z, hadamard,"
                   " s, t, sqrtx)")
    p.add_argument("--unitary", nargs=8, type=float, metavar="R",
                   help="2x2 unitary as 8 reals, row-major re/im pairs")


def _add_curve_flags(p, pulse=False):
    p.add_argument("--design", help="design JSON from the design command")
    p.add_argument("--curve", help="curve JSON (control points)")
    if pulse:
        p.add_argument("--pulse", help="pulse CSV (with its JSON sidecar)")
    p.add_argument("--theta-b", type=float, dest="theta_b",
                   help="end-frame rotation angle (with --curve)")
    p.add_argument("--grid", type=int, help="frame grid size (default 2049)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="curveforge",
        description="Design and verify noise-robust single-qubit pulses "
                    "via space-curve geometry.")
    parser.add_argument("--version", action="version",
                        version=f"curveforge {_VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="fix a gate and optimize free points")
    _add_common(p)
    _add_gate_flags(p)
    p.add_argument("--n-free", type=int, dest="n_free")
    p.add_argument("--nu", type=float)
    p.add_argument("--theta-b", type=float, dest="theta_b")
    p.add_argument("--pgf-kind", dest="pgf_kind")
    p.add_argument("--optimize-theta-b", action="store_const", const=True,
                   dest="optimize_theta_b")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="Adam steps (0 skips)")
    p.add_argument("--lr", type=float)
    p.add_argument("--rabi-weight", type=float, dest="rabi_weight")
    p.add_argument("--opt-grid", type=int, dest="opt_grid")
    p.add_argument("--exact-max", action="store_const", const=True,
                   dest="exact_max")
    p.add_argument("--trace-stride", type=int, dest="trace_stride")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("pulse", help="extract control fields from a curve")
    _add_common(p)
    _add_curve_flags(p)
    p.add_argument("--mode", choices=("xy", "ttc"))
    p.add_argument("--samples", type=int)
    p.add_argument("--nonnegative", action="store_const", const=True)
    p.set_defaults(func=cmd_pulse)

    p = sub.add_parser("frame", help="tabulate the moving frame of a curve")
    _add_common(p)
    _add_curve_flags(p)
    p.set_defaults(func=cmd_frame)

    p = sub.add_parser("bench-static",
                       help="quasi-static (eps, delta_z) infidelity sweep")
    _add_common(p)
    _add_curve_flags(p, pulse=True)
    _add_gate_flags(p)
    p.add_argument("--mode", choices=("xy", "ttc"))
    p.add_argument("--samples", type=int)
    p.add_argument("--steps", type=int, help="integrator steps")
    p.add_argument("--reference", choices=("target", "noise_free"))
    p.add_argument("--eps-max", type=float, dest="eps_max")
    p.add_argument("--eps-points", type=int, dest="eps_points")
    p.add_argument("--dz-max", type=float, dest="dz_max",
                   help="max |T_g delta_z|")
    p.add_argument("--dz-points", type=int, dest="dz_points")
    p.set_defaults(func=cmd_bench_static)

    p = sub.add_parser("bench-dynamic",
                       help="colored-noise Monte Carlo infidelity")
    _add_common(p)
    _add_curve_flags(p, pulse=True)
    _add_gate_flags(p)
    p.add_argument("--mode", choices=("xy", "ttc"))
    p.add_argument("--samples", type=int)
    p.add_argument("--alpha", type=int, choices=(1, 2))
    p.add_argument("--lam", type=float, help="noise amplitude")
    p.add_argument("--tg-lam", type=float, dest="tg_lam",
                   help="noise amplitude in units of 1/T_g")
    p.add_argument("--n", type=int, help="realizations")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="integrator steps (power of 2)")
    p.add_argument("--reference", choices=("noise_free", "target"))
    p.set_defaults(func=cmd_bench_dynamic)

    p = sub.add_parser("filterfn", help="dephasing filter function table")
    _add_common(p)
    _add_curve_flags(p, pulse=True)
    p.add_argument("--mode", choices=("xy", "ttc"))
    p.add_argument("--samples", type=int)
    p.add_argument("--points", type=int, help="frequency nodes")
    p.add_argument("--lo", type=float, help="min omega / omega_B")
    p.add_argument("--hi", type=float, help="max omega / omega_B")
    p.add_argument("--time-grid", type=int, dest="time_grid")
    p.set_defaults(func=cmd_filterfn)

    p = sub.add_parser("cfi", help="curve filtering index of a closed curve")
    _add_common(p)
    _add_curve_flags(p)
    p.set_defaults(func=cmd_cfi)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
