"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 runtime failure, 4 audit failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import BenchmarkPreset, get_preset
from .config import RunSpec, apply_overrides, parse_config, render_config
from .diagnostics import cross_section, fuzz_audit, write_diagnostics_csv
from .engine import integrate
from .errors import ConfigError, IoError, ViscoSWError
from .io import emit_plot_script, read_fields_csv, write_fields, write_profile
from .rheology import ModelKind
from .state import PhysParams

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_AUDIT = 0, 2, 3, 4


def preset_for(spec: RunSpec) -> BenchmarkPreset:
    """Benchmark preset configured by a run spec."""
    extra = {"regularized": spec.regularized_lid} if spec.case == "cavity" else {}
    base = get_preset(spec.case, **extra)
    return replace(base, nx=spec.nx, ny=spec.ny, Lx=spec.Lx, Ly=spec.Ly, t_end=spec.t_end,
                   model=spec.model, params=spec.params)


def spec_for_preset(name: str) -> RunSpec:
    """Run spec reproducing a preset's defaults."""
    p = get_preset(name)
    return RunSpec(model=p.model, case=p.name, nx=p.nx, ny=p.ny, Lx=p.Lx, Ly=p.Ly, params=p.params,
                   t_end=p.t_end, sections=("diagonal",) if p.name != "cavity" else ("x=0.5", "y=0.5"))


def _section_line(name: str):
    if name == "diagonal":
        return "diagonal"
    return (name[0], float(name[2:]))


def _plot_quantities(name: str) -> list[str]:
    return ["h", "un", "cnn", "czz"] if name == "diagonal" else ["u", "v", "cxx", "cyy", "czz"]


def execute(spec: RunSpec, out_dir: str | Path | None = None, log=print) -> dict:
    """Run a spec and write every requested output.

    Returns:
        Summary with the final time, step count and output paths.
    """
    out = Path(out_dir or spec.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.ini").write_text(render_config(spec))
    except OSError as exc:
        raise IoError(f"cannot prepare {out}: {exc}") from exc
    preset = preset_for(spec)
    mesh = preset.mesh()
    field_formats = [f for f in spec.formats if f in ("csv", "vtk")]
    written: list[str] = []

    def dump(state, tag):
        for fmt in field_formats:
            path = out / f"fields_{tag}.{fmt}"
            write_fields(state, mesh, fmt, path, spec.params, spec.model)
            written.append(str(path))

    def callback(state, _diag):
        if spec.every and state.n % spec.every == 0:
            dump(state, f"{state.n:06d}")

    state, diags = integrate(preset.initial_state(), mesh, preset.bc, spec.params, spec.model,
                             spec.t_end, cfl=spec.cfl, callback=callback)
    dump(state, "final")
    write_diagnostics_csv(diags, out / "diagnostics.csv")
    written.append(str(out / "diagnostics.csv"))
    for name in spec.sections:
        prof = cross_section(state.q, mesh, _section_line(name))
        path = out / f"section_{name.replace('=', '')}.csv"
        write_profile(prof, path)
        written.append(str(path))
        if "gnuplot" in spec.formats:
            script = out / f"section_{name.replace('=', '')}.gp"
            emit_plot_script([(name, path)], _plot_quantities(name), script)
            written.append(str(script))
    failed = sum(d.failed_faces for d in diags)
    total = sum(d.total_faces for d in diags)
    log(f"t={state.t:.6g} steps={state.n} fail-soft faces={failed}/{total} "
        f"max entropy residual={max((d.max_residual for d in diags), default=0.0):.3e}")
    return {"t": state.t, "steps": state.n, "files": written, "failed_faces": failed, "total_faces": total}


def _cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(f"cannot read {args.config}: {exc}") from exc
    spec = parse_config(text)
    if args.override:
        spec = apply_overrides(spec, args.override)
    execute(spec, args.out)
    return EXIT_OK


def _cmd_bench(args) -> int:
    try:
        spec = spec_for_preset(args.preset)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if args.override:
        spec = apply_overrides(spec, args.override)
    execute(spec, args.out or f"out_{args.preset}")
    return EXIT_OK


def _cmd_audit(args) -> int:
    ok = True
    models = list(ModelKind) if args.model == "both" else [ModelKind.parse(args.model)]
    for model in models:
        for G in args.G:
            rep = fuzz_audit(args.fuzz, args.seed, model, PhysParams(G=G))
            status = "PASS" if rep.passed(args.tol) else "FAIL"
            print(f"{status} model={model.value} G={G:g} pairs={rep.pairs} max_residual={rep.max_residual:.3e} "
                  f"entropy_failures={rep.entropy_failures} inadmissible={rep.inadmissible} decoupled={rep.decoupled}")
            ok &= rep.passed(args.tol)
    return EXIT_OK if ok else EXIT_AUDIT


def _norm(a: np.ndarray, kind: str) -> float:
    if kind == "l1":
        return float(np.sum(np.abs(a)))
    if kind == "l2":
        return float(np.sqrt(np.sum(a * a)))
    return float(np.max(np.abs(a))) if a.size else 0.0


def _cmd_compare(args) -> int:
    a = read_fields_csv(args.a)
    b = read_fields_csv(args.b)
    names = [k for k in a if k in b and k not in ("x", "y", "s")]
    if args.fields:
        names = [k for k in args.fields.split(",") if k]
        missing = [k for k in names if k not in a or k not in b]
        if missing:
            raise ConfigError(f"columns {missing} missing from one of the files")
    n_a, n_b = len(next(iter(a.values()))), len(next(iter(b.values())))
    if n_a != n_b:
        raise IoError(f"row counts differ: {n_a} vs {n_b}")
    for k in names:
        diff = _norm(a[k] - b[k], args.norm)
        ref = _norm(b[k], args.norm)
        rel = diff / ref if ref > 0 else diff
        print(f"{k} {args.norm} abs={diff:.6e} rel={rel:.6e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="viscosw", description="Viscoelastic shallow-water finite volumes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a configuration file")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("bench", help="run a benchmark preset")
    p.add_argument("preset", help="stoker, column or cavity")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("audit", help="fuzz the Riemann solver against its invariants")
    p.add_argument("--fuzz", type=int, default=10000, help="number of random pairs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--model", default="both", choices=["both", "svtm", "svucm"])
    p.add_argument("--G", type=float, nargs="+", default=[10.0])
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=_cmd_audit)

    p = sub.add_parser("compare", help="norm of the difference of two CSV outputs")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--norm", choices=["l1", "l2", "linf"], default="l1")
    p.add_argument("--fields", help="comma-separated columns (default: all shared)")
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ViscoSWError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
