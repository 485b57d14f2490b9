"""Command-line front end: YAML config in, CSV tables and a text report out.

Usage::

    qpplasmon {spectrum,solve,sweep,design,verify} CONFIG [--set key=value ...]
              [--output-dir DIR] [--threads N]

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure,
4 infeasible design.
"""

import argparse
import csv
import math
import os
import sys

import yaml

from .errors import QPPlasmonError, ValidationError

DEFAULTS = {
    "alpha": [math.pi / 2, math.pi / 3],
    "materials": {"eps_m": 1.0, "mu_m": 1.0},
    "solver": {
        "omega": 0.01, "backend": "ewald", "truncation": 4, "tolerance": 1e-13,
        "eta0": 0.05, "c1": 0.1, "path": "block", "allow_large_omega": False,
    },
    "output": {"spacing": 0.005, "samples": 9, "cross_check": True},
}

COMMANDS = ("spectrum", "solve", "sweep", "design", "verify")


# ---------------------------------------------------------------------------
# configuration


def _merge(base, over):
    out = dict(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def apply_override(cfg, item):
    """Apply one ``dotted.key=value`` override; the value is parsed as YAML."""
    if "=" not in item:
        raise ValidationError(f"--set expects key=value, got {item!r}")
    key, raw = item.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ValidationError(f"--set {key}: {p} is not a block")
    node[parts[-1]] = yaml.safe_load(raw)
    return cfg


def load_config(path, overrides=()):
    """Read the YAML file, apply overrides and fill defaults."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ValidationError(f"config {path} is not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ValidationError(f"config {path}: top level must be a mapping")
    for item in overrides:
        apply_override(raw, item)
    return _merge(DEFAULTS, raw), raw


def _complex(value, name, errors):
    if isinstance(value, (list, tuple)) and len(value) == 2:
        try:
            return complex(float(value[0]), float(value[1]))
        except (TypeError, ValueError):
            pass
    elif isinstance(value, (int, float)):
        return complex(value)
    elif isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            pass
    errors.append(f"{name}: expected a number or [re, im], got {value!r}")
    return None


def _pair(value, name, errors):
    try:
        a, b = (float(v) for v in value)
        return a, b
    except (TypeError, ValueError):
        errors.append(f"{name}: expected a pair of numbers, got {value!r}")
        return None


def validate(cfg, raw, command):
    """Check every precondition; raise one ValidationError listing all problems."""
    errors = []
    geo = raw.get("geometry")
    if not isinstance(geo, dict):
        errors.append("geometry: missing block (kind, center, size, N)")
    else:
        kind = geo.get("kind")
        need = {"circle": ["radius"], "ellipse": ["semi_axes"], "star": ["base_radius", "amplitude", "lobes"]}
        if kind not in need:
            errors.append(f"geometry.kind: expected circle, ellipse or star, got {kind!r}")
        else:
            for key in need[kind]:
                if key not in geo:
                    errors.append(f"geometry.{key}: required for kind {kind}")
        n = geo.get("N", 128)
        if not isinstance(n, int) or n < 16 or n % 2:
            errors.append(f"geometry.N: expected an even integer >= 16, got {n!r}")
        elif kind in need and all(key in geo for key in need[kind]):
            from .geometry import make_curve
            from .potentials import check_source
            try:
                curve = make_curve(geo)
            except (QPPlasmonError, TypeError, ValueError) as exc:
                errors.append(f"geometry: {exc}")
            else:
                src = raw.get("source")
                if command in ("solve", "sweep", "design") and isinstance(src, dict):
                    try:
                        check_source(curve, [float(v) for v in src.get("z")])
                    except (QPPlasmonError, TypeError, ValueError) as exc:
                        errors.append(f"source.z: {exc}")
    alpha = _pair(cfg["alpha"], "alpha", errors)
    if alpha is not None:
        for i, a in enumerate(alpha):
            if not 0 < a < 2 * math.pi:
                errors.append(f"alpha[{i}]: must lie in (0, 2 pi), got {a}")
    mat = cfg["materials"]
    for key in ("eps_m", "mu_m"):
        v = mat.get(key)
        if not isinstance(v, (int, float)) or v <= 0:
            errors.append(f"materials.{key}: expected a positive real, got {v!r}")
    if command in ("solve", "sweep", "design"):
        drude = mat.get("drude")
        if command == "solve" and drude is None:
            for key in ("eps_c", "mu_c"):
                if key not in mat:
                    errors.append(f"materials.{key}: required (or give materials.drude)")
                else:
                    _complex(mat[key], f"materials.{key}", errors)
        if drude is not None:
            if not isinstance(drude, dict):
                errors.append("materials.drude: expected a block")
            else:
                ds = raw.get("design")
                auto = command == "design" and isinstance(ds, dict) and "frequency_margin" in ds
                for key in ("F",) if auto else ("F", "omega0"):
                    if key not in drude:
                        errors.append(f"materials.drude.{key}: required")
        src = raw.get("source")
        if not isinstance(src, dict):
            errors.append("source: missing block (a, z)")
        else:
            _pair(src.get("a"), "source.a", errors)
            _pair(src.get("z"), "source.z", errors)
    solver = cfg["solver"]
    omega = solver.get("omega")
    if not isinstance(omega, (int, float)) or omega <= 0:
        errors.append(f"solver.omega: expected a positive real, got {omega!r}")
    elif omega > 0.1 and not solver.get("allow_large_omega"):
        errors.append(f"solver.omega: {omega} exceeds the quasi-static limit 0.1 (set solver.allow_large_omega)")
    if solver.get("backend") not in ("ewald", "spectral", "spatial"):
        errors.append(f"solver.backend: expected ewald, spectral or spatial, got {solver.get('backend')!r}")
    if solver.get("path") not in ("block", "reduced"):
        errors.append(f"solver.path: expected block or reduced, got {solver.get('path')!r}")
    for key in ("eta0", "c1", "tolerance"):
        v = solver.get(key)
        if not isinstance(v, (int, float)) or v <= 0:
            errors.append(f"solver.{key}: expected a positive real, got {v!r}")
    if command == "sweep":
        sw = raw.get("sweep")
        if not isinstance(sw, dict):
            errors.append("sweep: missing block (axis, grid, target_mode)")
        else:
            if sw.get("axis") not in ("delta", "tau", "F"):
                errors.append(f"sweep.axis: expected delta, tau or F, got {sw.get('axis')!r}")
            grid = sw.get("grid")
            if not isinstance(grid, list) or not grid or not all(isinstance(g, (int, float)) and g > 0 for g in grid):
                errors.append("sweep.grid: expected a non-empty list of positive numbers")
            if sw.get("axis") in ("tau", "F") and not isinstance(mat.get("drude"), dict):
                errors.append("materials.drude: required for tau and F sweeps")
    if command == "design":
        ds = raw.get("design")
        if not isinstance(ds, dict):
            errors.append("design: missing block (target_mode, free_parameter)")
        elif ds.get("free_parameter", "tau") not in ("tau", "F"):
            errors.append(f"design.free_parameter: expected tau or F, got {ds.get('free_parameter')!r}")
        if not isinstance(mat.get("drude"), dict):
            errors.append("materials.drude: required for design")
    if errors:
        raise ValidationError("invalid configuration:\n  " + "\n  ".join(errors))


# ---------------------------------------------------------------------------
# output helpers


def fmt(x):
    """17 significant digits, so values round-trip exactly."""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else fmt(v) for v in row])


def write_report(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# shared setup


class _Context:
    def __init__(self, cfg, raw):
        import numpy as np

        from .geometry import make_curve
        from .quasi_green import SummationConfig

        self.cfg = cfg
        self.raw = raw
        self.alpha = tuple(float(a) for a in cfg["alpha"])
        geo = dict(raw["geometry"])
        self.curve = make_curve(geo)
        s = cfg["solver"]
        self.sum_cfg = SummationConfig(backend=s["backend"], truncation_radius=int(s["truncation"]),
                                       tolerance=float(s["tolerance"]))
        self.omega = float(s["omega"])
        self.np = np

    def decomposition(self):
        from .spectrum import decompose
        return decompose(self.alpha, self.curve, self.sum_cfg)

    def source(self):
        from .resonance import SourceDipole
        src = self.raw["source"]
        return SourceDipole(tuple(src["a"]), tuple(src["z"]))

    def background(self):
        from .materials import quiet_materials
        m = self.cfg["materials"]
        return quiet_materials(m["eps_m"], m["mu_m"], -1.0 + 0j, -2.0 + 0j)

    def eps_c(self):
        m = self.cfg["materials"]
        return _complex(m.get("eps_c", [-1.0, 0.0]), "materials.eps_c", [])

    def drude(self):
        from .drude import DrudeParams
        d = self.cfg["materials"]["drude"]
        return DrudeParams(F=float(d["F"]), tau=float(d.get("tau", 1.0)), omega0=float(d.get("omega0", 1.0)),
                           mu0=float(d.get("mu0", 1.0)))

    def materials(self):
        from .drude import drude_mu
        from .materials import MaterialParams
        m = self.cfg["materials"]
        if "drude" in m and "mu_c" not in m:
            mu_c = drude_mu(self.drude(), self.omega).mu
        else:
            mu_c = _complex(m["mu_c"], "materials.mu_c", [])
        return MaterialParams(m["eps_m"], m["mu_m"], self.eps_c(), mu_c)


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(ctx, out):
    dec = ctx.decomposition()
    rows = [(j, float(l), bool(j < dec.trusted)) for j, l in enumerate(dec.eigenvalues)]
    write_csv(os.path.join(out, "spectrum.csv"), ["j", "lambda", "trusted"], rows)
    d = dec.diagnostics
    write_report(os.path.join(out, "spectrum_report.txt"), [
        f"nodes {ctx.curve.n}",
        f"trusted {dec.trusted}",
        f"half_deviation {fmt(d['half_deviation'])}",
        f"self_adjoint_residual {fmt(d['self_adjoint'])}",
        f"max_imag {fmt(d['max_imag'])}",
        f"gram_min {fmt(d['gram_min'])}",
        f"single_layer_condition {fmt(d['single_layer_condition'])}",
    ])
    return 0


def _sample_points(curve, n):
    import numpy as np
    t = (np.arange(n) + 0.5) / n
    X, Y = np.meshgrid(t, t, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    d = curve.distance(pts)
    return pts, d


def cmd_solve(ctx, out):
    import numpy as np

    from .potentials import _shift_into_cell
    from .resonance import energy_cross_check, near_field, near_field_energy, resonance_report, solve_densities

    mat = ctx.materials()
    src = ctx.source()
    s = ctx.cfg["solver"]
    o = ctx.cfg["output"]
    sol = solve_densities(ctx.alpha, ctx.omega, mat, ctx.curve, src, cfg=ctx.sum_cfg, path=s["path"],
                          allow_large_omega=bool(s["allow_large_omega"]))
    pts, d = _sample_points(ctx.curve, int(o["samples"]))
    limit = 2.0 * ctx.curve.node_spacing
    rows = []
    zero = not np.any(src.a)
    for p, dist in zip(pts, d):
        if dist < limit:
            rows.append((p[0], p[1], float("nan"), float("nan"), "boundary"))
            continue
        zin, _ = _shift_into_cell(ctx.curve, p[None, :])
        region = "interior" if ctx.curve.contains(zin)[0] else "exterior"
        if zero:
            u = 0j
        else:
            u = near_field(sol, p, cfg=ctx.sum_cfg)
        rows.append((p[0], p[1], u.real, u.imag, region))
    write_csv(os.path.join(out, "near_field.csv"), ["x", "y", "re_u", "im_u", "region"], rows)
    if o.get("cross_check", True):
        energy, interior, disc = energy_cross_check(sol, ctx.sum_cfg, float(o["spacing"]))
    else:
        energy = near_field_energy(sol.phi, sol.alpha, mat.k_c(ctx.omega), ctx.curve, ctx.sum_cfg,
                                   spacing=float(o["spacing"]))
        interior, disc = float("nan"), float("nan")
    write_csv(os.path.join(out, "energy.csv"),
              ["omega", "energy", "interior_energy", "discrepancy", "residual", "condition"],
              [(ctx.omega, energy, interior, disc, sol.residual, sol.condition)])
    dec = ctx.decomposition()
    rep = resonance_report(dec, mat)
    write_csv(os.path.join(out, "resonance.csv"), ["j", "lambda", "contrast_gap", "abs_tau"], rep)
    return 0


def cmd_sweep(ctx, out):
    import numpy as np

    from .drude import TAU_BRACKET, loglog_slope, sweep_blowup
    from .materials import quiet_materials
    from .resonance import contrast_from_lambda, energy_cross_check, solve_densities

    sw = ctx.raw["sweep"]
    axis = sw["axis"]
    grid = [float(g) for g in sw["grid"]]
    j = int(sw.get("target_mode", 1))
    dec = ctx.decomposition()
    if not 0 < j < dec.trusted:
        raise ValidationError(f"sweep.target_mode {j} is outside the trusted range 1..{dec.trusted - 1}")
    lam_j = float(dec.eigenvalues[j])
    bg = ctx.background()
    src = ctx.source()
    c1 = float(ctx.cfg["solver"]["c1"])
    spacing = float(ctx.cfg["output"]["spacing"])
    rows = []
    if axis == "delta":
        sigma = 1.0 / (bg.mu_m * contrast_from_lambda(lam_j)) + float(sw.get("sigma_offset", 0.0))
        inc_x, inc_y = [], []
        for dval in grid:
            mu_c = 1.0 / complex(sigma, -dval)
            mat = quiet_materials(bg.eps_m, bg.mu_m, ctx.eps_c(), mu_c)
            sol = solve_densities(ctx.alpha, ctx.omega, mat, ctx.curve, src, cfg=ctx.sum_cfg)
            e, _, disc = energy_cross_check(sol, ctx.sum_cfg, spacing)
            ok = ctx.omega / dval <= c1 and disc <= 0.05
            rows.append((dval, sigma, -dval, mu_c.real, mu_c.imag, e, disc, ok))
            if ok:
                inc_x.append(dval)
                inc_y.append(e)
        write_csv(os.path.join(out, "sweep.csv"),
                  ["abs_delta", "sigma", "delta", "re_mu_c", "im_mu_c", "energy", "discrepancy", "included"], rows)
        fit = loglog_slope(inc_x, inc_y) if len(inc_x) >= 3 else None
    else:
        base = ctx.drude()
        br = tuple(float(b) for b in sw.get("bracket", TAU_BRACKET))
        res = sweep_blowup(lam_j, bg, base, ctx.curve, src, ctx.alpha, ctx.omega, axis, grid,
                           eps_c=ctx.eps_c(), c1=c1, cfg=ctx.sum_cfg, spacing=spacing, tau_bracket=br)
        for r in res.rows:
            rows.append((r.value, r.tau, r.F, r.mu_c.real, r.mu_c.imag, r.sigma, r.delta, r.energy, r.included))
        write_csv(os.path.join(out, "sweep.csv"),
                  ["value", "tau", "F", "re_mu_c", "im_mu_c", "sigma", "delta", "energy", "included"], rows)
        fit = (res.slope, res.intercept) if res.fitted else None
    lines = [f"axis {axis}", f"target_mode {j}", f"lambda_j {fmt(lam_j)}", f"points {len(grid)}"]
    if fit is None:
        lines.append("fit none (fewer than three valid points)")
        write_report(os.path.join(out, "sweep_report.txt"), lines)
        return 3 if len(grid) > 1 else 0
    lines.append(f"slope {fmt(fit[0])}")
    write_report(os.path.join(out, "sweep_report.txt"), lines)
    return 0


def cmd_design(ctx, out):
    from dataclasses import replace

    from .drude import (TAU_BRACKET, design_filling_factor, design_frequency_scale,
                        design_relaxation_rate, drude_mu)
    from .materials import quiet_materials
    from .resonance import near_field_energy, solve_densities

    ds = ctx.raw["design"]
    j = int(ds.get("target_mode", 1))
    free = ds.get("free_parameter", "tau")
    # off-design comparison point: tau -> 10 tau*, F -> F* / 10
    factor = float(ds.get("detune_factor", 10.0 if free == "tau" else 0.1))
    dec = ctx.decomposition()
    if not 0 < j < dec.trusted:
        raise ValidationError(f"design.target_mode {j} is outside the trusted range 1..{dec.trusted - 1}")
    lam_j = float(dec.eigenvalues[j])
    bg = ctx.background()
    base = ctx.drude()
    if "frequency_margin" in ds:
        w0 = design_frequency_scale(lam_j, bg.mu_m, base.F, ctx.omega, base.mu0,
                                    margin=float(ds["frequency_margin"]))
        base = replace(base, omega0=w0)
    if free == "tau":
        br = tuple(float(b) for b in ds.get("bracket", TAU_BRACKET))
        res = design_relaxation_rate(lam_j, bg.mu_m, base.F, ctx.omega, base.omega0, base.mu0, bracket=br)
        designed = replace(base, tau=res.value)
        detuned = replace(base, tau=factor * res.value)
    else:
        res = design_filling_factor(lam_j, bg.mu_m, base.tau, ctx.omega, base.omega0, base.mu0)
        designed = replace(base, F=res.value)
        if not 0 < factor * res.value < 1:
            raise ValidationError(f"design.detune_factor {factor} takes F outside (0, 1)")
        detuned = replace(base, F=factor * res.value)
    energies = []
    spacing = float(ctx.cfg["output"]["spacing"])
    for p in (designed, detuned):
        mu = drude_mu(p, ctx.omega).mu
        mat = quiet_materials(bg.eps_m, bg.mu_m, ctx.eps_c(), mu)
        sol = solve_densities(ctx.alpha, ctx.omega, mat, ctx.curve, ctx.source(), cfg=ctx.sum_cfg)
        energies.append(near_field_energy(sol.phi, ctx.alpha, mat.k_c(ctx.omega), ctx.curve, ctx.sum_cfg,
                                          spacing=spacing))
    write_csv(os.path.join(out, "design.csv"),
              ["target_mode", "lambda_j", "parameter", "value", "omega0", "lambda_residual", "iterations",
               "detuned_value", "energy_designed", "energy_detuned", "amplification"],
              [(j, lam_j, free, res.value, base.omega0, res.residual, res.iterations,
                factor * res.value, energies[0], energies[1],
                energies[0] / energies[1] if energies[1] > 0 else float("inf"))])
    return 0


def cmd_verify(ctx, out):
    from .verify import run_identity_suite

    results = run_identity_suite(ctx.alpha, ctx.curve, ctx.sum_cfg)
    write_csv(os.path.join(out, "verify.csv"), ["check", "value", "threshold", "passed"],
              [(r.name, r.value, r.threshold, r.passed) for r in results])
    lines = [f"{'PASS' if r.passed else 'FAIL'} {r.name} value={fmt(r.value)} threshold={fmt(r.threshold)}"
             for r in results]
    write_report(os.path.join(out, "verify_report.txt"), lines)
    print("\n".join(lines))
    return 0 if all(r.passed for r in results) else 3


HANDLERS = {"spectrum": cmd_spectrum, "solve": cmd_solve, "sweep": cmd_sweep,
            "design": cmd_design, "verify": cmd_verify}


def build_parser():
    p = argparse.ArgumentParser(prog="qpplasmon", description="Quasi-periodic plasmonic resonance toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", help="YAML configuration file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. --set geometry.N=256")
    p.add_argument("--output-dir", default=".", help="directory for CSV and report files")
    p.add_argument("--threads", type=int, default=1, help="BLAS threads")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg, raw = load_config(args.config, args.overrides)
        validate(cfg, raw, args.command)
        if args.threads < 1:
            raise ValidationError("--threads must be at least 1")
        os.makedirs(args.output_dir, exist_ok=True)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=args.threads):
            ctx = _Context(cfg, raw)
            return HANDLERS[args.command](ctx, args.output_dir)
    except QPPlasmonError as exc:
        print(f"qpplasmon {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code


def entry_point():
    sys.exit(main())


if __name__ == "__main__":
    entry_point()
