"""Batch command line: deterministic scenario runs writing CSV/JSON outputs.

Every scenario takes an optional JSON config file plus flag overrides
(flags win), validates the merged config strictly, writes its data files
and a manifest into the output directory, and exits with
0 = success, 1 = verdict failure or runtime error (error record on disk),
2 = usage or configuration error.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

import numpy as np

from . import acceptance
from . import fields as fields_mod
from . import invariants, io, sl2
from .critical import (
    CoverDomain,
    PrimitiveField,
    closed_orbit_search,
    critical_value_solve,
)
from .errors import ConfigError, MagflowsError
from .flow import UnitPhasePoint, integrate, liouville_samples
from .surfaces import (
    DeckWord,
    make_flat_torus,
    make_genus2_octagon,
    make_half_plane,
    make_sphere,
)
from .variation import conjugate_points, jacobi_integrate

PRESETS = {
    "genus2-octagon": make_genus2_octagon,
    "flat-torus": make_flat_torus,
    "sphere": make_sphere,
    "half-plane": make_half_plane,
}

# chart start point per preset when none is configured
DEFAULT_START = {
    "genus2-octagon": (0.0, 1.0, 0.0),
    "flat-torus": (0.25, 0.25, 0.0),
    "sphere": (0.0, 0.0, 0.0),
    "half-plane": (0.0, 1.0, 0.0),
}


def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON serialization."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _make_model(config):
    preset = config.get("preset", "genus2-octagon")
    if preset not in PRESETS:
        raise ConfigError(
            f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    return preset, PRESETS[preset]()


def _make_field(config, default=1.0):
    spec = config.get("field", default)
    if isinstance(spec, bool):
        raise ConfigError("field must be a number or an object")
    if isinstance(spec, (int, float)):
        return fields_mod.ConstantField(float(spec))
    if isinstance(spec, dict):
        kind = spec.get("kind")
        if kind == "constant":
            io.validate_keys(spec, {"kind", "value"}, ("value",), "field")
            return fields_mod.ConstantField(float(spec["value"]))
        if kind == "trig":
            io.validate_keys(spec, {"kind", "a", "b", "c"}, (), "field")
            return fields_mod.torus_trig_field(
                a=float(spec.get("a", 0.7)),
                b=float(spec.get("b", -0.4)),
                c=float(spec.get("c", 0.3)),
            )
        raise ConfigError(f"unknown field kind {kind!r}")
    raise ConfigError("field must be a number or an object with a 'kind'")


def _start_point(config, preset):
    x0, y0, phi0 = DEFAULT_START[preset]
    return (float(config.get("x", x0)), float(config.get("y", y0)),
            float(config.get("phi", phi0)))


def _parse_class_word(config, model):
    """Deck word from tokens like 'a b^-1'; names from the model's deck."""
    word = config.get("class_word")
    if not isinstance(word, str) or not word.strip():
        raise ConfigError("class_word must be a non-empty string")
    factors = []
    for token in word.split():
        name, _, power = token.partition("^")
        try:
            p = int(power) if power else 1
        except ValueError as exc:
            raise ConfigError(f"bad exponent in class_word token {token!r}") from exc
        if name not in model.deck.generators:
            raise ConfigError(
                f"unknown generator {name!r}; deck has {sorted(model.deck.generators)}")
        if p != 0:
            factors.append((name, p))
    if not factors:
        raise ConfigError("class_word reduces to the identity")
    if model.deck.kind == "fuchsian":
        mat = np.eye(2)
        for name, p in factors:
            g = model.deck.generators[name]
            if p < 0:
                # adjugate inverse, exact for det 1
                g = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
            for _ in range(abs(p)):
                mat = mat @ g
        return mat
    if model.deck.kind == "lattice":
        shift = np.zeros(2)
        for name, p in factors:
            shift = shift + p * model.deck.generators[name].shift
        return DeckWord(tuple(factors), shift=shift)
    raise ConfigError("closed-orbit search needs a quotient surface preset")


def _value_with_error(v):
    return {"value": v.value, "stderr": v.stderr}


# ---------------------------------------------------------------------------
# Scenario runners: each validates its keys, writes outputs, returns exit code.


def _run_check_algebra(config, outdir):
    io.validate_keys(
        config, {"scenario", "seed", "n", "span", "outdir", "workers"},
        ("seed",))
    seed = int(config["seed"])
    n = int(config.get("n", 1000))
    span = float(config.get("span", 5.0))
    rng = np.random.default_rng(seed)
    ts = rng.uniform(-span, span, n)
    ss = rng.uniform(-span, span, n)
    rows = []
    max_comm = 0.0
    for t, s in zip(ts, ss):
        r = sl2.horocycle_commutation_residual(float(t), float(s))
        max_comm = max(max_comm, r)
        rows.append((float(t), float(s), r))
    io.write_csv(os.path.join(outdir, "commutation.csv"),
                 ("t", "s", "residual"), rows)

    det_resid = 0.0
    for lam in np.linspace(-2.0, 2.0, 101):
        det = sl2.magnetic_generator(lam).det
        det_resid = max(det_resid, abs(det - (-0.25 * (1.0 - lam * lam))))
    c, kappa = sl2.conjugate_to_standard_horocycle(sl2.magnetic_generator(1.0))
    conj = c.inv().matrix @ sl2.magnetic_generator(1.0).m @ c.matrix
    conj_resid = float(np.abs(conj / kappa - sl2.nilpotent_generator().m).max())
    passed = max_comm <= 1e-12 and det_resid <= 1e-15 and conj_resid <= 1e-10
    io.write_json(os.path.join(outdir, "summary.json"), {
        "max_commutation_residual": max_comm,
        "det_residual": det_resid,
        "conjugacy_residual": conj_resid,
        "kappa": kappa,
        "samples": n,
        "passed": passed,
    })
    return 0 if passed else 1


def _run_simulate(config, outdir):
    io.validate_keys(
        config, {"scenario", "preset", "field", "x", "y", "phi", "n", "T",
                 "dt", "seed", "outdir", "workers"}, ("T",))
    preset, model = _make_model(config)
    field = _make_field(config)
    T = float(config["T"])
    dt = float(config.get("dt", 1e-3))
    n = config.get("n")
    if n is None:
        starts = [_start_point(config, preset)]
    else:
        if "seed" not in config:
            raise ConfigError("seed is required when sampling initial conditions")
        xs, ys, phis = liouville_samples(model, int(config["seed"]), int(n))
        starts = list(zip(xs.tolist(), ys.tolist(), phis.tolist()))
    diagnostics = []
    for i, (x, y, phi) in enumerate(starts):
        # always reduce so the deck-word column reflects the quotient orbit
        orbit = integrate(model, field, UnitPhasePoint(x, y, phi), T, dt=dt,
                          reduce="step")
        lengths = orbit.word_lengths()
        rows = zip(orbit.ts, orbit.xs, orbit.ys, orbit.phis, lengths)
        io.write_csv(os.path.join(outdir, f"orbit_{i:03d}.csv"),
                     ("t", "x", "y", "phi", "word_length"), rows)
        diagnostics.append({
            "index": i,
            "start": [x, y, phi],
            "final": [float(orbit.xs[-1]), float(orbit.ys[-1]),
                      float(orbit.phis[-1])],
            "word_length": int(lengths[-1]),
            "reductions": len(orbit.events),
            "steps": len(orbit.ts) - 1,
        })
    io.write_json(os.path.join(outdir, "diagnostics.json"),
                  _plain({"orbits": diagnostics, "count": len(starts)}))
    return 0


def _run_variation(config, outdir):
    io.validate_keys(
        config, {"scenario", "preset", "field", "x", "y", "phi", "T", "dt",
                 "y0", "ydot0", "outdir", "workers"}, ("T",))
    preset, model = _make_model(config)
    field = _make_field(config)
    T = float(config["T"])
    dt = float(config.get("dt", 1e-3))
    x, y, phi = _start_point(config, preset)
    orbit = integrate(model, field, UnitPhasePoint(x, y, phi), T, dt=dt,
                      reduce="auto")
    vs = jacobi_integrate(orbit, float(config.get("y0", 0.0)),
                          float(config.get("ydot0", 1.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = vs.ydot / vs.y
    rows = zip(vs.ts, vs.y, u)
    io.write_csv(os.path.join(outdir, "variation.csv"), ("t", "y", "u"), rows)
    times = conjugate_points(orbit, T)
    io.write_json(os.path.join(outdir, "conjugate_times.json"),
                  _plain({"times": list(times), "count": len(times)}))
    return 0


def _run_invariants(config, outdir):
    io.validate_keys(
        config, {"scenario", "preset", "field", "seed", "n_action",
                 "n_maslov", "n_cycle", "T", "dt", "resolution", "outdir",
                 "workers"}, ("seed",))
    preset, model = _make_model(config)
    field = _make_field(config)
    budget = dict(invariants.DEFAULT_BUDGET)
    for key in ("n_action", "n_maslov", "n_cycle", "T", "dt", "resolution"):
        if key in config:
            budget[key] = config[key]
    budget["seed"] = int(config["seed"])
    report = invariants.horocycle_characterization_test(model, field, budget)
    io.write_json(os.path.join(outdir, "report.json"), _plain({
        "action_formula": report.action_formula,
        "action_montecarlo": _value_with_error(report.action_montecarlo),
        "maslov_rate": _value_with_error(report.maslov_rate),
        "asymptotic_cycle": [_value_with_error(v)
                             for v in report.asymptotic_cycle],
        "horocycle_verdict": report.horocycle_verdict,
        "evidence": report.evidence,
    }))
    # per-sample contact values at the action seed, for external re-analysis
    pe = invariants.build_primitive_evaluator(model, field)
    x, y, phi = liouville_samples(model, budget["seed"],
                                  int(budget["n_action"]))
    f = field.value(x, y)
    vals = -1.0 - pe.c * np.asarray(f, dtype=float) \
        + np.asarray(pe.rho_on_velocity(x, y, phi), dtype=float)
    rows = zip(range(len(x)), x, y, phi, vals)
    io.write_csv(os.path.join(outdir, "samples.csv"),
                 ("index", "x", "y", "phi", "contact_value"), rows)
    return 0 if report.horocycle_verdict == "horocyclic" else 1


def _critical_primitive(config, preset, model, field):
    if preset == "flat-torus":
        spec = config.get("field", 1.0)
        if isinstance(spec, dict) and spec.get("kind") == "trig":
            form = fields_mod.torus_trig_primitive(
                a=float(spec.get("a", 0.7)), b=float(spec.get("b", -0.4)),
                c=float(spec.get("c", 0.3)))
        elif isinstance(field, fields_mod.ConstantField) and field.c == 0.0:
            form = fields_mod.ZeroOneForm()
        else:
            raise ConfigError(
                "flat-torus critical value needs a zero-mean field "
                "(constant 0 or kind 'trig')")
        return PrimitiveField(form, CoverDomain("flat-cell"))
    if preset == "genus2-octagon":
        if not isinstance(field, fields_mod.ConstantField):
            raise ConfigError(
                "genus2-octagon critical value supports constant fields only")
        if field.c == 0.0:
            form = fields_mod.ZeroOneForm()
        else:
            form = fields_mod.disk_constant_norm_primitive(field.c)
        return PrimitiveField(form, CoverDomain("disk-ball"))
    raise ConfigError(
        f"critical value is not implemented for preset {preset!r}")


def _run_critical_value(config, outdir):
    io.validate_keys(
        config, {"scenario", "preset", "field", "resolution", "outdir",
                 "workers"}, ())
    preset, model = _make_model(config)
    field = _make_field(config)
    theta0 = _critical_primitive(config, preset, model, field)
    resolution = config.get("resolution")
    cert = critical_value_solve(
        model, field, theta0,
        resolution=int(resolution) if resolution is not None else None)
    io.write_grid(os.path.join(outdir, "u_grid.bin"), cert.u_grid,
                  cert.method["bbox"])
    io.write_json(os.path.join(outdir, "certificate.json"), _plain({
        "c_upper": cert.c_upper,
        "c_lower": cert.c_lower,
        "method": cert.method,
        "loop_witness": cert.loop_witness,
    }))
    return 0


def _run_closed_orbit(config, outdir):
    io.validate_keys(
        config, {"scenario", "preset", "field", "class_word", "k", "outdir",
                 "workers"}, ("class_word",))
    preset, model = _make_model(config)
    field = _make_field(config, default=0.0)
    k = float(config.get("k", 0.5))
    deck_word = _parse_class_word(config, model)
    if preset == "genus2-octagon":
        if not isinstance(field, fields_mod.ConstantField):
            raise ConfigError("closed-orbit supports constant fields only")
        if field.c == 0.0:
            form = fields_mod.ZeroOneForm()
        else:
            form = fields_mod.uhp_axis_invariant_primitive(
                sl2.Sl2Element(deck_word), field.c)
        theta = PrimitiveField(form, CoverDomain("uhp"))
    elif preset == "flat-torus":
        if not (isinstance(field, fields_mod.ConstantField) and field.c == 0.0):
            raise ConfigError(
                "flat-torus closed-orbit search needs the zero field")
        theta = PrimitiveField(fields_mod.ZeroOneForm(),
                               CoverDomain("flat-cell"))
    else:
        raise ConfigError(
            f"closed-orbit search is not implemented for preset {preset!r}")
    result = closed_orbit_search(model, field, theta, deck_word, k=k)
    io.write_csv(os.path.join(outdir, "orbit_nodes.csv"), ("t", "x", "y"),
                 zip(result.minimizer.ts, result.minimizer.xs,
                     result.minimizer.ys))
    io.write_json(os.path.join(outdir, "closed_orbit.json"), _plain({
        "class_word": config["class_word"],
        "k": k,
        "ok": bool(result.ok),
        "base_point": list(result.base_point),
        "action_value": result.value,
        "period": result.period,
        "length": result.length,
        "closing_defect": result.closing_defect,
        "flow_defect": result.flow_defect,
        "energy_residual": result.energy_residual,
        "diagnostics": result.diagnostics,
    }))
    return 0 if result.ok else 1


def _run_acceptance(config, outdir):
    io.validate_keys(config, {"scenario", "criteria", "outdir", "workers"}, ())
    numbers = config.get("criteria")
    if numbers is not None:
        numbers = [int(n) for n in numbers]
        unknown = sorted(set(numbers) - set(acceptance.CRITERIA))
        if unknown:
            raise ConfigError(f"unknown criteria {unknown}")
    results = acceptance.run(numbers)
    for res in results:
        print(acceptance.summary_line(res))
    io.write_json(os.path.join(outdir, "acceptance.json"), _plain(results))
    return 0 if all(r["passed"] for r in results) else 1


RUNNERS = {
    "check-algebra": _run_check_algebra,
    "simulate": _run_simulate,
    "variation": _run_variation,
    "invariants": _run_invariants,
    "critical-value": _run_critical_value,
    "closed-orbit": _run_closed_orbit,
    "acceptance": _run_acceptance,
}

# flags shared by every scenario; per-scenario numeric flags listed below
_FLAGS = {
    "check-algebra": (("seed", int), ("n", int), ("span", float)),
    "simulate": (("preset", str), ("x", float), ("y", float), ("phi", float),
                 ("n", int), ("T", float), ("dt", float), ("seed", int)),
    "variation": (("preset", str), ("x", float), ("y", float), ("phi", float),
                  ("T", float), ("dt", float), ("y0", float),
                  ("ydot0", float)),
    "invariants": (("preset", str), ("seed", int), ("n_action", int),
                   ("n_maslov", int), ("n_cycle", int), ("T", float),
                   ("dt", float), ("resolution", int)),
    "critical-value": (("preset", str), ("resolution", int)),
    "closed-orbit": (("preset", str), ("class_word", str), ("k", float)),
    "acceptance": (),
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="magflows",
        description="Magnetic-flow scenarios: simulation, invariants, "
                    "critical values, closed orbits, acceptance checks.")
    subs = parser.add_subparsers(dest="scenario_name", required=True)
    for name, flags in _FLAGS.items():
        sub = subs.add_parser(name)
        sub.add_argument("config", nargs="?", default=None,
                         help="JSON config file (flags override its keys)")
        sub.add_argument("--outdir", default=None)
        sub.add_argument("--workers", type=int, default=None)
        for key, typ in flags:
            sub.add_argument(f"--{key.replace('_', '-')}", dest=key,
                             type=typ, default=None)
        if name not in ("check-algebra", "acceptance"):
            sub.add_argument("--field", type=float, default=None,
                             help="constant field strength")
        if name == "acceptance":
            sub.add_argument("--criteria", default=None,
                             help="comma-separated criterion numbers")
    return parser


def _merge_config(args):
    config = io.load_config(args.config) if args.config else {}
    skip = {"config", "scenario_name"}
    for key, value in vars(args).items():
        if key in skip or value is None:
            continue
        if key == "criteria" and isinstance(value, str):
            try:
                value = [int(tok) for tok in value.split(",") if tok.strip()]
            except ValueError as exc:
                raise ConfigError(f"bad criteria list {value!r}") from exc
        config[key] = value
    return config


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    scenario = args.scenario_name
    outdir = "out"
    try:
        config = _merge_config(args)
        config["scenario"] = scenario
        outdir = str(config.get("outdir") or "out")
        config["outdir"] = outdir
        config["workers"] = io.worker_count(config)
        os.makedirs(outdir, exist_ok=True)
        started = time.time()
        code = RUNNERS[scenario](config, outdir)
        io.write_manifest(os.path.join(outdir, "manifest.json"), config,
                          started)
        return code
    except ConfigError as exc:
        print(f"magflows: config error: {exc}", file=sys.stderr)
        return 2
    except MagflowsError as exc:
        _write_error_record(outdir, scenario, exc)
        print(f"magflows: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failures still leave a record behind
        _write_error_record(outdir, scenario, exc)
        print(f"magflows: unexpected {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 1


def _write_error_record(outdir, scenario, exc):
    try:
        os.makedirs(outdir, exist_ok=True)
        io.write_json(os.path.join(outdir, "error.json"), {
            "scenario": scenario,
            "error": type(exc).__name__,
            "message": str(exc),
        })
    except OSError:
        pass


if __name__ == "__main__":
    sys.exit(main())
