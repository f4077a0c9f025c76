"""Command-line entry point.

Every command reads a JSON config (``--config``), applies dotted-path
overrides such as ``--model.alpha 0.6`` or ``--sim.n_particles=1000``,
and writes artifacts that start with a metadata header: comment lines
for CSV, a ``metadata`` object for JSON. The header carries the SHA-256
of the effective config, so an artifact can be regenerated byte for byte.

Exit codes: 0 success, 2 config error, 3 analytic refusal, 4 numerical
failure.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__
from ._numerics import QuadratureError
from .classify import Absorption, DeterministicSystemError, classify, classify_absorption, density_condition
from .density import DensityError, density_profile, granted_support, p_bifurcation_points
from .ldp import INF, LdpError, asymptotic_regime, quasipotential, quasipotential_report
from .model import ModelError, ModelKind, ModelSpec, check_assumptions
from .scale import ScaleError, build_scale_table, natural_interval
from .sim import (Label, SimConfig, SimConfigError, default_start, ensemble_run, exit_frequencies,
                  mean_absorption_time)

EXIT_OK, EXIT_CONFIG, EXIT_REFUSED, EXIT_NUMERIC = 0, 2, 3, 4
COMMANDS = ("classify", "scale", "density", "ldp", "simulate")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class Refusal(ValueError):
    """Request that the analysis declares invalid."""


# --- config handling --------------------------------------------------------------

def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(tokens: Sequence[str]) -> list[tuple[str, Any]]:
    """Turn ``--a.b value`` / ``--a.b=value`` tokens into (path, value) pairs."""
    out = []
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) < 3:
            raise ConfigError(f"unexpected argument: {tok}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                raise ConfigError(f"missing value for --{key}")
            val = tokens[i + 1]
            i += 2
        out.append((key, _parse_value(val)))
    return out


def apply_override(config: dict[str, Any], path: str, value: Any) -> None:
    node = config
    parts = path.split(".")
    for p in parts[:-1]:
        nxt = node.get(p)
        if nxt is None:
            nxt = node[p] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot override {path}: {p} is not an object")
        node = nxt
    node[parts[-1]] = value


def load_config(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return data


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _model(config: dict[str, Any]) -> ModelSpec:
    if "model" not in config:
        raise ConfigError("config field 'model' is required")
    return ModelSpec.from_dict(config["model"])


def _block(config: dict[str, Any], name: str) -> dict[str, Any]:
    b = config.get(name, {})
    if not isinstance(b, dict):
        raise ConfigError(f"config field '{name}' must be an object")
    return b


def _check_keys(block: dict[str, Any], name: str, allowed: set[str]) -> None:
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"unknown field(s) in '{name}': {', '.join(sorted(extra))}")


def _real(v: Any, name: str) -> float:
    if v == INF or v == "+inf":
        return math.inf
    if v == "-inf":
        return -math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number or \"inf\"/\"-inf\"")
    return float(v)


def _grid(spec: Any, name: str) -> list[float]:
    """A grid is an explicit list or ``{"start", "stop", "num"}`` (inclusive)."""
    if isinstance(spec, list):
        return [_real(v, name) for v in spec]
    if isinstance(spec, dict):
        _check_keys(spec, name, {"start", "stop", "num"})
        try:
            n = int(spec["num"])
            return np.linspace(_real(spec["start"], name), _real(spec["stop"], name), n).tolist()
        except KeyError as exc:
            raise ConfigError(f"{name} needs {exc.args[0]}") from None
    raise ConfigError(f"{name} must be a list or an object with start/stop/num")


def _interval(v: Any, name: str) -> tuple[float, float]:
    if not isinstance(v, list) or len(v) != 2:
        raise ConfigError(f"{name} must be a two-element list")
    return _real(v[0], name), _real(v[1], name)


def _jsonable(x: Any) -> Any:
    """Replace non-finite floats by strings so JSON output stays strict."""
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return _jsonable(x.item())
    return x


def _fmt(x: Any) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


# --- output ---------------------------------------------------------------------

class Context:
    """Effective config plus the metadata stamped on every artifact."""

    def __init__(self, command: str, config: dict[str, Any], out: str | None, fmt: str, threads: int | None):
        self.command = command
        self.config = config
        self.out = out
        self.fmt = fmt
        self.threads = threads
        self.written: list[str] = []

    @property
    def metadata(self) -> dict[str, Any]:
        seed = self.config.get("sim", {}).get("master_seed") if isinstance(self.config.get("sim"), dict) else None
        return {"command": self.command, "config_sha256": config_hash(self.config), "seed": seed,
                "version": __version__, "config": self.config}

    def _header_lines(self) -> list[str]:
        m = self.metadata
        return [f"# singsde {m['version']}", f"# command: {m['command']}",
                f"# config_sha256: {m['config_sha256']}", f"# seed: {json.dumps(m['seed'])}",
                f"# config: {canonical_json(m['config'])}"]

    def csv_text(self, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        buf = io.StringIO()
        buf.write("\n".join(self._header_lines()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def json_text(self, payload: dict[str, Any]) -> str:
        doc = {"metadata": self.metadata}
        doc.update(_jsonable(payload))
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"

    def _target(self, name: str) -> Path | None:
        if self.out is None:
            return None
        d = Path(self.out)
        d.mkdir(parents=True, exist_ok=True)
        return d / name

    def emit(self, name: str, text: str, to_stdout: bool = False) -> None:
        """Write ``text`` as file ``name`` under --out, or to stdout without --out."""
        target = self._target(name)
        if target is None:
            if to_stdout:
                sys.stdout.write(text)
            return
        with open(target, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
        self.written.append(str(target))


# --- commands ----------------------------------------------------------------------

def cmd_classify(ctx: Context) -> int:
    model = _model(ctx.config)
    report = classify(model)
    payload = {"model": model.to_dict(), "report": report.to_dict(),
               "assumptions": check_assumptions(model).to_dict()}
    ctx.emit("classify.json", ctx.json_text(payload), to_stdout=True)
    return EXIT_OK


def cmd_scale(ctx: Context) -> int:
    model = _model(ctx.config)
    b = _block(ctx.config, "scale")
    _check_keys(b, "scale", {"interval", "reference", "grid", "x0"})
    if "interval" in b:
        interval = _interval(b["interval"], "scale.interval")
    else:
        interval = natural_interval(model, _real(b.get("x0", 1.0), "scale.x0"))
    ref = _real(b["reference"], "scale.reference") if b.get("reference") is not None else None
    if "grid" in b:
        grid = _grid(b["grid"], "scale.grid")
    else:
        lo, hi = interval
        a = lo if math.isfinite(lo) else (hi - 4.0 if math.isfinite(hi) else -2.0)
        z = hi if math.isfinite(hi) else (lo + 4.0 if math.isfinite(lo) else 2.0)
        grid = np.linspace(a, z, 42)[1:-1].tolist()
    if any(not interval[0] < x < interval[1] for x in grid):
        raise ConfigError("scale.grid points must lie strictly inside the interval")
    table = build_scale_table(model, interval, grid, ref)
    report = {"model": model.to_dict(), "boundary": table.boundary.to_dict(),
              "reference": table.reference, "error": table.error}
    if ctx.fmt == "csv":
        ctx.emit("scale.csv", ctx.csv_text(("x", "G", "p", "v"), table.rows()), to_stdout=True)
        ctx.emit("boundary.json", ctx.json_text(report))
    else:
        report["table"] = table.to_dict()
        ctx.emit("scale.json", ctx.json_text(report), to_stdout=True)
    return EXIT_OK


def _density_refusal(model: ModelSpec) -> str:
    _, cond = density_condition(model)
    return f"no integrable solution: no stationary density is granted ({cond})"


def cmd_density(ctx: Context) -> int:
    model = _model(ctx.config)
    b = _block(ctx.config, "density")
    _check_keys(b, "density", {"support", "grid", "route", "x0"})
    granted, _ = density_condition(model)
    if not granted:
        raise Refusal(_density_refusal(model))
    if "support" in b:
        support = _interval(b["support"], "density.support")
    else:
        x0 = b.get("x0")
        if x0 is None:
            x0 = -math.sqrt(model.a) - 1.0 if model.kind is ModelKind.SADDLE_NODE and model.a > 0 else 1.0
        try:
            support = granted_support(model, _real(x0, "density.x0"))
        except DensityError as exc:
            raise Refusal(str(exc)) from None
    lo, hi = support
    if "grid" in b:
        grid = _grid(b["grid"], "density.grid")
    else:
        a = lo if math.isfinite(lo) else (hi - 5.0 if math.isfinite(hi) else -5.0)
        z = hi if math.isfinite(hi) else (lo + 5.0 if math.isfinite(lo) else 5.0)
        grid = np.linspace(a, z, 202)[1:-1].tolist()
    route = b.get("route", "auto")
    if route not in ("auto", "closed", "quadrature"):
        raise ConfigError("density.route must be auto, closed or quadrature")
    prof = density_profile(model, support, grid, route)
    scalars = prof.to_dict()
    scalars["thresholds"] = [p.__dict__ for p in p_bifurcation_points(model)]
    if model.kind is ModelKind.SADDLE_NODE and model.alpha == 1.0 and model.a > 0:
        from .density import lyapunov_exponent_sn
        scalars["lyapunov"] = lyapunov_exponent_sn(model.a, model.sigma)
    report = {"model": model.to_dict(), "scalars": scalars}
    if ctx.fmt == "csv":
        ctx.emit("density.csv", ctx.csv_text(("x", "density"), zip(prof.grid, prof.values)), to_stdout=True)
        ctx.emit("density.json", ctx.json_text(report))
    else:
        report["table"] = {"x": list(prof.grid), "density": list(prof.values)}
        ctx.emit("density.json", ctx.json_text(report), to_stdout=True)
    return EXIT_OK


def cmd_ldp(ctx: Context) -> int:
    b = _block(ctx.config, "ldp")
    _check_keys(b, "ldp", {"lambda", "mu", "kappa", "alpha", "c", "grid"})
    if "c" in b:
        for k in ("mu", "kappa"):
            if k not in b:
                raise ConfigError(f"ldp.{k} is required")
        c = b["c"] if b["c"] == INF else _real(b["c"], "ldp.c")
        rep = asymptotic_regime(_real(b["mu"], "ldp.mu"), _real(b["kappa"], "ldp.kappa"), c)
    else:
        for k in ("lambda", "mu", "kappa", "alpha"):
            if k not in b:
                raise ConfigError(f"ldp.{k} is required")
        lam, mu, kappa, alpha = (_real(b[k], f"ldp.{k}") for k in ("lambda", "mu", "kappa", "alpha"))
        rep = quasipotential_report(lam, mu, kappa, alpha)
    payload = {"report": rep.to_dict()}
    ctx.emit("ldp.json", ctx.json_text(payload), to_stdout=ctx.fmt == "json" or "grid" not in b)
    if "grid" in b:
        if rep.lam is None:
            raise ConfigError("ldp.grid needs a parameter point (lambda, mu, kappa, alpha)")
        xs = _grid(b["grid"], "ldp.grid")
        rows = [(x, quasipotential(rep.lam, rep.mu, rep.kappa, rep.alpha, x)) for x in xs]
        if ctx.fmt == "csv":
            ctx.emit("quasipotential.csv", ctx.csv_text(("x", "U"), rows), to_stdout=True)
    return EXIT_OK


_SIM_EXTRA = {"x0", "mode", "x0_grid"}


def cmd_simulate(ctx: Context) -> int:
    model = _model(ctx.config)
    b = dict(_block(ctx.config, "sim"))
    extra = {k: b.pop(k) for k in list(b) if k in _SIM_EXTRA}
    cfg = SimConfig.from_dict(b)
    mode = extra.setdefault("mode", "ensemble")
    if mode == "ensemble":
        extra.setdefault("x0", 1.0)
    # record every default so the metadata describes the run completely
    ctx.config["sim"] = {**cfg.to_dict(), **extra}
    if ctx.out is None:
        ctx.out = "."
    if mode == "ensemble":
        x0 = _real(extra["x0"], "sim.x0")
        st = ensemble_run(model, x0, cfg, ctx.threads)
        mass = st.hist_mass
        rows = []
        for s, t in enumerate(st.snapshot_times):
            for j in range(len(st.bin_edges) - 1):
                rows.append((t, st.bin_edges[j], st.bin_edges[j + 1], mass[s, j], int(st.survivor_counts[s])))
        ctx.emit("histograms.csv", ctx.csv_text(("snapshot_time", "bin_lo", "bin_hi", "mass", "survivor_count"),
                                                rows))
        ended = np.flatnonzero(st.labels != Label.ALIVE)
        trows = [(int(st.first_index + i), st.event_times[i], Label(int(st.labels[i])).text) for i in ended]
        ctx.emit("absorption_times.csv", ctx.csv_text(("particle_index", "time", "label"), trows))
        summary = st.summary()
        summary["hist_out_of_range"] = [int(st.survivor_counts[s] - st.hist_counts[s].sum())
                                        for s in range(len(st.snapshot_times))]
    elif mode == "mean_time":
        verdict = classify_absorption(model)
        if verdict is not Absorption.ALMOST_SURELY_FINITE:
            raise Refusal(f"absorption at 0 is {verdict.value}, not AlmostSurelyFinite")
        x0 = extra.get("x0")
        res = mean_absorption_time(model, cfg, None if x0 is None else _real(x0, "sim.x0"), ctx.threads)
        summary = {"mean_absorption_time": res.to_dict(),
                   "x0": default_start(model) if x0 is None else _real(x0, "sim.x0")}
    elif mode == "exit_frequencies":
        if "x0_grid" not in extra:
            raise ConfigError("sim.x0_grid is required for mode exit_frequencies")
        res = exit_frequencies(model, _grid(extra["x0_grid"], "sim.x0_grid"), cfg, ctx.threads)
        rows = [(f.x0, f.n, f.n_right, f.n_left, f.n_unresolved, f.n_blown_up, f.frequency_right, f.stderr)
                for f in res]
        ctx.emit("exit_frequencies.csv", ctx.csv_text(
            ("x0", "n", "n_right", "n_left", "n_unresolved", "n_blown_up", "frequency_right", "stderr"), rows))
        summary = {"exit_frequencies": [f.to_dict() for f in res]}
        if model.alpha >= 1.0:
            summary["convergence_rule"] = {"radius": cfg.convergence_radius or 1e-3,
                                           "hold_time": cfg.convergence_hold}
    else:
        raise ConfigError("sim.mode must be ensemble, mean_time or exit_frequencies")
    ctx.emit("summary.json", ctx.json_text({"model": model.to_dict(), "summary": summary}), to_stdout=True)
    return EXIT_OK


_HANDLERS: dict[str, Callable[[Context], int]] = {
    "classify": cmd_classify, "scale": cmd_scale, "density": cmd_density, "ldp": cmd_ldp,
    "simulate": cmd_simulate,
}


# --- entry point ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="singsde",
        description="Analysis and simulation of SDEs with a singular point.",
        epilog="Any config field can be overridden with --<dotted.path> VALUE, e.g. --model.alpha 0.6.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--out", help="output directory (default: main artifact to stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, help="overrides sim.master_seed")
    p.add_argument("--threads", type=int, help="worker threads for simulate")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args, rest = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        config = load_config(args.config)
        config = copy.deepcopy(config)
        for path, value in parse_overrides(rest):
            apply_override(config, path, value)
        if args.seed is not None:
            apply_override(config, "sim.master_seed", args.seed)
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        try:
            canonical_json(config)
        except ValueError:
            raise ConfigError("config contains non-finite numbers; use \"inf\"/\"-inf\" strings") from None
        ctx = Context(args.command, config, args.out, args.format, args.threads)
        return _HANDLERS[args.command](ctx)
    except (ConfigError, ModelError, SimConfigError) as exc:
        print(f"singsde: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (Refusal, DensityError, LdpError, ScaleError, DeterministicSystemError) as exc:
        print(f"singsde: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (QuadratureError, FloatingPointError, ArithmeticError, RuntimeError) as exc:
        print(f"singsde: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
