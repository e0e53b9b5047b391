"""Command-line front end.

Every command prints a report to stdout. JSON reports carry ``schema_version``
and the full run configuration, seed included, and are byte-identical across
reruns with the same flags. Exit codes: 0 when a verdict was computed (a
failure certificate counts), 2 for configuration errors, 3 for guard
violations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys as _sys
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Sequence

from .conditions import (
    SCHEDULES,
    CheckResult,
    bdp_exceptional_closed_form,
    certificate_depth,
    certificate_to_dict,
    check_ksc,
    check_msc,
    classify,
    exceptional_set,
    grc_witness,
    kitai_generator_check,
    ksc_failure_certificate,
)
from .lp_operator import SimpleFunction, apply_op, frechet, inverse_orbit_floor, lp_norm_p
from .measure_core import DyadicSet, as_fraction, format_rational
from .serialize import (
    DescriptorError,
    dumps,
    leveled_from_json,
    load_system,
    report,
    seq_to_csv,
    sequences_to_csv,
    simple_from_json,
    system_to_descriptor,
    to_jsonable,
)
from .shift_dynamics import (
    backward_product,
    classify_bilateral,
    forward_product,
    norms_from_system,
    product_criterion,
    weights_from_system,
)
from .tower import (
    LeveledSet,
    TowerSystem,
    bdp_system,
    block_start,
    decode,
    geometric_system,
    measure,
    uniform_system,
    wandering_set,
)

DEFAULT_MAX_R = 20
DEFAULT_MAX_HORIZON = 50_000

EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(f"invalid {field}: {message}")
        self.field = field


class GuardError(Exception):
    pass


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(name, f"expected an integer, got {raw!r}") from None


# -- argument parsing ------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--system", default="bdp", help="bdp, geometric:<rho>, identity-like, or a JSON descriptor path")
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--schedule", default="block", help="tolerance schedule: " + ", ".join(SCHEDULES))
    p.add_argument("--resolution", type=int, default=10, help="grid exponent r (cells of width 2^-r)")
    p.add_argument("--p", default="1", help="Lebesgue exponent (rational >= 1)")
    p.add_argument("--format", choices=("json", "csv", "text"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", default="1/4")
    p.add_argument("--level", type=int, default=0)
    p.add_argument("--set", dest="set_", default=None, help='leveled set JSON, e.g. {"0":"0:1/2"}')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="towerdyn", description="Dynamics of composition operators on tower systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    def group(name: str, actions: Sequence[str], help_: str) -> None:
        p = sub.add_parser(name, help=help_)
        p.add_argument("action", choices=actions)
        _common(p)
        if name == "shift":
            p.add_argument("--J", type=int, default=0, help="window offset for norm-based classification")
        if name == "orbit":
            p.add_argument("--delta", default="1")

    group("system", ("info", "measure"), "describe a system or measure a set")
    group("check", ("msc", "ksc", "grc", "kitai"), "run one condition checker")
    group("shift", ("weights", "classify", "products"), "induced weighted shift")
    group("orbit", ("forward", "inverse"), "orbits of the composition operator")
    group("reproduce", ("thm38", "prop61"), "reproduce the counterexample pipeline")

    p = sub.add_parser("classify", help="dynamical labels for T_f")
    _common(p)
    p = sub.add_parser("metric", help="metric of convergence in measure")
    _common(p)
    p.add_argument("--phi", required=True, help="chiW, zero, chi:<set JSON>, or simple-function JSON")
    p.add_argument("--psi", default="zero")
    return parser


def parse_system(spec: str) -> TowerSystem:
    if spec == "bdp":
        return bdp_system()
    if spec in ("identity-like", "identity"):
        return uniform_system()
    if spec.startswith("geometric:"):
        try:
            rho = as_fraction(spec.split(":", 1)[1])
            return geometric_system(rho)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError("system", str(exc)) from None
    if spec.endswith(".json") or Path(spec).is_file():
        try:
            return load_system(spec)
        except DescriptorError as exc:
            raise ConfigError(f"system.{exc.field}", exc.message) from None
    raise ConfigError("system", f"unknown system {spec!r}")


def _rational(value: str, field: str, positive: bool = False) -> Fraction:
    try:
        q = as_fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ConfigError(field, f"not a rational: {value!r}") from None
    if positive and q <= 0:
        raise ConfigError(field, "must be positive")
    return q


def _json_arg(text: str, field: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(field, f"invalid JSON ({exc.msg})") from None


def _leveled(text: str | None, level: int) -> LeveledSet:
    if text is None:
        return LeveledSet.single(level)
    try:
        return leveled_from_json(_json_arg(text, "set"), "set")
    except DescriptorError as exc:
        raise ConfigError(exc.field, exc.message) from None


def _fiber_at_level(s: LeveledSet, level: int) -> DyadicSet:
    if s.positions() not in ([level], []):
        raise ConfigError("set", f"must lie in level {level}, got levels {s.positions()}")
    return s.fiber(level)


def _function(text: str, field: str) -> SimpleFunction:
    if text == "zero":
        return SimpleFunction.zero()
    if text == "chiW":
        return SimpleFunction.indicator(wandering_set())
    try:
        if text.startswith("chi:"):
            return SimpleFunction.indicator(leveled_from_json(_json_arg(text[4:], field), field))
        return simple_from_json(_json_arg(text, field), field)
    except DescriptorError as exc:
        raise ConfigError(exc.field, exc.message) from None


class Run:
    """Validated configuration shared by every command."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.command = args.command + (f" {args.action}" if getattr(args, "action", None) else "")
        if args.horizon < 1:
            raise ConfigError("horizon", "must be at least 1")
        if args.resolution < 0:
            raise ConfigError("resolution", "must be non-negative")
        if args.schedule not in SCHEDULES:
            raise ConfigError("schedule", f"expected one of {', '.join(SCHEDULES)}")
        max_r = _env_int("TOWERDYN_MAX_R", DEFAULT_MAX_R)
        if args.resolution > max_r:
            raise GuardError(f"resolution guard: r = {args.resolution} exceeds {max_r} (set TOWERDYN_MAX_R to override)")
        max_h = _env_int("TOWERDYN_MAX_HORIZON", DEFAULT_MAX_HORIZON)
        if args.horizon > max_h:
            raise GuardError(f"horizon guard: {args.horizon} exceeds {max_h} (set TOWERDYN_MAX_HORIZON to override)")
        self.p = _rational(args.p, "p")
        if self.p < 1:
            raise ConfigError("p", "must be at least 1")
        self.eps = _rational(args.eps, "eps", positive=True)
        self.system = parse_system(args.system)
        self.set = _leveled(args.set_, args.level)

    def config(self) -> dict[str, Any]:
        a = self.args
        out = {
            "system": a.system,
            "horizon": a.horizon,
            "schedule": a.schedule,
            "resolution": a.resolution,
            "p": format_rational(self.p),
            "eps": format_rational(self.eps),
            "level": a.level,
            "seed": a.seed,
        }
        if a.set_ is not None:
            out["set"] = to_jsonable(self.set)
        return out


# -- commands ------------------------------------------------------------------------


Output = tuple[dict[str, Any], list[tuple[int, Fraction, str]], str]


def _check_summary(c: CheckResult) -> dict[str, Any]:
    return {
        "condition": c.condition,
        "horizon": c.horizon,
        "schedule": c.schedule,
        "verdict": c.verdict,
        "basis": c.basis,
        "achieved": c.achieved,
        "subsequence": c.subsequence,
        "witness": c.witness,
        "certificate": c.certificate,
        "notes": c.notes,
    }


def _check_rows(c: CheckResult) -> list[tuple[int, Fraction, str]]:
    return [(n, v, tag) for tag in sorted(c.sequences) for n, v in sorted(c.sequences[tag].items())]


def cmd_system(run: Run) -> Output:
    sys = run.system
    if run.args.action == "measure":
        value = measure(sys, run.set)
        return {"measure": value}, [(0, value, "measure")], format_rational_short(value)
    H = run.args.horizon
    mus = {n: sys.level_measure(n) for n in range(-H, H + 1)}
    body: dict[str, Any] = {"descriptor": system_to_descriptor(sys), "level_measures": mus}
    if sys.kind == "bdp":
        body["addresses"] = {n: repr(decode(n)) for n in range(0, H + 1)}
        body["exceptional_set"] = exceptional_set(sys, H)
    rows = [(n, v, "mu_fnW") for n, v in mus.items()]
    text = "\n".join(f"{n}\t{format_rational(v)}" for n, v in mus.items())
    return body, rows, text


def cmd_check(run: Run) -> Output:
    sys, a, H, sched = run.system, run.args, run.args.horizon, run.args.schedule
    if a.action == "kitai":
        c = kitai_generator_check(sys, H, sched)
    else:
        A = _fiber_at_level(run.set, a.level)
        if a.action == "msc":
            c = check_msc(sys, a.level, A, H, sched)
        elif a.action == "ksc":
            c = check_ksc(sys, a.level, A, run.eps, H, sched)
        else:
            c = grc_witness(sys, a.level, A, run.eps, H, sched)
    return _check_summary(c), _check_rows(c), f"{c.condition}: {c.verdict} ({c.basis})"


def cmd_classify(run: Run) -> Output:
    rep = classify(run.system, run.args.horizon, run.args.schedule, run.eps)
    body = {
        "system": rep.system,
        "horizon": rep.horizon,
        "labels": rep.labels,
        "conditions": {k: _check_summary(v) for k, v in rep.conditions.items()},
        "assumptions": rep.assumptions,
    }
    rows = [r for c in rep.conditions.values() for r in _check_rows(c)]
    text = "\n".join(f"{k}: {v.verdict} ({v.basis})" for k, v in rep.labels.items())
    return body, rows, text


def cmd_shift(run: Run) -> Output:
    sys, H = run.system, run.args.horizon
    ws = weights_from_system(sys, run.p)
    if run.args.action == "weights":
        values = {k: ws(k) for k in range(-H, H + 1)}
        lo, hi = ws.bounds(range(-H, H + 1))
        body = {"p": run.p, "weights_pth_power": values, "min": lo, "max": hi}
        return body, [(k, v, "weight_p") for k, v in values.items()], seq_to_csv(values).rstrip("\n")
    if run.args.action == "products":
        fwd = {k: forward_product(ws, k) for k in range(1, H + 1)}
        bwd = {k: backward_product(ws, k) for k in range(1, H + 1)}
        rows = [(k, v, "forward") for k, v in fwd.items()] + [(k, v, "backward") for k, v in bwd.items()]
        text = "\n".join(f"{k}\t{format_rational(fwd[k])}\t{format_rational(bwd[k])}" for k in fwd)
        return {"forward": fwd, "backward": bwd}, rows, text
    v = product_criterion(ws, H, run.args.schedule)
    by_norms = classify_bilateral(norms_from_system(sys, run.p), run.args.J, H, run.args.schedule)
    body = {
        "weights": _verdicts(v),
        "norms": _verdicts(by_norms),
    }
    rows = [(n, x, tag) for tag in sorted(v.sequences) for n, x in sorted(v.sequences[tag].items())]
    text = f"mixing: {v.mixing.verdict} ({v.mixing.basis})\nhypercyclic: {v.hypercyclic.verdict} ({v.hypercyclic.basis})"
    return body, rows, text


def _verdicts(v) -> dict[str, Any]:
    return {
        "mixing": v.mixing,
        "kitai": v.kitai,
        "hypercyclic": v.hypercyclic,
        "subsequence": v.subsequence,
        "obstruction": v.obstruction,
        "notes": v.notes,
    }


def cmd_orbit(run: Run) -> Output:
    sys, H, p = run.system, run.args.horizon, run.p
    delta = _rational(run.args.delta, "delta", positive=True)
    if run.args.action == "inverse":
        try:
            io = inverse_orbit_floor(sys, run.set, delta, p, H)
        except ValueError as exc:
            raise ConfigError("delta", str(exc)) from None
        body = {"values": io.values, "floor": io.floor, "certified_steps": io.certified_steps, "verdict": io.verdict}
        rows = [(n, v, "inverse") for n, v in io.values.items()]
        return body, rows, f"inverse orbit: {io.verdict}"
    phi = SimpleFunction.indicator(run.set, delta)
    try:
        values = {n: lp_norm_p(sys, apply_op(sys, phi, n), p) for n in range(H + 1)}
    except ValueError as exc:
        raise ConfigError("p", str(exc)) from None
    return {"values": values}, [(n, v, "forward") for n, v in values.items()], "\n".join(
        f"{n}\t{format_rational(v)}" for n, v in values.items()
    )


def cmd_metric(run: Run) -> Output:
    phi = _function(run.args.phi, "phi")
    psi = _function(run.args.psi, "psi")
    d = frechet(run.system, phi, psi)
    return {"distance": d.value, "attained": d.attained}, [(0, d.value, "frechet")], format_rational_short(d.value)


def cmd_reproduce(run: Run) -> Output:
    sys, H, sched = run.system, run.args.horizon, run.args.schedule
    if sys.kind != "bdp":
        raise ConfigError("system", "reproduce runs on the bdp system only")
    if run.args.action == "thm38":
        W = DyadicSet.unit()
        msc = check_msc(sys, 0, W, H, sched)
        ksc = check_ksc(sys, 0, W, run.eps, H, sched)
        rep = classify(sys, H, sched, run.eps)
        body = {
            "MSC": _check_summary(msc),
            "KSC": _check_summary(ksc),
            "labels": rep.labels,
            "mixing": rep.labels["mixing"].verdict,
            "kitai": rep.labels["kitai"].verdict,
            "D_prefix": exceptional_set(sys, H),
            "D_closed_form": bdp_exceptional_closed_form(H),
        }
        rows = _check_rows(msc) + _check_rows(ksc)
        text = f"mixing: {body['mixing']}\nkitai: {body['kitai']}\nD: {body['D_prefix']}"
        return body, rows, text
    ws = weights_from_system(sys, run.p)
    ks = range(-H, H + 1)
    weights = {k: ws(k) for k in ks}
    products = {k: forward_product(ws, k) for k in range(1, H + 1)}
    v = product_criterion(ws, H, sched)
    depth = certificate_depth(H)
    cert = ksc_failure_certificate(sys, wandering_set(), depth) if depth >= 1 else None
    lo, hi = ws.bounds(ks)
    body = {
        "weights_pth_power": weights,
        "weight_bounds": [lo, hi],
        "products": products,
        "D": exceptional_set(sys, H),
        "mixing": v.mixing,
        "hypercyclic": v.hypercyclic,
        "hypercyclic_subsequence": _block_starts(H),
        "notes": v.notes,
        "certificate": certificate_to_dict(cert) if cert else None,
    }
    rows = [(k, w, "weight_p") for k, w in weights.items()] + [(k, x, "product") for k, x in products.items()]
    text = f"mixing: {v.mixing.verdict}\nhypercyclic: {v.hypercyclic.verdict}\nD: {body['D']}"
    return body, rows, text


def _block_starts(H: int) -> list[int]:
    out, N = [], 1
    while block_start(N) <= H:
        out.append(block_start(N))
        N += 1
    return out


def format_rational_short(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else format_rational(q)


COMMANDS: dict[str, Callable[[Run], Output]] = {
    "system": cmd_system,
    "check": cmd_check,
    "classify": cmd_classify,
    "shift": cmd_shift,
    "orbit": cmd_orbit,
    "metric": cmd_metric,
    "reproduce": cmd_reproduce,
}

TEXT_DEFAULT = {"system measure", "metric"}


def run(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or _sys.stdout
    err = err or _sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        r = Run(args)
        body, rows, text = COMMANDS[args.command](r)
    except ConfigError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    except GuardError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_GUARD
    fmt = args.format or ("text" if r.command in TEXT_DEFAULT else "json")
    if fmt == "json":
        out.write(dumps(report(r.command, r.config(), body)))
    elif fmt == "csv":
        out.write(sequences_to_csv(rows))
    else:
        out.write(text + "\n")
    return EXIT_OK


def main() -> None:
    raise SystemExit(run())
