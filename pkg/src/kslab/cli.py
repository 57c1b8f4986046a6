"""Command-line front end.

    kslab commutators
    kslab ks-predict --model both --trials 100000 --seed 0
    kslab apparatus --stage 2 --input phi+ --follow-up X1X2 --trials 10000
    kslab counterfactual --scenario spin-history
    kslab verify
    kslab --scenario-file scenario.json

Exit codes: 0 success, 1 validation error, 2 invariant failure (verify),
3 parse error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from typing import Any

import jsonschema
import numpy as np

from . import apparatus, counterfactual, hilbert, measurement, nchv, verify
from .hilbert import PATH_SPIN_LABELS, StateVector
from .measurement import RngStream, format_outcome

log = logging.getLogger("kslab")

EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT, EXIT_PARSE = 0, 1, 2, 3

CSV_HEADER = ("label", "probability", "count", "frequency")
NORMALIZATION_WARN = 1e-9

ANCHORS = {
    "commutators": "commutators of the single-spin and product observables",
    "ks-predict": "(Z1X2, X1Z2) outcomes on the (+1,+1) eigenstate of (Z1Z2, X1X2): quantum vs noncontextual",
    "apparatus": "path/spin apparatus: outlet detectors (stage 1) vs beam-combiner detectors (stage 2)",
    "counterfactual": "counterfactual measurement insertion and replacement in recorded histories",
    "verify": "analytic invariant suite",
}

COMMUTATOR_PAIRS = (
    ("Z1", "X1"),
    ("Z2", "X2"),
    ("Z1", "X2"),
    ("X1", "Z2"),
    ("Z1Z2", "X1X2"),
    ("Z1X2", "X1Z2"),
)

INITIAL_CHOICES = ("mixed", "z+", "z-", "x+", "x-")


class ParseError(ValueError):
    pass


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_state(text: str) -> StateVector:
    """Preset name or ``"re,im; re,im; re,im; re,im"`` in (u,+),(u,-),(d,+),(d,-) order."""
    text = text.strip()
    if text in hilbert.STATES:
        return hilbert.STATES[text]
    parts = [p.strip() for p in text.split(";")]
    if len(parts) != 4:
        raise ParseError(f"expected a preset {sorted(hilbert.STATES)} or four 're,im' amplitudes, got {text!r}")
    amps = []
    for p in parts:
        try:
            re_, im_ = (float(x) for x in p.split(","))
        except ValueError:
            raise ParseError(f"bad amplitude {p!r}; expected 're,im'") from None
        amps.append(complex(re_, im_))
    vec = np.array(amps)
    norm = float(np.linalg.norm(vec))
    if norm == 0 or not np.isfinite(norm):
        raise ParseError("amplitudes must be finite and not all zero")
    if abs(norm - 1) > NORMALIZATION_WARN:
        log.warning("state %r has norm %.6g; normalizing", text, norm)
    return StateVector.from_amplitudes(vec, PATH_SPIN_LABELS)


def parse_observable(name: str) -> hilbert.Observable:
    try:
        return hilbert.OBSERVABLES[name.upper()]
    except KeyError:
        raise ParseError(f"unknown observable {name!r}; expected one of {sorted(hilbert.OBSERVABLES)}") from None


@dataclass
class Emission:
    scenario: str
    parameters: dict
    analytic: Any
    sampled: dict | None = None
    text: list[str] = field(default_factory=list)
    rows: list[tuple] = field(default_factory=list)
    exit_code: int = EXIT_OK


def _num(x: float) -> str:
    return f"{x:.12g}"


def cmd_commutators(args) -> Emission:
    rows, text, analytic = [], [], []
    text.append(f"{'pair':<16} {'|[A,B]|_F':>10}  verdict")
    for a, b in COMMUTATOR_PAIRS:
        norm = hilbert.frobenius(hilbert.commutator(hilbert.OBSERVABLES[a], hilbert.OBSERVABLES[b]))
        verdict = "commute" if norm <= hilbert.TOL else "do not commute"
        analytic.append({"a": a, "b": b, "frobenius_norm": norm, "verdict": verdict})
        text.append(f"{f'[{a},{b}]':<16} {_num(norm):>10}  {verdict}")
        rows.append((f"[{a},{b}]", _num(norm), "", ""))
    return Emission("commutators", {}, analytic, text=text, rows=rows)


def cmd_ks_predict(args) -> Emission:
    params = {"model": args.model, "trials": args.trials, "seed": args.seed, "uniform_weights": args.uniform_weights}
    analytic: dict = {}
    sampled = None
    text, rows = [], []
    if args.model in ("qm", "both"):
        dist = measurement.joint_measure(hilbert.PHI_PLUS, hilbert.Z1X2, hilbert.X1Z2)
        analytic["qm"] = {format_outcome(o): p for o, p in dist.probabilities().items()}
        counts = None
        if args.trials:
            drawn = measurement.sample_outcomes(dist, RngStream(args.seed), args.trials)
            counts = {format_outcome(o): drawn.count(o) for o in dist.outcomes()}
            sampled = {
                "trials": args.trials,
                "counts": counts,
                "frequencies": {k: c / args.trials for k, c in counts.items()},
            }
        text.append("quantum mechanics, (Z1X2, X1Z2) on phi+:")
        for o, p in dist.probabilities().items():
            label = format_outcome(o)
            line = f"  {label:<10} p={_num(p)}"
            if counts is not None:
                line += f"  count={counts[label]}  freq={_num(counts[label] / args.trials)}"
            text.append(line)
            if counts is not None:
                rows.append((f"qm:{label}", _num(p), counts[label], _num(counts[label] / args.trials)))
            else:
                rows.append((f"qm:{label}", _num(p), "", ""))
    if args.model in ("nchv", "both"):
        outcomes = nchv.predict_pair(nchv.PLUS_PLUS_PREPARATION, "Z1X2", "X1Z2")
        ordered = [o for o in measurement.JOINT_OUTCOMES if o in outcomes]
        analytic["nchv"] = {"outcomes": [format_outcome(o) for o in ordered]}
        weights = None
        if args.uniform_weights:
            weights = nchv.predict_pair(nchv.PLUS_PLUS_PREPARATION, "Z1X2", "X1Z2", weights=True)
            analytic["nchv"]["uniform_weights"] = {format_outcome(o): float(w) for o, w in weights.items()}
            analytic["nchv"]["note"] = "uniform weights over satisfying assignments are a model choice"
        text.append("noncontextual hidden variables, possible (Z1X2, X1Z2) values:")
        for o in ordered:
            w = f"  weight={_num(float(weights[o]))} (model choice)" if weights else ""
            text.append(f"  {format_outcome(o)}{w}")
            rows.append((f"nchv:{format_outcome(o)}", _num(float(weights[o])) if weights else "", "", ""))
    if args.model == "both":
        qm_set = set(analytic["qm"])
        hv_set = set(analytic["nchv"]["outcomes"])
        analytic["disjoint"] = not (qm_set & hv_set)
        text.append(f"disjoint: {str(analytic['disjoint']).lower()}")
    return Emission("ks-predict", params, analytic, sampled, text, rows)


def cmd_apparatus(args) -> Emission:
    if args.input is None:
        raise UsageError("apparatus needs --input")
    s = parse_state(args.input)
    follow_up = parse_observable(args.follow_up) if args.follow_up else None
    params = {
        "stage": args.stage,
        "input": args.input,
        "follow_up": args.follow_up,
        "trials": args.trials,
        "seed": args.seed,
    }
    if args.stage == 1:
        dist = apparatus.stage1_distribution(s)
        names = tuple(apparatus.DETECTORS)
    else:
        dist = apparatus.stage2_distribution(s)
        names = tuple(apparatus.REGIONS)
    probs = {n: dist.probability(n) for n in names}
    analytic: dict = {
        "regions": probs,
        "product_value": {format_outcome(v): p for v, p in apparatus.product_distribution(args.stage, s).items()},
    }
    fu = None
    if follow_up is not None:
        fu = apparatus.followup_distribution(args.stage, s, follow_up)
        analytic["follow_up"] = {
            f"{r}/{follow_up.name}={format_outcome(v)}": fu.get((r, v), 0.0)
            for r in names
            for v in measurement.OUTCOME_VALUES
        }
    stats = None
    sampled = None
    if args.trials:
        run = apparatus.run_stage1 if args.stage == 1 else apparatus.run_stage2
        stats = run(s, args.trials, RngStream(args.seed), follow_up)
        sampled = {"trials": stats.trials, "counts": dict(stats.counts), "frequencies": stats.frequencies()}
        if stats.follow_up is not None:
            sampled["follow_up"] = {
                f"{r}/{follow_up.name}={format_outcome(v)}": c for (r, v), c in stats.follow_up.items()
            }

    text = [f"stage {args.stage}, input {args.input}"]
    rows = []
    for n in names:
        line = f"  {n:<6} p={_num(probs[n])}"
        if stats is not None:
            c = stats.counts[n]
            line += f"  count={c}  freq={_num(c / stats.trials)}"
            rows.append((n, _num(probs[n]), c, _num(c / stats.trials)))
        else:
            rows.append((n, _num(probs[n]), "", ""))
        text.append(line)
    if follow_up is not None:
        text.append(f"follow-up {follow_up.name}:")
        for n in names:
            for v in measurement.OUTCOME_VALUES:
                label = f"{n}/{follow_up.name}={format_outcome(v)}"
                p = fu.get((n, v), 0.0)
                line = f"  {label:<18} p={_num(p)}"
                if stats is not None:
                    c = stats.follow_up[(n, v)]
                    line += f"  count={c}  freq={_num(c / stats.trials)}"
                    rows.append((label, _num(p), c, _num(c / stats.trials)))
                else:
                    rows.append((label, _num(p), "", ""))
                text.append(line)
        if args.stage == 1:
            text.append("  (detection treated as nondestructive)")
    return Emission("apparatus", params, analytic, sampled, text, rows)


def _initial_ensemble(name: str):
    if name == "mixed":
        return counterfactual.maximally_mixed()
    return ((1.0, hilbert.SPIN_STATES[name]),)


def cmd_counterfactual(args) -> Emission:
    params = {"scenario": args.scenario, "initial": args.initial, "input": args.input}
    text, rows = [], []
    if args.scenario == "spin-history":
        tl, rec = counterfactual.preset_spin_history(_initial_ensemble(args.initial))
        analytic = {"record": {t: format_outcome(v) for t, v in rec.items()}}
        text.append(f"record: X@t1={format_outcome(rec['t1'])}, Z@t2={format_outcome(rec['t2'])}; initial {args.initial}")
        for key, mod in counterfactual.spin_history_modifications().items():
            report = counterfactual.counterfactual_report(tl, rec, mod)
            analytic[key] = report.to_dict()
            later_tags = next(iter(report.given_pivot.values()), {})
            analytic[key]["forced_equal_to_pivot"] = {
                t: counterfactual.forced_equal(report, t) for t in later_tags
            }
            text.append(f"{key}: {report.modification}")
            held = ", ".join(f"{t}={format_outcome(v)}" for t, v in report.held.items()) or "nothing"
            text.append(f"  held: {held}")
            for ev in report.events:
                for o, c in ev.classifications.items():
                    text.append(f"  {ev.name}@{ev.tag}={format_outcome(o):<3} {c}")
                    rows.append((f"{key}:{ev.tag}={format_outcome(o)}", _num(c.probability), "", ""))
            for tag, v, c in report.later_recorded:
                text.append(f"  recorded {tag}={format_outcome(v)} is {c}")
            for tag in analytic[key]["forced_equal_to_pivot"]:
                if analytic[key]["forced_equal_to_pivot"][tag]:
                    text.append(f"  {tag} is Forced equal to {report.pivot} in every branch")
    else:
        inputs = {args.input: parse_state(args.input)} if args.input else None
        cases = counterfactual.apparatus_retrodiction_demo(inputs)
        analytic = {"cases": [c.to_dict() for c in cases]}
        for c in cases:
            text.append(
                f"{c.name}: recorded {c.recorded}; P(BC1)={_num(c.p_bc1)}; "
                f"after inserting pre-combiner detectors: {c.status_with}"
            )
            for det, per in c.routing.items():
                forced = [r for r, cl in per.items() if cl.status is counterfactual.Status.FORCED]
                text.append(f"  {det} -> {forced[0] if forced else 'either'}")
            rows.append((f"{c.name}:{c.recorded} after insertion", _num(c.status_with.probability), "", ""))
    text.append("note: " + counterfactual._VALUE_NOTE)
    return Emission("counterfactual", params, analytic, None, text, rows)


def cmd_verify(args) -> Emission:
    results = verify.run_checks()
    failures = sum(not r.passed for r in results)
    analytic = {
        "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results],
        "failures": failures,
    }
    text = [f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}" for r in results]
    text.append(f"{len(results) - failures}/{len(results)} checks passed")
    rows = [(r.name, "", int(r.passed), "") for r in results]
    code = EXIT_INVARIANT if failures else EXIT_OK
    return Emission("verify", {}, analytic, None, text, rows, exit_code=code)


COMMANDS = {
    "commutators": cmd_commutators,
    "ks-predict": cmd_ks_predict,
    "apparatus": cmd_apparatus,
    "counterfactual": cmd_counterfactual,
    "verify": cmd_verify,
}


def render(em: Emission, fmt: str, deterministic: bool) -> str:
    stamp = None if deterministic else datetime.now(timezone.utc).isoformat(timespec="seconds")
    if fmt == "json":
        doc = {
            "scenario": em.scenario,
            "anchor": ANCHORS[em.scenario],
            "parameters": em.parameters,
            "results": {"analytic": em.analytic, "sampled": em.sampled},
        }
        if stamp:
            doc["generated_at"] = stamp
        return json.dumps(doc, indent=2, sort_keys=False) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(em.rows)
        return buf.getvalue()
    lines = [f"# scenario: {em.scenario}", f"# anchor: {ANCHORS[em.scenario]}"]
    if stamp:
        lines.append(f"# generated_at: {stamp}")
    return "\n".join(lines + em.text) + "\n"


def _add_common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--format", choices=("text", "json", "csv"), default=d("text"))
    p.add_argument("--seed", type=_u64, default=d(0))
    p.add_argument("--trials", type=_trials, default=d(0), help="0 means analytic only")
    p.add_argument("--deterministic", action="store_true", default=d(False), help="omit timestamps")


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _trials(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("trials must be nonnegative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kslab", description="Product-observable measurement and counterfactual laboratory.")
    _add_common(parser, suppress=False)
    parser.add_argument("--scenario-file", help="JSON scenario file {name, parameters}")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("commutators", help="commutator norms of the spin/product observables")
    _add_common(p, suppress=True)

    p = sub.add_parser("ks-predict", help="quantum vs hidden-variable predictions")
    _add_common(p, suppress=True)
    p.add_argument("--model", choices=("qm", "nchv", "both"), default="both")
    p.add_argument("--uniform-weights", action="store_true", help="weight NCHV assignments uniformly (model choice)")

    p = sub.add_parser("apparatus", help="simulate stage 1 or stage 2 of the apparatus")
    _add_common(p, suppress=True)
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p.add_argument("--input", required=True, help="preset name or 're,im; re,im; re,im; re,im'")
    p.add_argument("--follow-up", help="observable measured after detection, e.g. X1X2")

    p = sub.add_parser("counterfactual", help="counterfactual history reports")
    _add_common(p, suppress=True)
    p.add_argument("--scenario", choices=("spin-history", "apparatus-retrodiction"), default="spin-history")
    p.add_argument("--initial", choices=INITIAL_CHOICES, default="mixed", help="initial ensemble for spin-history")
    p.add_argument("--input", help="custom input state for apparatus-retrodiction")

    p = sub.add_parser("verify", help="run the analytic invariant suite")
    _add_common(p, suppress=True)
    return parser


def load_scenario_file(path: str, parser: argparse.ArgumentParser, base: argparse.Namespace) -> argparse.Namespace:
    try:
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    except OSError as exc:
        raise UsageError(f"cannot read scenario file: {exc}") from None
    schema = json.loads(resources.files("kslab").joinpath("schemas/scenario.schema.json").read_text())
    try:
        jsonschema.validate(spec, schema)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"{path}: {exc.message}") from None
    argv = [spec["name"]]
    for key, value in spec.get("parameters", {}).items():
        flag = "--" + key.replace("_", "-")
        if isinstance(value, bool):
            if value:
                argv.append(flag)
        else:
            argv += [flag, str(value)]
    ns = parser.parse_args(argv)
    ns.format, ns.deterministic = base.format, base.deterministic
    return ns


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.scenario_file:
            args = load_scenario_file(args.scenario_file, parser, args)
        if not args.command:
            raise UsageError("no command given")
        emission = COMMANDS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    sys.stdout.write(render(emission, args.format, args.deterministic))
    return emission.exit_code


if __name__ == "__main__":
    sys.exit(main())
