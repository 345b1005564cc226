"""Batch experiment runner: ``pqlab run <config.json>`` and ``pqlab verify <summary.json>``.

A config is one JSON object with a ``kind`` field plus that kind's
parameters; ``--seed``, ``--out`` and ``--set KEY=VALUE`` override fields.
Each run writes ``<name>.summary.json`` (and ``<name>.csv`` for kinds with
per-row data) into the output directory.  Exit status: 0 success, 2 invalid
config or precondition, 3 cap breach.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .commlab import (
    DEFAULT_SAMPLE_CAP,
    DEFAULT_TUPLE_CAP,
    AnswerFamily,
    SingleInputProblem,
    TwoSidedProblem,
    brute_force_one_way_cost,
    concept_to_comm,
    conversion_errors,
    convert_to_classical,
    func_eval_problem,
    mutual_information,
    random_conversion_instance,
    random_two_sided,
    refinement_bounds,
    single_input_transform,
)
from .concepts import Concept, Hypothesis, all_concepts, valid_answer
from .errors import CapExceeded
from .modmath import check_odd_prime
from .pq_learner import (
    CSV_COLUMNS,
    TrialRecord,
    default_workers,
    learn_exact,
    learn_exact_branches,
    run_trials,
    trial_rng,
)
from .speakability import approx_cover_oracle, concepts_approximated_by, counting_audit

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_CAP = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class Outcome:
    result: dict
    invariants: dict[str, bool]
    columns: tuple[str, ...] | None = None
    rows: list[list[Any]] | None = None
    report: str | None = None


def _fmt(v: Any) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return format(v, ".12g")
    return "" if v is None else str(v)


def _clean(obj: Any) -> Any:
    """JSON-ready copy with numpy scalars unwrapped and floats at 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x) or math.isnan(x):
            return str(x)
        return float(format(x, ".12g"))
    return obj


def _need(cfg: dict, key: str, kind: type | tuple = int):
    if key not in cfg:
        raise ConfigError(f"missing parameter {key!r}")
    v = cfg[key]
    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise ConfigError(f"parameter {key!r} must be an integer")
    if kind is float and not isinstance(v, (int, float)):
        raise ConfigError(f"parameter {key!r} must be a number")
    return v


def _odd_prime(cfg: dict) -> int:
    n = _need(cfg, "N")
    try:
        check_odd_prime(n)
    except ValueError as e:
        raise ConfigError(str(e)) from None
    return n


# -- experiment kinds ---------------------------------------------------------
# Each kind has a validator (raises before any work starts) and a runner.

def _check_learn_sim(cfg):
    n = _odd_prime(cfg)
    if _need(cfg, "k") < 1:
        raise ConfigError("k must be at least 1")
    if _need(cfg, "trials") < 1:
        raise ConfigError("trials must be at least 1")
    if cfg.get("query_policy", "uniform-random") not in ("all-queries", "uniform-random"):
        raise ConfigError("query_policy must be all-queries or uniform-random")
    if "concept" in cfg and len(cfg["concept"]) != n:
        raise ConfigError("concept length must equal N")


def _trial_rows(records) -> list[list[Any]]:
    return [r.csv_row() for r in records]


def _run_learn_sim(cfg, seed):
    n, k, trials = cfg["N"], cfg["k"], cfg["trials"]
    concept = Concept.from_string(cfg["concept"]) if "concept" in cfg else None
    stats = run_trials(n, k, trials, seed, cfg.get("query_policy", "uniform-random"), concept, default_workers())
    s = stats.summary()
    sd = math.sqrt(0.5**k * (1 - 0.5**k) / s["queries_asked"])
    return Outcome(
        result=s,
        invariants={
            "no_wrong_answers": s["wrong"] == 0,
            "give_up_within_3sd": abs(s["give_up_fraction"] - 0.5**k) <= 3 * sd,
        },
        columns=CSV_COLUMNS,
        rows=_trial_rows(stats.records),
    )


def _check_exact_learn(cfg):
    n = _odd_prime(cfg)
    if _need(cfg, "trials") < 1:
        raise ConfigError("trials must be at least 1")
    if cfg.get("enumerate", n <= 7) and n > 7:
        raise ConfigError("enumerated check is limited to N <= 7")


def _run_exact_learn(cfg, seed):
    n, trials = cfg["N"], cfg["trials"]
    records = []
    for t in range(trials):
        rng = trial_rng(seed, t)
        c = Concept.random(n, rng)
        q = int(rng.integers(1, n))
        ans = learn_exact(c, q, rng)
        records.append(TrialRecord(t, n, 1, q, False, ans, valid_answer(c, q, ans), seed, str(c)))
    wrong = sum(not r.correct for r in records)
    result = {"N": n, "trials": trials, "give_ups": 0, "wrong": wrong}
    invariants = {"no_wrong_answers": wrong == 0}
    if cfg.get("enumerate", n <= 7):
        reachable_wrong, total = 0, 0
        for c in all_concepts(n):
            for q in range(1, n):
                for p, ans in learn_exact_branches(c, q):
                    total += 1
                    reachable_wrong += not valid_answer(c, q, ans)
        result.update(enumerated_branches=total, enumerated_wrong=reachable_wrong)
        invariants["enumerated_all_valid"] = reachable_wrong == 0
    return Outcome(result, invariants, CSV_COLUMNS, _trial_rows(records))


def _check_min_cover(cfg):
    _odd_prime(cfg)
    if cfg.get("mode", "exact") not in ("exact", "greedy"):
        raise ConfigError("mode must be exact or greedy")


def _run_min_cover(cfg, seed):
    cert = approx_cover_oracle(cfg["N"], cfg.get("mode", "exact"))
    return Outcome({"certificate": cert.to_json()}, {"coverage_verified": cert.verify()})


def _check_counting_audit(cfg):
    n = _odd_prime(cfg)
    if n > 5 and "h0" not in cfg:
        raise CapExceeded("audits derived from exact covers need N <= 5")
    if "h0" in cfg:
        Hypothesis.from_pairs(n, [tuple(p) for p in cfg["h0"]])


def _audit_table(audits) -> str:
    out = io.StringIO()
    for i, a in enumerate(audits):
        out.write(f"audit {i}: N={a.modulus} |C0|={len(a.c0)} Q0={a.q0} Q0'={a.q0_prime}\n")
        for name, ok in a.checks.items():
            out.write(f"  {'ok ' if ok else 'FAIL'} {name}\n")
        for name, v in a.values.items():
            out.write(f"  {name:>24} = {v:.12g}\n")
    return out.getvalue()


def _run_counting_audit(cfg, seed):
    n = cfg["N"]
    if "h0" in cfg:
        hs = [Hypothesis.from_pairs(n, [tuple(p) for p in cfg["h0"]])]
    else:
        hs = approx_cover_oracle(n, "exact").cover
    audits = [counting_audit(h, concepts_approximated_by(h)) for h in hs]
    return Outcome(
        {"audits": [a.to_json() for a in audits]},
        {"all_audited_inequalities_hold": all(a.all_hold for a in audits)},
        report=_audit_table(audits),
    )


def _conversion_inputs(cfg, rng):
    if "family" in cfg:
        fam = AnswerFamily.from_json(cfg["family"])
        rel = frozenset((x, z) for x, z in cfg["relation"])
        prob = SingleInputProblem(fam.inputs, fam.answers, rel, fam.prior)
        return [(fam, prob, float(cfg["eps"]), float(cfg.get("m", mutual_information(fam))))]
    out = []
    for _ in range(cfg.get("instances", 1)):
        inst = random_conversion_instance(rng, cap=cfg.get("sample_cap", DEFAULT_SAMPLE_CAP))
        out.append((inst.family, inst.problem, inst.eps, inst.m))
    return out


def _check_comm_convert(cfg):
    if "family" in cfg:
        if "relation" not in cfg or "eps" not in cfg:
            raise ConfigError("explicit family needs relation and eps")
        fam = AnswerFamily.from_json(cfg["family"])
        eps = _need(cfg, "eps", float)
        if not 0 < eps < 1:
            raise ConfigError("eps must lie in (0, 1)")
        info = mutual_information(fam)
        m = float(cfg.get("m", info))
        if m < info - 1e-6:
            raise ConfigError(f"declared cost m={m} is below I(A;B)={info:.6g}")
        if 11 * m / (eps * (1 - eps)) > math.log2(cfg.get("sample_cap", DEFAULT_SAMPLE_CAP)):
            raise CapExceeded("sample count exceeds the cap")
    elif _need(cfg, "instances") < 1:
        raise ConfigError("instances must be at least 1")
    if cfg.get("draws", 1000) < 1:
        raise ConfigError("draws must be at least 1")


CONVERT_COLUMNS = (
    "instance", "nx", "nz", "eps", "m", "M", "cost_bits", "family_error",
    "mean_error", "max_error", "expected_error", "per_x_stated_ok", "per_x_entropy_ok", "aggregate_ok",
)


def _run_comm_convert(cfg, seed):
    rng = np.random.default_rng([seed, 0])
    draws = cfg.get("draws", 1000)
    cap = cfg.get("sample_cap", DEFAULT_SAMPLE_CAP)
    rows, reports = [], []
    for i, (fam, prob, eps, m) in enumerate(_conversion_inputs(cfg, rng)):
        _, rep = convert_to_classical(fam, prob, eps, m, np.random.default_rng([seed, 1, i]), cap)
        errs = conversion_errors(fam, prob, eps, m, draws, seed=seed * 1000 + i, cap=cap)
        bounds = refinement_bounds(fam, prob, m)
        rows.append([
            i, len(fam.inputs), len(fam.answers), eps, m, rep.samples, rep.cost_bits, rep.family_error,
            float(errs.mean()), float(errs.max()), rep.expected_error,
            bool(bounds.per_input_stated_holds.all()), bool(bounds.per_input_entropy_holds.all()),
            bounds.aggregate_holds,
        ])
        reports.append({"conversion": rep.to_json(), "bounds": bounds.to_json(), "mean_error": float(errs.mean())})
    return Outcome(
        {"instances": reports},
        {
            "mean_error_within_eps": all(r[8] <= r[3] for r in rows),
            "per_input_entropy_bound": all(r[12] for r in rows),
        },
        CONVERT_COLUMNS,
        rows,
    )


def _check_si_transform(cfg):
    eps = cfg.get("eps", [0.5])
    for e in eps:
        if not 0 < e < 1:
            raise ConfigError("transform thresholds must lie in (0, 1)")
    for d in cfg.get("delta", [0.1]):
        if not 0 <= d <= 1:
            raise ConfigError("error levels must lie in [0, 1]")
    if _need(cfg, "instances") < 1:
        raise ConfigError("instances must be at least 1")


SI_COLUMNS = ("instance", "nx", "ny", "nz", "eps", "delta", "cost_P", "cost_Pprime_paired", "cost_Pprime_same_delta")


def _messages(r) -> int | None:
    return r.messages


def _run_si_transform(cfg, seed):
    rng = np.random.default_rng([seed, 0])
    rows = []
    for i in range(cfg["instances"]):
        p = random_two_sided(rng)
        for eps in cfg.get("eps", [0.5]):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                pp = single_input_transform(p, eps, cfg.get("tuple_cap", DEFAULT_TUPLE_CAP))
            for delta in cfg.get("delta", [0.1]):
                c = brute_force_one_way_cost(p, delta, max_answers=len(p.zs))
                paired = brute_force_one_way_cost(pp, min(1.0, delta / (1 - eps)), max_answers=len(pp.answers))
                same = brute_force_one_way_cost(pp, delta, max_answers=len(pp.answers))
                rows.append([i, len(p.xs), len(p.ys), len(p.zs), eps, delta,
                             _messages(c), _messages(paired), _messages(same)])

    def le(a, b):
        return b is None or (a is not None and a <= b)

    paired_ok = sum(le(r[7], r[6]) for r in rows)
    same_ok = sum(le(r[8], r[6]) for r in rows)
    return Outcome(
        {"comparisons": len(rows), "paired_holds": paired_ok, "same_delta_holds": same_ok},
        {"paired_cost_never_larger": paired_ok == len(rows)},
        SI_COLUMNS,
        rows,
    )


def _cost_problem(cfg):
    name = cfg.get("problem")
    if name == "equality":
        size = cfg.get("size", 4)
        xs = tuple(range(size))
        return SingleInputProblem(xs, xs, frozenset((x, x) for x in xs), np.full(size, 1 / size)), {}
    if name == "func-eval":
        return func_eval_problem(cfg["functions"], cfg["domain"]), {}
    if name == "concept-comm":
        p = concept_to_comm(cfg["N"], Fraction(cfg.get("threshold", "4/5")))
        return p, {"max_inputs": len(p.inputs), "max_answers": len(p.answers)}
    if name == "two-sided":
        rel = frozenset(tuple(t) for t in cfg["relation"])
        return TwoSidedProblem(tuple(cfg["X"]), tuple(cfg["Y"]), tuple(cfg["Z"]), rel, np.array(cfg["mu"])), {}
    raise ConfigError(f"unknown problem {name!r}")


def _check_cost_search(cfg):
    eps = _need(cfg, "eps", float)
    if not 0 <= eps <= 1:
        raise ConfigError("eps must lie in [0, 1]")
    if cfg.get("problem") not in ("equality", "func-eval", "concept-comm", "two-sided"):
        raise ConfigError(f"unknown problem {cfg.get('problem')!r}")


def _run_cost_search(cfg, seed):
    p, caps = _cost_problem(cfg)
    caps.update(cfg.get("caps", {}))
    r = brute_force_one_way_cost(p, cfg["eps"], **caps)
    return Outcome({"messages": r.messages, "bits": r.bits, "success": r.success}, {"solvable": r.messages is not None})


KINDS: dict[str, tuple[Callable, Callable]] = {
    "learn-sim": (_check_learn_sim, _run_learn_sim),
    "exact-learn": (_check_exact_learn, _run_exact_learn),
    "min-cover": (_check_min_cover, _run_min_cover),
    "counting-audit": (_check_counting_audit, _run_counting_audit),
    "comm-convert": (_check_comm_convert, _run_comm_convert),
    "si-transform": (_check_si_transform, _run_si_transform),
    "cost-search": (_check_cost_search, _run_cost_search),
}


# -- driver -------------------------------------------------------------------

def validate(cfg: dict) -> None:
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    kind = cfg.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}")
    seed = _need(cfg, "seed")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit unsigned integer")
    KINDS[kind][0](cfg)


def execute(cfg: dict) -> tuple[dict, Outcome]:
    """Validate and run ``cfg``; return the summary document and raw outcome."""
    validate(cfg)
    outcome = KINDS[cfg["kind"]][1](cfg, cfg["seed"])
    name = cfg.get("name", cfg["kind"])
    files = [f"{name}.summary.json"] + ([f"{name}.csv"] if outcome.rows is not None else [])
    summary = {
        "artifact": {"name": "pqlab", "version": __version__},
        "kind": cfg["kind"],
        "seed": cfg["seed"],
        "config": cfg,
        "files": files,
        "result": outcome.result,
        "invariants": outcome.invariants,
    }
    return _clean(summary), outcome


def dump_summary(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def dump_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_config(cfg: dict, out_dir: str | os.PathLike) -> int:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if not os.access(out, os.W_OK):
            raise OSError(f"{out} is not writable")
    except OSError as e:
        print(f"error: cannot write to output directory: {e}", file=sys.stderr)
        return EXIT_INVALID
    try:
        summary, outcome = execute(cfg)
    except CapExceeded as e:
        print(f"cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ValueError, KeyError, TypeError) as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID
    name = cfg.get("name", cfg["kind"])
    if outcome.rows is not None:
        (out / f"{name}.csv").write_text(dump_csv(outcome.columns, outcome.rows))
    (out / f"{name}.summary.json").write_text(dump_summary(summary))
    if outcome.report:
        print(outcome.report, end="")
    for k, ok in summary["invariants"].items():
        print(f"{'PASS' if ok else 'FAIL'} {k}")
    return EXIT_OK


def _parse_override(text: str) -> tuple[str, Any]:
    key, sep, raw = text.partition("=")
    if not sep:
        raise ConfigError(f"override {text!r} is not KEY=VALUE")
    try:
        return key, json.loads(raw)
    except json.JSONDecodeError:
        return key, raw


def load_config(path: str) -> dict:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return json.loads(text)


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
        for item in args.set or []:
            k, v = _parse_override(item)
            cfg[k] = v
    except (OSError, json.JSONDecodeError, ConfigError) as e:
        print(f"invalid config: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.seed is not None:
        cfg["seed"] = args.seed
    out = args.out or cfg.pop("out", None) or "."
    return run_config(cfg, out)


def _cmd_verify(args) -> int:
    """Re-run the embedded config and compare against the stored summary."""
    try:
        stored_text = Path(args.summary).read_text()
        stored = json.loads(stored_text)
        cfg = stored["config"]
    except (OSError, json.JSONDecodeError, KeyError) as e:
        print(f"unreadable summary: {e}", file=sys.stderr)
        return EXIT_INVALID
    with tempfile.TemporaryDirectory() as tmp:
        with open(os.devnull, "w") as devnull:
            saved, sys.stdout = sys.stdout, devnull
            try:
                code = run_config(cfg, tmp)
            finally:
                sys.stdout = saved
        if code != EXIT_OK:
            return code
        fresh_text = (Path(tmp) / stored["files"][0]).read_text()
        csv_same = True
        if len(stored["files"]) > 1:
            stored_csv = Path(args.summary).parent / stored["files"][1]
            if stored_csv.exists():
                csv_same = stored_csv.read_text() == (Path(tmp) / stored["files"][1]).read_text()
    checks = {"summary_reproduced": fresh_text == stored_text, "csv_reproduced": csv_same}
    checks.update({f"invariant:{k}": bool(v) for k, v in stored["invariants"].items()})
    for k, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {k}")
    return EXIT_OK if all(checks.values()) else EXIT_FAIL


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="pqlab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config", help="path to a JSON config, or - for stdin")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", help="output directory (default: the config's out field, else .)")
    r.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config field (JSON value)")
    r.set_defaults(func=_cmd_run)
    v = sub.add_parser("verify", help="re-check a summary written by run")
    v.add_argument("summary")
    v.set_defaults(func=_cmd_verify)
    args = ap.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
