"""``colliderlab`` command line.

Subcommands::

    tasks list
    prompts generate   --out DIR [--domains ...] [--vocab FILE ...] [--tasks ...] [--codes ...]
    query run          --prompts FILE --model NAME --transport live|replay|mock --store DIR --out DIR
    fit cbn|sampler    --judgments FILE [...] --tying 3p[,4p,...] --out DIR
    analyze correlate  --judgments FILE [...] --out DIR
    report figure-data --judgments FILE [...] --bootstrap N --out DIR

Every command that writes files also writes ``manifest.json`` with its
configuration, seed and the SHA-256 of each output. Outputs are staged and
only moved into ``--out`` once the command succeeds.

Exit codes: 0 success, 1 input error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import hashlib
import json
import logging
import shutil
import sys
import tempfile
from collections import defaultdict
from pathlib import Path

import numpy as np

from . import __version__
from .datafiles import ingest_judgments, write_judgments
from .exceptions import ColliderError, InputError, StoreCorruption, TransportError
from .fitting import FitSpec, ModelFamily, fit_model
from .harness import (HTTPTransport, QueryRequest, ReplayTransport, ScriptedTransport, TranscriptStore,
                      run_experiment)
from .model import Tying
from .prompts import BUILTIN_DOMAINS, load_vocabulary, prompt_matrix, read_bundles, write_bundles
from .stats import DOMAINS, HUMAN, AgentType, aggregate, correlation_table
from .tasks import TASK_IDS, TaskGroup, catalog, get_task

logger = logging.getLogger("colliderlab")

EXIT_OK, EXIT_INPUT, EXIT_RUNTIME = 0, 1, 2
GROUP_FILES = {
    TaskGroup.PREDICTIVE: "predictive.csv",
    TaskGroup.INDEPENDENCE: "independence.csv",
    TaskGroup.DIAGNOSTIC_EFFECT_PRESENT: "diagnostic_effect_present.csv",
    TaskGroup.DIAGNOSTIC_EFFECT_ABSENT: "diagnostic_effect_absent.csv",
}
DOMAIN_LABELS = {"economy": "Economy", "sociology": "Sociology", "weather": "Weather"}


def _csv_list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


def _fmt(x, digits=4):
    return "" if x is None else f"{x:.{digits}f}"


class _Outputs:
    """Collects files in a staging directory and publishes them on success."""

    def __init__(self, out_dir):
        self.out = Path(out_dir)
        parent = self.out.parent if self.out.parent.exists() else Path(tempfile.gettempdir())
        self.stage = Path(tempfile.mkdtemp(prefix=".colliderlab-", dir=parent))
        self.files = []

    def path(self, name) -> Path:
        self.files.append(name)
        return self.stage / name

    def publish(self, command, config):
        digests = {name: hashlib.sha256((self.stage / name).read_bytes()).hexdigest()
                   for name in sorted(self.files)}
        manifest = {"tool": "colliderlab", "version": __version__, "command": command,
                    "seed": config.get("seed"), "config": config, "outputs": digests}
        (self.stage / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                                  encoding="utf-8")
        self.out.mkdir(parents=True, exist_ok=True)
        for name in self.files + ["manifest.json"]:
            shutil.move(str(self.stage / name), str(self.out / name))
        shutil.rmtree(self.stage, ignore_errors=True)

    def discard(self):
        shutil.rmtree(self.stage, ignore_errors=True)


@contextlib.contextmanager
def _staged(out_dir):
    outputs = _Outputs(out_dir)
    try:
        yield outputs
    except BaseException:
        outputs.discard()
        raise


def _input_ref(path):
    """Location-independent reference to an input: file name plus content digest."""
    path = Path(path)
    if path.is_dir():
        return {"dir": path.name}
    return {"file": path.name, "sha256": hashlib.sha256(path.read_bytes()).hexdigest()}


def _config(args, *names):
    config = {}
    for name in names:
        value = getattr(args, name)
        if isinstance(value, Path):
            value = _input_ref(value)
        elif isinstance(value, list) and value and isinstance(value[0], Path):
            value = [_input_ref(v) for v in value]
        config[name] = value
    return config


# -- tasks -----------------------------------------------------------------

def cmd_tasks_list(args):
    print(f"{'task':<5} {'group':<26} query")
    for task in catalog():
        print(f"{task.id:<5} {task.group.value:<26} {task.query.notation()}")
    return EXIT_OK


# -- prompts ---------------------------------------------------------------

def cmd_prompts_generate(args):
    vocab_sources = list(args.vocab or []) or _csv_list(args.domains)
    for name in vocab_sources:
        if name not in BUILTIN_DOMAINS and not Path(name).exists():
            raise InputError(f"unknown domain or missing vocabulary file: {name}")
    try:
        vocabs = [load_vocabulary(name) for name in vocab_sources]
    except (ValueError, TypeError) as exc:
        raise InputError(f"invalid vocabulary: {exc}") from exc
    tasks = [get_task(t) for t in _csv_list(args.tasks)]
    codes = [int(c) for c in _csv_list(args.codes)]
    bundles = prompt_matrix(vocabs, tasks, codes)
    with _staged(args.out) as out:
        write_bundles(bundles, out.path("prompts.jsonl"))
        out.publish("prompts generate", {**_config(args, "domains", "tasks", "codes", "seed"),
                                         "vocab": [_input_ref(v) for v in args.vocab or []],
                                         "vocabularies": {v.domain: v.fingerprint() for v in vocabs},
                                         "n_prompts": len(bundles)})
    print(f"wrote {len(bundles)} prompts to {Path(args.out) / 'prompts.jsonl'}")
    return EXIT_OK


# -- query -----------------------------------------------------------------

def _transport(args, store):
    if args.transport == "replay":
        if store is None:
            raise InputError("--transport replay needs --store")
        return ReplayTransport(store)
    if args.transport == "mock":
        if args.mock_responses:
            replies = json.loads(Path(args.mock_responses).read_text(encoding="utf-8"))
            return ScriptedTransport(replies)
        constant = args.mock_constant
        return ScriptedTransport(lambda req: constant)
    return HTTPTransport(args.provider, min_interval=args.min_interval)


def cmd_query_run(args):
    prompts = Path(args.prompts)
    if not prompts.exists():
        raise InputError(f"{prompts}: no such file")
    try:
        bundles = read_bundles(prompts)
    except (ValueError, KeyError) as exc:
        raise InputError(f"{prompts}: malformed prompt file: {exc}") from exc
    store = TranscriptStore(args.store) if args.store else None
    if args.transport == "replay" and store is not None and not store.root.is_dir():
        raise InputError(f"replay store {store.root} does not exist")
    transport = _transport(args, store)
    template = QueryRequest(args.provider, args.model, args.temperature, max_retries=args.max_retries,
                            timeout=args.timeout)
    report = run_experiment(bundles, template, transport, store, concurrency=args.concurrency,
                            lenient=args.lenient)
    with _staged(args.out) as out:
        write_judgments(report.records, out.path("judgments.csv"))
        summary = {"n_bundles": report.n_bundles, "n_records": len(report.records),
                   "n_errors": len(report.errors), "errors": report.errors}
        out.path("run_report.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n",
                                               encoding="utf-8")
        out.publish("query run", {**_config(args, "prompts", "provider", "model", "temperature",
                                            "transport", "store", "lenient", "seed"),
                                  "n_bundles": report.n_bundles})
    print(f"{len(report.records)} judgments, {len(report.errors)} errors from {report.n_bundles} prompts")
    return EXIT_OK


# -- fitting ---------------------------------------------------------------

def _load_judgments(paths):
    records = []
    for path in paths:
        records.extend(ingest_judgments(path))
    if not records:
        raise InputError("no judgments in input")
    return records


def fitting_units(records, unit="auto"):
    """Group records into fitting units: one per human subject, one per LLM condition."""
    units = defaultdict(list)
    for rec in records:
        per_condition = unit == "condition" or (unit == "auto" and rec.agent_type is AgentType.LLM)
        if per_condition:
            key = (rec.agent, f"{rec.domain}/{rec.counterbalance}")
        else:
            key = (rec.agent, rec.agent_id)
        units[key].append(rec)
    return dict(sorted(units.items()))


_PARAM_COLUMNS = {
    "prior": "w_C", "prior_c1": "w_C1", "prior_c2": "w_C2",
    "strength": "w_{C,E}", "strength_c1": "w_{C1,E}", "strength_c2": "w_{C2,E}",
    "bias_e": "w_E", "chain_length": "lambda",
}


def _fit_units(records, family, tyings, args):
    rows = []
    for (agent, unit), recs in fitting_units(records, args.unit).items():
        judgments = [(get_task(r.task_id), r.response) for r in recs]
        for tying in tyings:
            spec = FitSpec(family, tying, args.generating, seed=args.seed, top_k=args.top_k,
                           sampler_method=args.method, chain_count=args.chain_count)
            result = fit_model(spec, judgments)
            values = dict(zip(spec.parameter_names, spec.encode(result.parameters)))
            rows.append({"agent": agent, "unit": unit, "tying": spec.tying.value, "spec": spec,
                         "values": values, "result": result})
            logger.info("fit %s %s %s: sse=%.4g", agent, unit, tying, result.sse)
    return rows


def _summary_columns(rows):
    names = []
    for row in rows:
        for name in row["values"]:
            if _PARAM_COLUMNS[name] not in names:
                names.append(_PARAM_COLUMNS[name])
    order = ["w_C", "w_C1", "w_C2", "w_{C,E}", "w_{C1,E}", "w_{C2,E}", "w_E", "lambda"]
    return [c for c in order if c in names]


def _write_fit_tables(rows, fits_path, summary_path):
    param_cols = _summary_columns(rows)
    with open(fits_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["Agent", "unit", "tying", "NP", *param_cols, "SSE", "R", "AIC", "Loss", "n",
                         "converged"])
        for row in rows:
            res = row["result"]
            cols = {_PARAM_COLUMNS[k]: v for k, v in row["values"].items()}
            writer.writerow([row["agent"], row["unit"], row["tying"], res.n_params,
                             *[repr(float(cols[c])) if c in cols else "" for c in param_cols],
                             repr(res.sse), "" if res.r_fit is None else repr(res.r_fit), repr(res.aic),
                             repr(res.mae_loss), res.n_observations, int(res.converged)])

    groups = defaultdict(list)
    for row in rows:
        groups[(row["agent"], row["tying"])].append(row)
    mean_aic = {key: float(np.mean([r["result"].aic for r in group])) for key, group in groups.items()}
    with open(summary_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["Agent", "NP", *param_cols, "R", "AIC", "Loss", "n_fits", "winner"])
        for (agent, tying), group in sorted(groups.items(), key=lambda kv: (kv[0][0], Tying(kv[0][1]).n_params)):
            best = min((key for key in mean_aic if key[0] == agent), key=lambda k: mean_aic[k])
            params = []
            for col in param_cols:
                vals = [r["values"][k] for r in group for k in r["values"] if _PARAM_COLUMNS[k] == col]
                params.append(_fmt(float(np.mean(vals)), 3) if vals else "")
            rs = [r["result"].r_fit for r in group if r["result"].r_fit is not None]
            writer.writerow([agent, group[0]["result"].n_params, *params,
                             _fmt(float(np.mean(rs)), 3) if rs else "",
                             _fmt(mean_aic[(agent, tying)], 1),
                             _fmt(float(np.mean([r["result"].mae_loss for r in group])), 2),
                             len(group), "*" if best == (agent, tying) else ""])


def cmd_fit(args):
    records = _load_judgments(args.judgments)
    tyings = [Tying(t) for t in _csv_list(args.tying)]
    family = ModelFamily.CBN if args.model == "cbn" else ModelFamily.MUTATION_SAMPLER
    rows = _fit_units(records, family, tyings, args)
    with _staged(args.out) as out:
        _write_fit_tables(rows, out.path("fits.csv"), out.path("summary.csv"))
        out.publish(f"fit {args.model}", {**_config(args, "tying", "generating", "seed", "top_k", "unit",
                                                    "method", "chain_count", "judgments")})
    print(Path(args.out, "summary.csv").read_text(encoding="utf-8"), end="")
    return EXIT_OK


# -- analysis --------------------------------------------------------------

def cmd_analyze_correlate(args):
    records = _load_judgments(args.judgments)
    try:
        table = correlation_table(records, reference=args.reference)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    with _staged(args.out) as out:
        with open(out.path("correlations.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["Model", *[f"{DOMAIN_LABELS[d]} (r_s)" for d in DOMAINS], "Pooled"])
            for row in table:
                writer.writerow([row.model, *[_fmt(row.by_domain[d], 3) for d in DOMAINS],
                                 _fmt(row.pooled, 3)])
        out.publish("analyze correlate", {**_config(args, "reference", "seed", "judgments")})
    print(Path(args.out, "correlations.csv").read_text(encoding="utf-8"), end="")
    return EXIT_OK


def cmd_report_figure_data(args):
    records = _load_judgments(args.judgments)
    rows = aggregate(records, ("agent",), replicates=args.bootstrap, level=args.level, seed=args.seed)
    agents = sorted({row.get("agent") for row in rows}, key=lambda a: (a != HUMAN, a))
    cells = {(row.get("agent"), row.task_id): row for row in rows}
    header = ["task_id", "query"]
    for agent in agents:
        header += [f"{agent} mean", f"{agent} ci_low", f"{agent} ci_high", f"{agent} n"]
    with _staged(args.out) as out:
        for group, name in GROUP_FILES.items():
            with open(out.path(name), "w", encoding="utf-8", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                for task in catalog():
                    if task.group is not group:
                        continue
                    line = [task.id, task.query.notation()]
                    for agent in agents:
                        cell = cells.get((agent, task.id))
                        line += ([_fmt(cell.mean), _fmt(cell.ci_low), _fmt(cell.ci_high), cell.n]
                                 if cell else ["", "", "", 0])
                    writer.writerow(line)
        out.publish("report figure-data", {**_config(args, "bootstrap", "level", "seed", "judgments"),
                                           "agents": agents})
    print(f"wrote {len(GROUP_FILES)} group files to {args.out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colliderlab", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"colliderlab {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out=True):
        p.add_argument("--seed", type=int, default=0)
        if out:
            p.add_argument("--out", type=Path, required=True)

    tasks = sub.add_parser("tasks").add_subparsers(dest="action", required=True)
    tasks.add_parser("list").set_defaults(func=cmd_tasks_list)

    prompts = sub.add_parser("prompts").add_subparsers(dest="action", required=True)
    gen = prompts.add_parser("generate")
    common(gen)
    gen.add_argument("--domains", default=",".join(DOMAINS))
    gen.add_argument("--vocab", action="append", help="vocabulary JSON file (repeatable; overrides --domains)")
    gen.add_argument("--tasks", default=",".join(TASK_IDS))
    gen.add_argument("--codes", default="1,2,3,4")
    gen.set_defaults(func=cmd_prompts_generate)

    query = sub.add_parser("query").add_subparsers(dest="action", required=True)
    run = query.add_parser("run")
    common(run)
    run.add_argument("--prompts", type=Path, required=True)
    run.add_argument("--provider", default="openai")
    run.add_argument("--model", required=True)
    run.add_argument("--temperature", type=float, default=0.0)
    run.add_argument("--transport", choices=("live", "replay", "mock"), default="replay")
    run.add_argument("--store", type=Path)
    run.add_argument("--mock-responses", type=Path, help="JSON object: prompt or request hash -> reply")
    run.add_argument("--mock-constant", default="50")
    run.add_argument("--lenient", action="store_true", help="take the first number in prose replies")
    run.add_argument("--concurrency", type=int, default=4)
    run.add_argument("--max-retries", type=int, default=3)
    run.add_argument("--timeout", type=float, default=60.0)
    run.add_argument("--min-interval", type=float, default=0.0, help="seconds between live requests")
    run.set_defaults(func=cmd_query_run)

    fit = sub.add_parser("fit")
    fit.add_argument("model", choices=("cbn", "sampler"))
    common(fit)
    fit.add_argument("--judgments", type=Path, action="append", required=True)
    fit.add_argument("--tying", default="3p", help="comma list of 3p, 4p, freeprior, 5p")
    fit.add_argument("--generating", choices=("logistic", "noisyor"), default="logistic")
    fit.add_argument("--unit", choices=("auto", "agent", "condition"), default="auto")
    fit.add_argument("--top-k", type=int, default=5)
    fit.add_argument("--method", choices=("exact", "montecarlo"), default="exact")
    fit.add_argument("--chain-count", type=int, default=2000)
    fit.set_defaults(func=cmd_fit)

    analyze = sub.add_parser("analyze").add_subparsers(dest="action", required=True)
    corr = analyze.add_parser("correlate")
    common(corr)
    corr.add_argument("--judgments", type=Path, action="append", required=True)
    corr.add_argument("--reference", default=HUMAN)
    corr.set_defaults(func=cmd_analyze_correlate)

    report = sub.add_parser("report").add_subparsers(dest="action", required=True)
    fig = report.add_parser("figure-data")
    common(fig)
    fig.add_argument("--judgments", type=Path, action="append", required=True)
    fig.add_argument("--bootstrap", type=int, default=2000)
    fig.add_argument("--level", type=float, default=0.95)
    fig.set_defaults(func=cmd_report_figure_data)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TransportError, StoreCorruption, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError) as exc:
        # InputError, UnknownTask, ParameterOutOfRange and other bad-input failures
        print(f"error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return EXIT_INPUT
    except ColliderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

if __name__ == "__main__":
    sys.exit(main())
