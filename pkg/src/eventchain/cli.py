"""Command line entry point: ``python -m eventchain <command>``."""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from importlib import resources
from pathlib import Path

from . import pipeline as pl
from .agents.backends import LlmBackend
from .agents.evaluation import EvalConfig, WorkflowInputs, run_evaluation
from .behaviors import REFERENCE_BEHAVIORS
from .codeexec import code_factory
from .codegen import parse_template, render
from .constraints import evaluate
from .ingest import diff_components, lower_to_instance, parse_event_chain
from .metamodel import load_instance, serialize_instance
from .sim import AebScenario, load_wiring, run_scenario

log = logging.getLogger("eventchain")


def _backend(spec: str, record: str | None = None) -> LlmBackend:
    """A backend is a fixture file, a JSON backend config, or the name of a shipped fixture.

    ``replay`` names the shipped single-run AEB fixture.
    """
    path = Path(spec)
    if not path.is_file():
        name = "aeb_replay" if spec == "replay" else spec
        shipped = Path(str(resources.files("eventchain").joinpath(f"data/fixtures/{name}.json")))
        if not shipped.is_file():
            raise ValueError(f"backend {spec!r} is neither a file nor a shipped fixture")
        path = shipped
    doc = json.loads(path.read_text("utf-8"))
    if "responses" in doc:
        b = LlmBackend(doc.get("backend", path.stem), kind="replay", fixture_path=str(path))
    else:
        b = LlmBackend.from_dict(doc)
    if record:
        b = dataclasses.replace(b, record_path=record)
    return b


def _config(args) -> pl.PipelineConfig:
    cfg = pl.PipelineConfig.load(args.config) if args.config else pl.PipelineConfig()
    if args.out:
        cfg.out = args.out
    if args.strict:
        cfg.strict = True
    backend = getattr(args, "backend", None)
    if backend:
        b = _backend(backend[0], getattr(args, "record_fixtures", None))
        cfg.backend = dataclasses.asdict(b)
    elif getattr(args, "record_fixtures", None) and cfg.backend is not None:
        cfg.backend = {**cfg.backend, "record_path": args.record_fixtures}
    return cfg


def _emit(text: str, out: str | None, name: str) -> None:
    if out:
        p = Path(out) / name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, "utf-8")
        print(p)
    else:
        sys.stdout.write(text)


def cmd_ingest(args) -> int:
    cfg = _config(args)
    inputs = pl.load_inputs(cfg)
    desc = parse_event_chain(pl._read(args.event_chain or cfg.event_chain, "aeb/event_chain.json"))
    existing, to_generate = diff_components(desc, inputs.components)
    _emit(desc.to_json(), args.out, "event_chain.json")
    _emit(json.dumps({"existing": existing, "to_generate": to_generate}, indent=2) + "\n", args.out, "diff.json")
    return pl.EXIT_OK


def cmd_model(args) -> int:
    cfg = _config(args)
    inputs = pl.load_inputs(cfg)
    desc = parse_event_chain(pl._read(args.event_chain or cfg.event_chain, "aeb/event_chain.json"))
    model = lower_to_instance(desc, inputs.components, inputs.frequency, inputs.metamodel, inputs.chain_name)
    _emit(serialize_instance(model), args.out, "instance.json")
    return pl.EXIT_OK


def _load_model(args, inputs: WorkflowInputs):
    return load_instance(Path(args.model).read_text("utf-8"), inputs.metamodel)


def cmd_validate(args) -> int:
    inputs = pl.load_inputs(_config(args))
    report = evaluate(inputs.constraints, _load_model(args, inputs))
    print(report.to_json() if args.json else report.summary(), end="" if args.json else "\n")
    return pl.EXIT_OK if report.ok else pl.EXIT_GATE


def cmd_generate(args) -> int:
    cfg = _config(args)
    inputs = pl.load_inputs(cfg)
    model = _load_model(args, inputs)
    report = evaluate(inputs.constraints, model)
    if not report.ok:
        print(report.summary(), file=sys.stderr)
        return pl.EXIT_GATE
    out = Path(args.out or cfg.out) / "generated"
    for t in cfg.templates:
        for name, content in render(parse_template(pl._template_text(t)), model).files:
            pl._write(out / name, content)
            print(out / name)
    return pl.EXIT_OK


def _scenario(args) -> AebScenario:
    opts = {k: getattr(args, k) for k in ("v0", "d0", "a_max", "dt", "duration") if getattr(args, k) is not None}
    return AebScenario(**opts)


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    graph = load_wiring(Path(args.manifest).read_text("utf-8"), strict=args.strict, world_topics=sc.world.published)
    behaviors = dict(REFERENCE_BEHAVIORS)
    if args.functions:
        for f in sorted(Path(args.functions).glob("*.py")):
            behaviors[f.stem] = code_factory(f.read_text("utf-8"), f.stem)
    trace = run_scenario(graph, behaviors, sc)
    out = Path(args.out or ".")
    pl._write(out / "trace.csv", trace.to_csv())
    pl._write(out / "messages.jsonl", trace.messages_jsonl())
    pl._write(out / "metrics.json", pl.metrics_json(trace))
    print(json.dumps(trace.summary(), indent=2, sort_keys=True))
    return pl.EXIT_OK if trace.passed else pl.EXIT_SIM


def cmd_eval(args) -> int:
    if not args.backend:
        print("eval needs at least one --backend", file=sys.stderr)
        return pl.EXIT_INPUT
    backends = tuple(_backend(b, args.record_fixtures) for b in args.backend)
    report = run_evaluation(EvalConfig(backends, runs=args.runs, scenario=_scenario(args),
                                       model_source=args.model_source, workers=args.workers))
    print(report.table())
    if args.out:
        pl._write(Path(args.out) / "eval.json", report.to_json())
    return pl.EXIT_OK


def cmd_plot(args) -> int:
    import csv

    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.trace, newline="") as fh:
        rows = list(csv.DictReader(fh))
    t = [float(r["time"]) for r in rows]
    fig, axes = plt.subplots(3, 1, sharex=True, figsize=(7, 7))
    for ax, key, label in zip(axes, ("speed", "gap", "brake_force"), ("speed [m/s]", "gap [m]", "brake force")):
        ax.plot(t, [float(r[key]) for r in rows])
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    axes[-1].set_xlabel("time [s]")
    fig.tight_layout()
    target = args.output or str(Path(args.trace).with_suffix(".png"))
    fig.savefig(target, dpi=120)
    plt.close(fig)
    print(target)
    return pl.EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    if args.backend:
        cfg.event_chain_source = "agent"
    report = pl.run_pipeline(cfg)
    for s in report.stages:
        print(f"{s['stage']:<10} {s['status']}" + (f": {s['error']}" if "error" in s else ""))
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eventchain", description="Event-chain toolchain for the AEB case study.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, backend=False):
        p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--out", help="output directory")
        p.add_argument("--strict", action="store_true", help="reject dangling subscriptions")
        if backend:
            p.add_argument("--backend", action="append",
                           help="fixture file or backend config JSON (repeatable for eval)")
            p.add_argument("--record-fixtures", metavar="PATH", help="record live responses to PATH")

    def scenario(p):
        for name in ("v0", "d0", "a_max", "dt", "duration"):
            p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    p = sub.add_parser("ingest", help="parse an event chain and diff it against the registry")
    common(p)
    p.add_argument("--event-chain")
    p.set_defaults(fn=cmd_ingest)

    p = sub.add_parser("model", help="lower an event chain to an instance model")
    common(p)
    p.add_argument("--event-chain")
    p.set_defaults(fn=cmd_model)

    p = sub.add_parser("validate", help="check the design constraints on an instance model")
    common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("generate", help="render node skeletons and the wiring manifest")
    common(p)
    p.add_argument("--model", required=True)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("simulate", help="run the AEB scenario over a wiring manifest")
    common(p)
    scenario(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--functions", help="directory of <Component>.py files replacing reference behaviors")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("eval", help="score repeated development runs per backend")
    common(p, backend=True)
    scenario(p)
    p.add_argument("--runs", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--model-source", choices=("deterministic", "agent"), default="deterministic")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("plot", help="plot speed, gap and brake force from trace.csv")
    p.add_argument("trace")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_plot)

    p = sub.add_parser("run", help="run the full pipeline")
    common(p, backend=True)
    p.set_defaults(fn=cmd_run)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.fn(args)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return pl.EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
