"""End-to-end pipeline: requirements to generated nodes to a simulated AEB run.

Stages run in order and each writes its artifact into the output directory:

    ingest      event_chain.json
    diff        diff.json
    model       instance.json
    validate    validation.json   (gate: nothing is generated past a failure)
    generate    generated/*.py, generated/wiring_manifest.json
    functions   functions/<Component>.py   (agent-sourced code only)
    simulate    trace.csv, messages.jsonl, metrics.json
    report      report.json

Exit codes: 0 success, 1 bad input, 2 validation gate, 3 backend, 4 simulation.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import shutil
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .agents.backends import BackendError, LlmBackend, complete
from .agents.evaluation import (WorkflowInputs, build_model, event_chain_prompt, generate_function_code,
                                scenario_behaviors)
from .agents.extract import ExtractionError, extract_artifact
from .behaviors import REFERENCE_BEHAVIORS
from .codegen import QueryError, RenderError, TemplateSyntaxError, parse_template, render, shipped_template
from .constraints import (ConstraintSyntaxError, UnknownContextError, evaluate, parse_constraints,
                          shipped_constraints)
from .ingest import (FrequencyPolicy, FrequencyPolicyError, LoweringError, SchemaError, diff_components,
                     parse_component_registry, parse_event_chain, parse_signal_registry)
from .metamodel import ModelError, serialize_instance
from .sim import AebScenario, ScenarioError, ScenarioTrace, WiringError, WorldBinding, load_wiring, run_scenario

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INPUT, EXIT_GATE, EXIT_BACKEND, EXIT_SIM = 0, 1, 2, 3, 4

DEFAULT_TEMPLATES = ("ros_node.tmpl", "wiring_manifest.tmpl")
MANIFEST = "wiring_manifest.json"


@dataclass
class PipelineConfig:
    """Paths default to the shipped AEB case study when left as ``None``."""
    out: str = "out"
    requirements: str | None = None
    components: str | None = None
    signals: str | None = None
    event_chain: str | None = None
    metamodel: str | None = None
    constraints: str | None = None
    templates: tuple[str, ...] = DEFAULT_TEMPLATES
    event_chain_source: str = "file"      # file | agent
    model_source: str = "deterministic"   # deterministic | agent
    functions: str = "reference"          # reference | agent
    backend: dict | None = None
    chain_name: str = "AEB"
    default_frequency: float = 20.0
    frequencies: dict[str, float] = field(default_factory=dict)
    scenario: dict[str, Any] = field(default_factory=dict)
    strict: bool = True

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ValueError(f"unknown config key(s): {unknown}")
        d = dict(d)
        if base is not None:
            for key in ("out", "requirements", "components", "signals", "event_chain", "metamodel",
                        "constraints"):
                if d.get(key) is not None:
                    d[key] = str(base / d[key])
        if "templates" in d:
            d["templates"] = tuple(d["templates"])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        p = Path(path)
        return cls.from_dict(json.loads(p.read_text("utf-8")), base=p.parent)

    def llm(self) -> LlmBackend | None:
        return None if self.backend is None else LlmBackend.from_dict(self.backend)

    def aeb_scenario(self) -> AebScenario:
        opts = dict(self.scenario)
        world = opts.pop("world", None)
        if world is not None:
            opts["world"] = WorldBinding(**world)
        return AebScenario(**opts)


@dataclass
class PipelineReport:
    exit_code: int = EXIT_OK
    stages: list[dict] = field(default_factory=list)
    summary: dict | None = None

    def stage(self, name: str, status: str, **detail) -> None:
        self.stages.append({"stage": name, "status": status, **detail})

    def to_json(self) -> str:
        return json.dumps({"exit_code": self.exit_code, "stages": self.stages, "scenario": self.summary},
                          indent=2, sort_keys=True) + "\n"


class _Stop(Exception):
    def __init__(self, code: int, stage: str, message: str):
        self.code, self.stage, self.message = code, stage, message
        super().__init__(message)


def _read(path: str | None, shipped: str) -> str:
    if path is None:
        return resources.files("eventchain").joinpath(f"data/{shipped}").read_text("utf-8")
    return Path(path).read_text("utf-8")


def _template_text(name: str) -> str:
    p = Path(name)
    return p.read_text("utf-8") if p.is_file() else shipped_template(name)


def load_inputs(cfg: PipelineConfig) -> WorkflowInputs:
    return WorkflowInputs(
        requirements=_read(cfg.requirements, "aeb/requirements.md"),
        components=parse_component_registry(_read(cfg.components, "aeb/components.json")),
        signals=parse_signal_registry(_read(cfg.signals, "aeb/signals.json")),
        metamodel_text=_read(cfg.metamodel, "metamodel/event_chain.json"),
        constraints=parse_constraints(Path(cfg.constraints).read_text("utf-8") if cfg.constraints
                                      else shipped_constraints()),
        frequency=FrequencyPolicy(dict(cfg.frequencies), cfg.default_frequency),
        chain_name=cfg.chain_name,
    )


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, "utf-8")


def metrics_json(trace: ScenarioTrace) -> str:
    """Runtime metrics per SoftwareNode, keyed by the node's instance-model id."""
    doc = {f"node_{name}": {"name": name, **dataclasses.asdict(m)} for name, m in sorted(trace.metrics.items())}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_pipeline(cfg: PipelineConfig) -> PipelineReport:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report = PipelineReport()
    try:
        _run(cfg, out, report)
    except _Stop as stop:
        report.exit_code = stop.code
        report.stage(stop.stage, "failed", error=stop.message)
        log.error("%s: %s", stop.stage, stop.message)
    _write(out / "report.json", report.to_json())
    return report


def _run(cfg: PipelineConfig, out: Path, report: PipelineReport) -> None:
    backend = cfg.llm()
    needs_backend = "agent" in (cfg.event_chain_source, cfg.model_source, cfg.functions)
    if needs_backend and backend is None:
        raise _Stop(EXIT_INPUT, "config", "an agent stage is selected but no backend is configured")

    # ingest
    try:
        inputs = load_inputs(cfg)
        templates = [parse_template(_template_text(t)) for t in cfg.templates]
        if cfg.event_chain_source == "agent":
            desc = extract_artifact("event_chain", complete(backend, event_chain_prompt(inputs))).value
        elif cfg.event_chain_source == "file":
            desc = parse_event_chain(_read(cfg.event_chain, "aeb/event_chain.json"))
        else:
            raise ValueError(f"unknown event_chain_source {cfg.event_chain_source!r}")
    except (BackendError, ExtractionError) as e:
        raise _Stop(EXIT_BACKEND, "ingest", str(e))
    except (OSError, ValueError, SchemaError, ModelError, ConstraintSyntaxError, TemplateSyntaxError) as e:
        raise _Stop(EXIT_INPUT, "ingest", f"{type(e).__name__}: {e}")
    _write(out / "event_chain.json", desc.to_json())
    report.stage("ingest", "ok", components=desc.names)

    existing, to_generate = diff_components(desc, inputs.components)
    _write(out / "diff.json", json.dumps({"existing": existing, "to_generate": to_generate}, indent=2) + "\n")
    report.stage("diff", "ok", existing=existing, to_generate=to_generate)

    # model
    try:
        model = build_model(inputs, desc, backend, cfg.model_source)
    except (BackendError, ExtractionError) as e:
        raise _Stop(EXIT_BACKEND, "model", str(e))
    except (ModelError, LoweringError, FrequencyPolicyError) as e:
        raise _Stop(EXIT_GATE, "model", f"{type(e).__name__}: {e}")
    _write(out / "instance.json", serialize_instance(model))
    report.stage("model", "ok", objects=len(model.objects))

    # validate gate
    generated = out / "generated"
    try:
        validation = evaluate(inputs.constraints, model)
    except UnknownContextError as e:
        raise _Stop(EXIT_INPUT, "validate", str(e))
    _write(out / "validation.json", validation.to_json())
    if not validation.ok:
        shutil.rmtree(generated, ignore_errors=True)
        raise _Stop(EXIT_GATE, "validate", validation.summary())
    report.stage("validate", "ok", checked=len(validation.entries))

    # generate
    try:
        files = [f for t in templates for f in render(t, model).files]
    except (RenderError, QueryError) as e:
        shutil.rmtree(generated, ignore_errors=True)
        raise _Stop(EXIT_GATE, "generate", str(e))
    shutil.rmtree(generated, ignore_errors=True)
    for name, content in files:
        _write(generated / name, content)
    report.stage("generate", "ok", files=[n for n, _ in files])

    # functions
    code: dict[str, str] = {}
    if cfg.functions == "agent":
        functions = out / "functions"
        shutil.rmtree(functions, ignore_errors=True)
        for name in to_generate:
            try:
                code[name] = generate_function_code(backend, desc.component(name))
            except (BackendError, ExtractionError) as e:
                raise _Stop(EXIT_BACKEND, "functions", f"{name}: {e}")
            _write(functions / f"{name}.py", code[name])
    elif cfg.functions != "reference":
        raise _Stop(EXIT_INPUT, "functions", f"unknown functions mode {cfg.functions!r}")
    report.stage("functions", "ok", source=cfg.functions, generated=sorted(code))

    # simulate
    manifest = dict(files).get(MANIFEST)
    if manifest is None:
        raise _Stop(EXIT_INPUT, "simulate", f"no template produced {MANIFEST}")
    try:
        scenario = cfg.aeb_scenario()
        graph = load_wiring(manifest, strict=cfg.strict, world_topics=scenario.world.published)
        trace = run_scenario(graph, scenario_behaviors(REFERENCE_BEHAVIORS, code), scenario)
    except (TypeError, WiringError, ScenarioError) as e:
        raise _Stop(EXIT_SIM, "simulate", f"{type(e).__name__}: {e}")
    _write(out / "trace.csv", trace.to_csv())
    _write(out / "messages.jsonl", trace.messages_jsonl())
    _write(out / "metrics.json", metrics_json(trace))
    report.summary = trace.summary()
    if not trace.passed:
        raise _Stop(EXIT_SIM, "simulate", "ego vehicle collided" if trace.collided else "ego vehicle did not stop")
    report.stage("simulate", "ok")
