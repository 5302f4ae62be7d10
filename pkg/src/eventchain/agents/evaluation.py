"""Repeated end-to-end development runs scored per backend.

A run is scored on three flags:

* event-chain model valid: the generated description parses, the instance
  model conforms to the metamodel and every shipped invariant passes;
* function code valid: every component that must be generated yields a class
  whose ``execute`` accepts exactly the declared inputs;
* overall success: both of the above, and the AEB scenario stops the ego
  vehicle short of the obstacle.

When the event chain itself cannot be obtained, every later stage of that run
counts as failed.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from typing import Mapping

from ..behaviors import REFERENCE_BEHAVIORS
from ..codegen import RenderError, parse_template, render, shipped_template
from ..codeexec import code_factory
from ..constraints import ConstraintSet, UnknownContextError, evaluate, parse_constraints, shipped_constraints
from ..ingest import (ComponentDesc, ComponentRegistry, EventChainDescription, FrequencyPolicy,
                      FrequencyPolicyError, LoweringError, SignalRegistry, diff_components,
                      lower_to_instance, parse_component_registry, parse_signal_registry)
from ..metamodel import InstanceModel, Metamodel, ModelError, load_metamodel
from ..sim import AebScenario, ScenarioError, WiringError, load_wiring, run_scenario
from .backends import BackendError, LlmBackend, complete
from .extract import ExtractionError, check_execute_signature, extract_artifact
from .prompts import build_prompt, one_shot_example

log = logging.getLogger(__name__)


def _data(path: str) -> str:
    return resources.files("eventchain").joinpath(f"data/{path}").read_text("utf-8")


@dataclass(frozen=True)
class WorkflowInputs:
    requirements: str
    components: ComponentRegistry
    signals: SignalRegistry
    metamodel_text: str
    constraints: ConstraintSet
    frequency: FrequencyPolicy = field(default_factory=FrequencyPolicy)
    chain_name: str = "AEB"

    @property
    def metamodel(self) -> Metamodel:
        return load_metamodel(self.metamodel_text)

    @classmethod
    def aeb(cls) -> "WorkflowInputs":
        return cls(
            requirements=_data("aeb/requirements.md"),
            components=parse_component_registry(_data("aeb/components.json")),
            signals=parse_signal_registry(_data("aeb/signals.json")),
            metamodel_text=_data("metamodel/event_chain.json"),
            constraints=parse_constraints(shipped_constraints()),
        )


def event_chain_prompt(inputs: WorkflowInputs) -> str:
    return build_prompt("event_chain", {
        "requirements": inputs.requirements,
        "existing_components": inputs.components.to_json(),
        "existing_signals": inputs.signals.to_json(),
    })


def function_code_prompt(component: ComponentDesc) -> str:
    return build_prompt("function_code", {
        "submodule_description": json.dumps(component.to_dict(), indent=1, ensure_ascii=False),
    })


def instance_model_prompt(inputs: WorkflowInputs, desc: EventChainDescription) -> str:
    return build_prompt("instance_model", {
        "metamodel": inputs.metamodel_text,
        "one_shot_example": one_shot_example(),
        "event_chain": desc.to_json(),
    })


def constraints_prompt(inputs: WorkflowInputs, nl_constraint_text: str) -> str:
    return build_prompt("constraints", {
        "metamodel": inputs.metamodel_text,
        "nl_constraint_text": nl_constraint_text,
    })


def build_model(inputs: WorkflowInputs, desc: EventChainDescription, backend: LlmBackend | None,
                source: str = "deterministic") -> InstanceModel:
    if source == "agent":
        if backend is None:
            raise ValueError("agent model construction needs a backend")
        resp = complete(backend, instance_model_prompt(inputs, desc))
        return extract_artifact("instance_model", resp, inputs.metamodel).value
    if source != "deterministic":
        raise ValueError(f"unknown model source {source!r}")
    return lower_to_instance(desc, inputs.components, inputs.frequency, inputs.metamodel, inputs.chain_name)


def generate_function_code(backend: LlmBackend, component: ComponentDesc) -> str:
    resp = complete(backend, function_code_prompt(component))
    result = extract_artifact("code", resp, class_name=component.name)
    check_execute_signature(result.text, component.name, component.input_names())
    return result.text


def scenario_behaviors(existing: Mapping, code: Mapping[str, str]) -> dict:
    behaviors = dict(existing)
    for name, source in code.items():
        behaviors[name] = code_factory(source, name)
    return behaviors


@dataclass(frozen=True)
class RunOutcome:
    run: int
    model_valid: bool
    code_valid: bool
    scenario_passed: bool
    notes: tuple[str, ...] = ()

    @property
    def overall(self) -> bool:
        return self.model_valid and self.code_valid and self.scenario_passed


def run_once(backend: LlmBackend, inputs: WorkflowInputs, scenario: AebScenario,
             model_source: str = "deterministic", existing_behaviors: Mapping = REFERENCE_BEHAVIORS) -> RunOutcome:
    run = backend.run_index
    notes: list[str] = []
    try:
        desc = extract_artifact("event_chain", complete(backend, event_chain_prompt(inputs))).value
    except (BackendError, ExtractionError) as e:
        return RunOutcome(run, False, False, False, (f"event chain: {e}",))

    model = None
    model_valid = False
    try:
        model = build_model(inputs, desc, backend, model_source)
        report = evaluate(inputs.constraints, model)
        model_valid = report.ok
        notes.extend(f"constraint {v.invariant} {v.verdict} on {v.object_id}" for v in report.failures())
    except (BackendError, ExtractionError, ModelError, LoweringError, FrequencyPolicyError,
            UnknownContextError) as e:
        notes.append(f"model: {e}")

    _, to_generate = diff_components(desc, inputs.components)
    code: dict[str, str] = {}
    code_valid = True
    for name in to_generate:
        try:
            code[name] = generate_function_code(backend, desc.component(name))
        except (BackendError, ExtractionError) as e:
            code_valid = False
            notes.append(f"code {name}: {e}")

    passed = False
    if model_valid and code_valid:
        try:
            manifest = render(parse_template(shipped_template("wiring_manifest.tmpl")), model)
            graph = load_wiring(manifest["wiring_manifest.json"], strict=True,
                                world_topics=scenario.world.published)
            trace = run_scenario(graph, scenario_behaviors(existing_behaviors, code), scenario)
            passed = trace.passed
            if not passed:
                notes.append("scenario: collided" if trace.collided else "scenario: ego did not stop")
        except (RenderError, WiringError, ScenarioError) as e:
            notes.append(f"scenario: {e}")
    return RunOutcome(run, model_valid, code_valid, passed, tuple(notes))


@dataclass(frozen=True)
class BackendScore:
    backend: str
    outcomes: tuple[RunOutcome, ...]

    @property
    def n(self) -> int:
        return len(self.outcomes)

    @property
    def model_valid(self) -> int:
        return sum(o.model_valid for o in self.outcomes)

    @property
    def code_valid(self) -> int:
        return sum(o.code_valid for o in self.outcomes)

    @property
    def overall(self) -> int:
        return sum(o.overall for o in self.outcomes)

    def rate(self, count: int) -> Fraction:
        return Fraction(count, self.n)


@dataclass(frozen=True)
class EvalReport:
    scores: tuple[BackendScore, ...]

    def score(self, backend: str) -> BackendScore:
        for s in self.scores:
            if s.backend == backend:
                return s
        raise KeyError(backend)

    def to_json(self) -> str:
        doc = []
        for s in self.scores:
            doc.append({
                "backend": s.backend,
                "runs": s.n,
                "eventchain_model": {"count": s.model_valid, "rate": s.model_valid / s.n},
                "function_code": {"count": s.code_valid, "rate": s.code_valid / s.n},
                "overall_success": {"count": s.overall, "rate": s.overall / s.n},
                "outcomes": [{"run": o.run, "model_valid": o.model_valid, "code_valid": o.code_valid,
                              "scenario_passed": o.scenario_passed, "overall": o.overall,
                              "notes": list(o.notes)} for o in s.outcomes],
            })
        return json.dumps(doc, indent=2) + "\n"

    def table(self) -> str:
        rows = [("LLM", "eventchain model", "function code", "overall success")]
        for s in self.scores:
            rows.append((s.backend, _pct(s.rate(s.model_valid)), _pct(s.rate(s.code_valid)),
                         _pct(s.rate(s.overall))))
        widths = [max(len(r[k]) for r in rows) for k in range(4)]
        lines = ["  ".join(cell.ljust(w) if k == 0 else cell.rjust(w) for k, (cell, w) in enumerate(zip(r, widths)))
                 for r in rows]
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines)


def _pct(f: Fraction) -> str:
    value = f * 100
    return f"{int(value)}%" if value.denominator == 1 else f"{float(value):.1f}%"


@dataclass(frozen=True)
class EvalConfig:
    backends: tuple[LlmBackend, ...]
    runs: int = 5
    inputs: WorkflowInputs | None = None
    scenario: AebScenario = field(default_factory=AebScenario)
    model_source: str = "deterministic"
    workers: int = 1


def run_evaluation(config: EvalConfig) -> EvalReport:
    if config.runs < 1:
        raise ValueError("runs must be >= 1")
    inputs = config.inputs or WorkflowInputs.aeb()
    scores = []
    for backend in config.backends:
        jobs = [backend.for_run(i) for i in range(config.runs)]

        def one(b: LlmBackend) -> RunOutcome:
            try:
                return run_once(b, inputs, config.scenario, config.model_source)
            except Exception as e:  # a run never aborts the report
                log.exception("run %d of %s crashed", b.run_index, b.name)
                return RunOutcome(b.run_index, False, False, False, (f"crash: {type(e).__name__}: {e}",))

        if config.workers > 1:
            with ThreadPoolExecutor(config.workers) as pool:
                outcomes = list(pool.map(one, jobs))
        else:
            outcomes = [one(b) for b in jobs]
        outcomes.sort(key=lambda o: o.run)
        scores.append(BackendScore(backend.name, tuple(outcomes)))
    return EvalReport(tuple(scores))
