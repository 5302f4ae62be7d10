"""Regenerate the replay fixture files under src/eventchain/data/fixtures/.

aeb_replay.json      one well-behaved run of every agent stage
eval_engineered.json 5 runs: 3 valid models, 5 valid code sets, 3 overall
eval_sabotaged.json  5 runs: valid artifacts, braking thresholds scaled down 10x
eval_mixed.json      5 runs: a mix of extraction, signature and scenario failures

Prompts are built with the package's own prompt builders, so the fixture keys
stay in sync with the templates. Rerun this after editing any prompt file.
"""
from __future__ import annotations

import argparse
import json
from pathlib import Path

from eventchain.agents.backends import prompt_hash
from eventchain.agents.evaluation import (WorkflowInputs, constraints_prompt, event_chain_prompt,
                                          function_code_prompt, instance_model_prompt)
from eventchain.ingest import lower_to_instance, parse_event_chain
from eventchain.metamodel import serialize_instance

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "eventchain" / "data"
CAPTURED = "2026-10-16"

TTC_CODE = '''\
import math


class TTC_Calculation:
    """Time to collision from obstacle distance and ego speed."""

    def execute(self, obstacle_distance, ego_speed):
        if ego_speed <= 0:
            return {"ttc": math.inf}
        return {"ttc": max(obstacle_distance, 0.0) / ego_speed}
'''

BRAKING_CODE = '''\
class Braking_Decision:
    """Full brake below 1 s TTC, linear ramp up to 2 s, hold the peak once engaged."""

    FULL_BRAKE_TTC = {full}
    NO_BRAKE_TTC = {none}

    def __init__(self):
        self.peak = 0.0

    def execute(self, ttc):
        if ttc < self.FULL_BRAKE_TTC:
            force = 1.0
        elif ttc < self.NO_BRAKE_TTC:
            force = (self.NO_BRAKE_TTC - ttc) / (self.NO_BRAKE_TTC - self.FULL_BRAKE_TTC)
        else:
            force = 0.0
        self.peak = max(self.peak, force)
        return {{"brake_force": self.peak}}
'''

STATELESS_BRAKING_CODE = '''\
class Braking_Decision:
    def execute(self, ttc):
        if ttc < 1.0:
            return {"brake_force": 1.0}
        if ttc < 2.0:
            return {"brake_force": 2.0 - ttc}
        return {"brake_force": 0.0}
'''

WRONG_SIGNATURE_CODE = '''\
class Braking_Decision:
    def execute(self, time_to_collision, speed):
        return {"brake_force": 1.0 if time_to_collision < 1.0 else 0.0}
'''

OCL = '''\
context SoftwareNode
  inv HasInputAndOutputData: self.input->notEmpty() and self.output->notEmpty()
context SoftwareNode
  inv NextstepFrequencyEqualOrHigher: self.nextstep->notEmpty() implies self.nextstep.frequency >= self.frequency
'''


def fenced(lang: str, body: str, preface: str = "") -> str:
    head = preface + "\n\n" if preface else ""
    return f"{head}```{lang}\n{body.rstrip()}\n```\n"


def chain_response(chain: list) -> str:
    return fenced("json", json.dumps(chain, indent=2),
                  "Here is the event chain for the AEB function, reusing the existing components.")


def code_response(code: str) -> str:
    return fenced("python", code, "Below is the implementation of the submodule.")


def mutate(chain: list, name: str, port: str) -> list:
    chain = json.loads(json.dumps(chain))
    for comp in chain:
        if comp["name"] == name:
            comp[port] = []
    return chain


def write(path: Path, backend: str, responses: dict) -> None:
    doc = {"backend": backend, "captured": CAPTURED, "responses": dict(sorted(responses.items()))}
    path.write_text(json.dumps(doc, indent=1, ensure_ascii=False) + "\n", "utf-8")
    print(f"wrote {path.relative_to(ROOT)} ({len(responses)} prompts)")


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=DATA / "fixtures")
    args = ap.parse_args(argv)
    args.out.mkdir(parents=True, exist_ok=True)

    inputs = WorkflowInputs.aeb()
    chain_text = (DATA / "aeb" / "event_chain.json").read_text("utf-8")
    chain = json.loads(chain_text)
    desc = parse_event_chain(chain_text)
    model = lower_to_instance(desc, inputs.components, inputs.frequency, inputs.metamodel, inputs.chain_name)

    h_chain = prompt_hash(event_chain_prompt(inputs))
    h_ttc = prompt_hash(function_code_prompt(desc.component("TTC_Calculation")))
    h_brake = prompt_hash(function_code_prompt(desc.component("Braking_Decision")))
    good_chain = chain_response(chain)
    good_brake = code_response(BRAKING_CODE.format(full=1.0, none=2.0))

    nl = (DATA / "aeb" / "design_constraints.md").read_text("utf-8")
    write(args.out / "aeb_replay.json", "replay-aeb", {
        h_chain: good_chain,
        prompt_hash(instance_model_prompt(inputs, desc)): fenced("json", serialize_instance(model)),
        prompt_hash(constraints_prompt(inputs, nl)): fenced("ocl", OCL),
        h_ttc: code_response(TTC_CODE),
        h_brake: good_brake,
    })

    write(args.out / "eval_engineered.json", "engineered", {
        h_chain: [good_chain, good_chain, good_chain,
                  chain_response(mutate(chain, "Carla_Vehicle_Control", "output")),
                  chain_response(mutate(chain, "ObjectDetection", "input"))],
        h_ttc: code_response(TTC_CODE),
        h_brake: good_brake,
    })

    write(args.out / "eval_sabotaged.json", "sabotaged", {
        h_chain: good_chain,
        h_ttc: code_response(TTC_CODE),
        h_brake: code_response(BRAKING_CODE.format(full=0.1, none=0.2)),
    })

    write(args.out / "eval_mixed.json", "mixed", {
        h_chain: [good_chain,
                  json.dumps(chain),
                  "I could not determine the event chain from the requirements.",
                  good_chain,
                  good_chain],
        h_ttc: code_response(TTC_CODE),
        h_brake: [good_brake, good_brake, good_brake,
                  code_response(WRONG_SIGNATURE_CODE),
                  code_response(STATELESS_BRAKING_CODE)],
    })


if __name__ == "__main__":
    main()
