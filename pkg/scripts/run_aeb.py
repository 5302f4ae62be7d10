"""Sweep initial speed through the AEB scenario and print one row per run.

Runs the generated wiring manifest with the reference behaviors, once with the
peak-hold braking decision and once with the stateless ramp, so the two can be
compared side by side.
"""
from __future__ import annotations

import argparse

from eventchain import (AebScenario, event_chain_metamodel, load_wiring, lower_to_instance, parse_event_chain,
                        parse_template, render, run_scenario, shipped_template)
from eventchain.agents.evaluation import WorkflowInputs, _data
from eventchain.behaviors import REFERENCE_BEHAVIORS, StatelessBrakingDecision


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--speeds", type=float, nargs="+", default=[5, 10, 15, 20, 25])
    ap.add_argument("--d0", type=float, default=50.0)
    ap.add_argument("--duration", type=float, default=30.0)
    args = ap.parse_args(argv)

    inputs = WorkflowInputs.aeb()
    desc = parse_event_chain(_data("aeb/event_chain.json"))
    model = lower_to_instance(desc, inputs.components, inputs.frequency, event_chain_metamodel(), "AEB")
    manifest = render(parse_template(shipped_template("wiring_manifest.tmpl")), model)["wiring_manifest.json"]
    graph = load_wiring(manifest, strict=True)
    variants = {
        "peak-hold": REFERENCE_BEHAVIORS,
        "stateless": {**REFERENCE_BEHAVIORS, "Braking_Decision": StatelessBrakingDecision},
    }

    print(f"{'braking':<10} {'v0':>5} {'engage t':>9} {'engage gap':>11} {'final gap':>10} {'final v':>8}  outcome")
    for label, behaviors in variants.items():
        for v0 in args.speeds:
            trace = run_scenario(graph, behaviors, AebScenario(v0=v0, d0=args.d0, duration=args.duration))
            s = trace.summary()
            eng_t = "-" if s["engagement_time"] is None else f"{s['engagement_time']:.2f}"
            eng_g = "-" if s["engagement_gap"] is None else f"{s['engagement_gap']:.2f}"
            outcome = "stop" if trace.passed else ("collision" if trace.collided else "no stop")
            print(f"{label:<10} {v0:>5g} {eng_t:>9} {eng_g:>11} {s['final_gap']:>10.3f} {s['final_speed']:>8.3f}  "
                  f"{outcome}")


if __name__ == "__main__":
    main()
