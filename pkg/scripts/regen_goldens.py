"""Rewrite tests/golden/aeb/ from the shipped templates and the AEB instance.

Only run this after a deliberate template change, then review the diff.
"""
from __future__ import annotations

from pathlib import Path

from eventchain import event_chain_metamodel, lower_to_instance, parse_event_chain, parse_template, render
from eventchain.agents.evaluation import WorkflowInputs, _data
from eventchain.codegen import shipped_template

OUT = Path(__file__).resolve().parents[1] / "tests" / "golden" / "aeb"


def main() -> None:
    inputs = WorkflowInputs.aeb()
    desc = parse_event_chain(_data("aeb/event_chain.json"))
    model = lower_to_instance(desc, inputs.components, inputs.frequency, event_chain_metamodel(), "AEB")
    OUT.mkdir(parents=True, exist_ok=True)
    for tmpl in ("ros_node.tmpl", "wiring_manifest.tmpl"):
        for name, content in render(parse_template(shipped_template(tmpl)), model).files:
            (OUT / name).write_text(content, "utf-8")
            print(f"wrote {OUT / name}")


if __name__ == "__main__":
    main()
