"""Hand-rolled reference checks for the two shipped invariants.

Models are described structurally: one (n_inputs, n_outputs, frequency) triple
per node, nodes chained by nextstep in list order. The checker reads that
description directly and never touches the evaluator or the model graph.
"""
from __future__ import annotations

from eventchain.metamodel import InstanceModel, Metamodel, ModelObject


def build_chain(mm: Metamodel, spec: list[tuple[int, int, float]]) -> InstanceModel:
    objects = []
    node_ids = [f"n{i}" for i in range(len(spec))]
    data_ids = []
    for i, (n_in, n_out, freq) in enumerate(spec):
        ins = [f"d{i}_in{j}" for j in range(n_in)]
        outs = [f"d{i}_out{j}" for j in range(n_out)]
        data_ids += ins + outs
        refs = {"input": ins, "output": outs}
        if i + 1 < len(spec):
            refs["nextstep"] = [node_ids[i + 1]]
        objects.append(ModelObject(node_ids[i], "SoftwareNode",
                                   {"name": f"N{i}", "frequency": float(freq), "existing": False}, refs))
    for d in data_ids:
        objects.append(ModelObject(d, "Data", {"name": d, "topicName": "/" + d, "messageType": "std_msgs/Float64",
                                               "fieldName": "data", "qosProfile": "default", "description": ""}))
    objects.append(ModelObject("root", "EventChain", {"name": "C"}, {"software": node_ids, "data": data_ids}))
    return InstanceModel(mm, objects)


def expected_verdicts(spec: list[tuple[int, int, float]]) -> dict[tuple[str, str], bool]:
    out = {}
    for i, (n_in, n_out, freq) in enumerate(spec):
        out[("HasInputAndOutputData", f"n{i}")] = n_in > 0 and n_out > 0
        if i + 1 < len(spec):
            out[("NextstepFrequencyEqualOrHigher", f"n{i}")] = spec[i + 1][2] >= freq
        else:
            out[("NextstepFrequencyEqualOrHigher", f"n{i}")] = True
    return out


def actual_verdicts(report) -> dict[tuple[str, str], bool]:
    return {(e.invariant, e.object_id): e.verdict == "pass" for e in report.entries}


FREQS = (10.0, 20.0, 50.0)
PORT_COMBOS = [(i, o) for i in range(3) for o in range(3)]


def enumerate_specs():
    """Chains of 1 to 5 nodes, 0-2 inputs and outputs each, frequencies from FREQS.

    Up to three nodes the full product is produced. For four and five nodes
    every frequency vector is paired with nine cyclic shifts of the port
    combinations, so each node meets every (inputs, outputs) pair under every
    frequency vector.
    """
    from itertools import product

    per_node = [(i, o, f) for (i, o) in PORT_COMBOS for f in FREQS]
    for n in (1, 2, 3):
        for spec in product(per_node, repeat=n):
            yield list(spec)
    for n in (4, 5):
        for freqs in product(FREQS, repeat=n):
            for shift in range(len(PORT_COMBOS)):
                yield [PORT_COMBOS[(shift + k) % len(PORT_COMBOS)] + (freqs[k],) for k in range(n)]


def engagement_oracle(v0, d0, a_max, dt=0.001):
    """Independent fine-step integration of the peak-hold ramp controller."""
    v, gap, t, peak, engaged = v0, d0, 0.0, 0.0, None
    while v > 0 and gap > 0:
        ttc = gap / v
        force = 1.0 if ttc < 1.0 else (2.0 - ttc if ttc < 2.0 else 0.0)
        peak = max(peak, force)
        if peak > 0 and engaged is None:
            engaged = t
        v = max(0.0, v - peak * a_max * dt)
        gap -= v * dt
        t += dt
    return engaged, gap
