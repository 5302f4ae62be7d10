import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventchain.constraints import (ConstraintSyntaxError, UnknownContextError, evaluate, parse_constraints,
                                    shipped_constraints)

from oracle import actual_verdicts, build_chain, expected_verdicts


def test_shipped_text_parses(constraints):
    assert [c.cls for c in constraints.contexts] == ["SoftwareNode"]
    assert constraints.invariant_names() == ["HasInputAndOutputData", "NextstepFrequencyEqualOrHigher"]


def test_shipped_text_keeps_line_break_inside_navigation():
    assert "self.nextstep.\n" in shipped_constraints()


def test_single_invariant():
    cs = parse_constraints("context X inv A: self.y->notEmpty()")
    assert cs.invariant_names() == ["A"]
    assert cs.contexts[0].cls == "X"


def test_invariant_without_context():
    with pytest.raises(ConstraintSyntaxError, match="outside of a context") as err:
        parse_constraints("inv : self.x")
    assert (err.value.line, err.value.column) == (1, 1)


@pytest.mark.parametrize("text, line", [
    ("context A\n  inv X: self.a and\n", 3),
    ("context A\n  inv X: self.a->frobnicate()", 2),
    ("context A\n  inv X self.a", 2),
    ("context A\n  inv X: self.a\n  inv X: self.b", 3),
    ("junk context A inv X: true", 1),
    ("context A inv X: (self.a", 1),
    ("context A inv X: 'open", 1),
])
def test_syntax_errors_carry_position(text, line):
    with pytest.raises(ConstraintSyntaxError) as err:
        parse_constraints(text)
    assert err.value.line == line


def test_aeb_model_passes(constraints, aeb_model):
    report = evaluate(constraints, aeb_model)
    assert report.ok
    assert len(report.entries) == 8


def test_empty_input_fails_one_invariant(mm, constraints):
    report = evaluate(constraints, build_chain(mm, [(1, 1, 20.0), (0, 1, 20.0)]))
    assert [(f.invariant, f.object_id, f.verdict) for f in report.failures()] == [
        ("HasInputAndOutputData", "n1", "fail")]


def test_frequency_drop_fails(mm, constraints):
    report = evaluate(constraints, build_chain(mm, [(1, 1, 50.0), (1, 1, 20.0)]))
    assert [(f.invariant, f.object_id) for f in report.failures()] == [("NextstepFrequencyEqualOrHigher", "n0")]


def test_unknown_context_class(mm):
    cs = parse_constraints("context Sensor inv A: true")
    with pytest.raises(UnknownContextError):
        evaluate(cs, build_chain(mm, [(1, 1, 10.0)]))


def test_implies_short_circuits(mm):
    # without the guard, navigating the empty nextstep is an error verdict
    m = build_chain(mm, [(1, 1, 10.0)])
    guarded = parse_constraints("context SoftwareNode inv G: self.nextstep->notEmpty() implies "
                                "self.nextstep.frequency >= 0")
    unguarded = parse_constraints("context SoftwareNode inv U: self.nextstep.frequency >= 0")
    assert evaluate(guarded, m).entries[0].verdict == "pass"
    assert evaluate(unguarded, m).entries[0].verdict == "error"


@pytest.mark.parametrize("a, b, expected", [
    ("false", "false", True), ("false", "true", True), ("true", "false", False), ("true", "true", True)])
def test_implies_truth_table(mm, a, b, expected):
    cs = parse_constraints(f"context EventChain inv T: {a} implies {b}")
    assert evaluate(cs, build_chain(mm, [])).ok is expected


@pytest.mark.parametrize("body, verdict", [
    ("self.name = 'C'", "pass"),
    ("self.name <> 'C'", "fail"),
    ("self.software->size() = 2", "pass"),
    ("self.software->forAll(n | n.frequency >= 10)", "pass"),
    ("self.software->exists(n | n.frequency > 10)", "fail"),
    ("self.data->isEmpty()", "fail"),
    ("not self.software->isEmpty()", "pass"),
    ("self.name > 3", "error"),
    ("self.software->size()", "error"),
    ("self.bogus->notEmpty()", "error"),
    ("1 < 2 and 2.5 >= 2 or false", "pass"),
])
def test_expressions(mm, body, verdict):
    m = build_chain(mm, [(1, 1, 10.0), (1, 1, 10.0)])
    report = evaluate(parse_constraints(f"context EventChain inv E: {body}"), m)
    assert report.entries[0].verdict == verdict


def test_precedence(mm):
    m = build_chain(mm, [])
    # and binds tighter than or; or tighter than implies
    assert evaluate(parse_constraints("context EventChain inv P: true or false and false"), m).ok
    assert evaluate(parse_constraints("context EventChain inv P: false implies false or true"), m).ok
    assert not evaluate(parse_constraints("context EventChain inv P: not true = true"), m).ok


def test_report_json_and_summary(constraints, aeb_model):
    report = evaluate(constraints, aeb_model)
    assert '"ok": true' in report.to_json()
    assert report.summary().count("PASS") == 8


def test_string_literal_containing_keyword(mm):
    m = build_chain(mm, [])
    cs = parse_constraints("context EventChain inv S: self.name <> 'inv context'")
    assert evaluate(cs, m).ok


port_spec = st.tuples(st.integers(0, 2), st.integers(0, 2), st.sampled_from([10.0, 20.0, 50.0]))


@settings(max_examples=200, deadline=None)
@given(st.lists(port_spec, min_size=1, max_size=7))
def test_oracle_equivalence_random(mm, constraints, spec):
    report = evaluate(constraints, build_chain(mm, spec))
    assert actual_verdicts(report) == expected_verdicts(spec)


@settings(max_examples=50, deadline=None)
@given(st.lists(port_spec, min_size=0, max_size=6))
def test_report_completeness(mm, constraints, spec):
    m = build_chain(mm, spec)
    report = evaluate(constraints, m)
    n_inv = sum(len(c.invariants) for c in constraints.contexts)
    assert len(report.entries) == n_inv * len(m.of_class("SoftwareNode"))
    assert len({(e.invariant, e.object_id) for e in report.entries}) == len(report.entries)
