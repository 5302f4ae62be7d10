import json

import pytest

from eventchain.agents.backends import prompt_hash
from eventchain.agents.evaluation import WorkflowInputs, event_chain_prompt
from eventchain.cli import main
from eventchain.pipeline import (EXIT_BACKEND, EXIT_GATE, EXIT_INPUT, EXIT_OK, EXIT_SIM, PipelineConfig,
                                 run_pipeline)

from conftest import FIXTURES

REPLAY = {"name": "aeb", "kind": "replay", "fixture_path": str(FIXTURES / "aeb_replay.json")}
GENERATED = ["braking_decision_node.py", "carla_vehicle_control_node.py", "objectdetection_node.py",
             "ttc_calculation_node.py", "wiring_manifest.json"]


def files(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return out, run_pipeline(PipelineConfig(out=str(out)))


def test_default_run_artifacts(default_run):
    out, report = default_run
    assert report.exit_code == EXIT_OK
    assert sorted(p.name for p in (out / "generated").iterdir()) == GENERATED
    for name in ("event_chain.json", "diff.json", "instance.json", "validation.json", "trace.csv",
                 "messages.jsonl", "metrics.json", "report.json"):
        assert (out / name).is_file(), name
    assert [s["stage"] for s in report.stages] == ["ingest", "diff", "model", "validate", "generate",
                                                   "functions", "simulate"]
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) == {"node_ObjectDetection", "node_TTC_Calculation", "node_Braking_Decision",
                            "node_Carla_Vehicle_Control"}
    diff = json.loads((out / "diff.json").read_text())
    assert diff["to_generate"] == ["TTC_Calculation", "Braking_Decision"]


def test_rerun_is_byte_identical(default_run, tmp_path):
    out, _ = default_run
    run_pipeline(PipelineConfig(out=str(tmp_path)))
    assert files(tmp_path) == files(out)


def test_agent_run_with_replay(tmp_path):
    cfg = PipelineConfig(out=str(tmp_path), event_chain_source="agent", model_source="agent", functions="agent",
                         backend=REPLAY)
    report = run_pipeline(cfg)
    assert report.exit_code == EXIT_OK, report.to_json()
    assert sorted(p.name for p in (tmp_path / "functions").iterdir()) == ["Braking_Decision.py",
                                                                         "TTC_Calculation.py"]


def test_gate_failure_removes_generated(tmp_path):
    (tmp_path / "generated").mkdir()
    (tmp_path / "generated" / "stale.py").write_text("x")
    report = run_pipeline(PipelineConfig(out=str(tmp_path), frequencies={"TTC_Calculation": 50.0}))
    assert report.exit_code == EXIT_GATE
    assert not (tmp_path / "generated").exists()
    assert report.stages[-1]["stage"] == "validate"
    assert json.loads((tmp_path / "validation.json").read_text())["ok"] is False


def test_missing_function_fixture_is_backend_error(tmp_path):
    doc = json.loads((FIXTURES / "aeb_replay.json").read_text())
    key = prompt_hash(event_chain_prompt(WorkflowInputs.aeb()))
    doc["responses"] = {key: doc["responses"][key]}
    fx = tmp_path / "partial.json"
    fx.write_text(json.dumps(doc))
    cfg = PipelineConfig(out=str(tmp_path / "o"), event_chain_source="agent", functions="agent",
                         backend={"name": "p", "fixture_path": str(fx)})
    report = run_pipeline(cfg)
    assert report.exit_code == EXIT_BACKEND
    assert report.stages[-1]["stage"] == "functions"


def test_collision_is_sim_failure(tmp_path):
    report = run_pipeline(PipelineConfig(out=str(tmp_path), scenario={"v0": 25.0}))
    assert report.exit_code == EXIT_SIM
    assert report.summary["collided"] is True
    assert (tmp_path / "trace.csv").is_file()


def test_agent_without_backend_is_input_error(tmp_path):
    assert run_pipeline(PipelineConfig(out=str(tmp_path), event_chain_source="agent")).exit_code == EXIT_INPUT


def test_missing_input_file(tmp_path):
    report = run_pipeline(PipelineConfig(out=str(tmp_path), requirements=str(tmp_path / "nope.md")))
    assert report.exit_code == EXIT_INPUT


def test_config_file_paths_relative(tmp_path):
    (tmp_path / "cfg.json").write_text(json.dumps({"out": "o", "scenario": {"v0": 5.0}}))
    cfg = PipelineConfig.load(tmp_path / "cfg.json")
    assert cfg.out == str(tmp_path / "o")
    assert cfg.aeb_scenario().v0 == 5.0
    with pytest.raises(ValueError, match="colour"):
        PipelineConfig.from_dict({"colour": "red"})


# --- CLI -----------------------------------------------------------------------

def test_cli_run_and_replay(tmp_path, capsys):
    assert main(["run", "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["run", "--out", str(tmp_path / "b"), "--backend", "replay"]) == EXIT_OK
    assert "simulate   ok" in capsys.readouterr().out
    assert (tmp_path / "b" / "generated" / "wiring_manifest.json").read_bytes() == \
        (tmp_path / "a" / "generated" / "wiring_manifest.json").read_bytes()


def test_cli_stepwise(tmp_path, capsys):
    out = tmp_path / "s"
    assert main(["model", "--out", str(out)]) == EXIT_OK
    model = str(out / "instance.json")
    assert main(["validate", "--model", model]) == EXIT_OK
    assert main(["validate", "--model", model, "--json"]) == EXIT_OK
    capsys.readouterr()
    assert main(["generate", "--model", model, "--out", str(out)]) == EXIT_OK
    first = files(out / "generated")
    assert main(["generate", "--model", model, "--out", str(out)]) == EXIT_OK
    assert files(out / "generated") == first
    manifest = str(out / "generated" / "wiring_manifest.json")
    assert main(["simulate", "--manifest", manifest, "--out", str(out), "--v0", "15"]) == EXIT_OK
    assert main(["simulate", "--manifest", manifest, "--out", str(out), "--v0", "25"]) == EXIT_SIM
    assert main(["plot", str(out / "trace.csv"), "-o", str(out / "t.png")]) == EXIT_OK
    assert (out / "t.png").stat().st_size > 0


def test_cli_generate_refuses_invalid_model(tmp_path, capsys):
    out = tmp_path / "g"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frequencies": {"TTC_Calculation": 50.0}}))
    assert main(["model", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    model = str(out / "instance.json")
    assert main(["validate", "--model", model]) == EXIT_GATE
    assert main(["generate", "--model", model, "--out", str(out)]) == EXIT_GATE
    assert not (out / "generated").exists()


def test_cli_simulate_with_functions(tmp_path):
    out = tmp_path / "f"
    assert main(["run", "--out", str(out), "--backend", "replay"]) == EXIT_OK
    cfg = tmp_path / "agent.json"
    cfg.write_text(json.dumps({"event_chain_source": "agent", "functions": "agent", "backend": REPLAY}))
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert main(["simulate", "--manifest", str(out / "generated" / "wiring_manifest.json"),
                 "--functions", str(out / "functions"), "--out", str(out)]) == EXIT_OK


def test_cli_eval(tmp_path, capsys):
    code = main(["eval", "--backend", "eval_engineered", "--backend", str(FIXTURES / "eval_sabotaged.json"),
                 "--out", str(tmp_path)])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "overall success" in out and "60%" in out
    assert json.loads((tmp_path / "eval.json").read_text())


def test_cli_input_errors(tmp_path, capsys):
    assert main(["validate", "--model", str(tmp_path / "missing.json")]) == EXIT_INPUT
    assert main(["eval"]) == EXIT_INPUT
    assert main(["run", "--backend", "no_such_fixture"]) == EXIT_INPUT
