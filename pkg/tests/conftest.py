from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

import pytest

from eventchain.constraints import parse_constraints, shipped_constraints
from eventchain.ingest import (FrequencyPolicy, lower_to_instance, parse_component_registry,
                               parse_event_chain, parse_signal_registry)
from eventchain.metamodel import event_chain_metamodel

DATA = resources.files("eventchain").joinpath("data")
FIXTURES = Path(str(DATA.joinpath("fixtures")))
GOLDEN = Path(__file__).parent / "golden"


def data_text(path: str) -> str:
    return DATA.joinpath(path).read_text("utf-8")


@pytest.fixture(scope="session")
def mm():
    return event_chain_metamodel()


@pytest.fixture(scope="session")
def constraints():
    return parse_constraints(shipped_constraints())


@pytest.fixture(scope="session")
def registry():
    return parse_component_registry(data_text("aeb/components.json"))


@pytest.fixture(scope="session")
def signals():
    return parse_signal_registry(data_text("aeb/signals.json"))


@pytest.fixture(scope="session")
def aeb_desc():
    return parse_event_chain(data_text("aeb/event_chain.json"))


@pytest.fixture(scope="session")
def aeb_chain_doc():
    return json.loads(data_text("aeb/event_chain.json"))


@pytest.fixture(scope="session")
def aeb_model(aeb_desc, registry, mm):
    return lower_to_instance(aeb_desc, registry, FrequencyPolicy(), mm, "AEB")
