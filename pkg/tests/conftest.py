import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from orderpipe.orders import MedicalOrder, OrderType
from orderpipe.transcript import parse_encounter

settings.register_profile("ci", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")

DATA = Path(__file__).parent / "data"

WORKED_EXAMPLE_OUTPUT = """[
   {
    "order type": "medication",
    "description": "lasix 40 milligrams a day",
    "reason": "shortness of breath acute heart failure exacerbation",
    "provenance": [126, 127]
   },
   {
    "order type": "lab",
    "description": "hemoglobin a1c",
    "reason": "type i diabetes",
    "provenance": [138]
   }
]"""

WORKED_EXAMPLE_GOLD = [
    MedicalOrder(OrderType.MEDICATION, "lasix 40 milligrams a day",
                 "shortness of breath acute heart failure exacerbation", (126, 127)),
    MedicalOrder(OrderType.LAB, "hemoglobin a1c", "type i diabetes", (138,)),
]


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def example_record():
    return json.loads((DATA / "worked_example.json").read_text(encoding="utf-8"))


@pytest.fixture
def example_encounter(example_record):
    return parse_encounter(example_record)


@pytest.fixture
def mixed_encounter():
    return parse_encounter({
        "id": "mixed",
        "transcript": [
            {"turn_id": 0, "speaker": "doctor", "text": "let's start you on lisinopril 10 mg daily for your blood pressure."},
            {"turn_id": 1, "speaker": "patient", "text": "can i also get a chest x-ray for my cough?"},
            {"turn_id": 2, "speaker": "doctor", "text": "sure, and i'll order a lipid panel too."},
            {"turn_id": 3, "speaker": "nurse", "text": "i'll schedule that."},
        ],
    })


CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        prev = CRITERIA.get(n)
        if prev is None or prev[0] == "PASS":
            CRITERIA[n] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        status, title = CRITERIA[n]
        terminalreporter.write_line(f"[{status}] criterion {n}: {title}")
