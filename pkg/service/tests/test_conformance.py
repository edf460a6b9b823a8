"""Golden-fixture conformance: the service reproduces the recorded wire bodies.

The fixture suite is shared with the client (../../tests/fixtures/enhancer);
each file carries one canonical request body and the response bytes the
protocol requires for it.
"""

import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from enhancer_service.app import create_app

FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "enhancer"


def canonical(payload):
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@pytest.mark.parametrize("path", sorted(FIXTURES.glob("*.json")), ids=lambda p: p.stem)
def test_fixture_round_trip(path):
    fx = json.loads(path.read_text())
    client = TestClient(create_app(fx["tag"]))
    r = client.post(
        fx["endpoint"],
        content=fx["request_body"],
        headers={"Content-Type": "application/json"},
    )
    assert r.status_code == 200
    assert canonical(r.json()) == fx["response_body"]


def test_fixture_suite_present():
    assert len(list(FIXTURES.glob("*.json"))) >= 4
