"""The fixture corpus shared with the frontend must round-trip byte-exactly."""

import json
from pathlib import Path

from wfrender.wireframe import parse_wireframe, serialize_wireframe

FIXTURES = Path(__file__).parent.parent / "frontend" / "fixtures" / "wireframes.json"


def test_corpus_round_trips_byte_exactly():
    corpus = json.loads(FIXTURES.read_text())["fixtures"]
    assert len(corpus) >= 10
    for serialized in corpus:
        wf = parse_wireframe(serialized)
        assert serialize_wireframe(wf) == serialized
