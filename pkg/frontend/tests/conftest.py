"""Shared fixtures: spec factories over the canned CSV inputs."""

import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

SPEC_BODIES = {
    "distribution-heatmap": {
        "inputs": {"distribution": "distribution_000.csv"},
        "options": {"time_label": "t = 0.48 us"},
    },
    "disturbance-map": {
        "inputs": {"field": "disturbance.csv"},
    },
    "variance-line": {
        "inputs": {"variance": "variance.csv", "summary": "diffusion.json"},
    },
    "tomo-scatter": {
        "inputs": {"comparison": "tomo.csv"},
        "options": {"min_count": 200},
    },
    "trajectory-3d": {
        "inputs": {"trajectories": ["trajectory_000.csv",
                                    "trajectory_001.csv"]},
    },
}


@pytest.fixture
def write_spec(tmp_path):
    """Write a spec JSON for a figure kind; inputs point at the fixtures."""

    def factory(kind, out_name="figure", **overrides):
        body = {"kind": kind, "out": out_name}
        body.update({k: dict(v) for k, v in SPEC_BODIES[kind].items()})
        for key, value in overrides.items():
            body[key] = value
        inputs = body["inputs"]
        for name, value in inputs.items():
            if isinstance(value, list):
                inputs[name] = [str(FIXTURES / v) for v in value]
            else:
                inputs[name] = str(FIXTURES / value)
        path = tmp_path / f"{kind}.json"
        path.write_text(json.dumps(body))
        return path

    return factory
