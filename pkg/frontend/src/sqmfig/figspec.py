"""Figure specifications: the JSON contract between data and renderer.

A specification is one JSON object::

    {
      "kind": "variance-line",
      "inputs": {"variance": "run/variance.csv",
                 "summary": "run/diffusion.json"},
      "out": "figures/variance",
      "title": "ring ensemble",
      "options": {}
    }

``kind`` selects the renderer; ``inputs`` maps the renderer's named
inputs to file paths (resolved relative to the specification file);
``out`` is the output basename — the renderer writes ``<out>.png`` and
``<out>.svg``.  ``title`` and ``options`` are optional.  Unknown keys
anywhere are rejected so typos fail loudly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class SpecError(Exception):
    """A figure specification is missing, malformed or inconsistent."""


# per kind: required input names, optional input names, known options
FIGURE_KINDS: dict[str, dict] = {
    "distribution-heatmap": {
        "required": ("distribution",),
        "optional": (),
        "options": ("cmap", "time_label"),
        "list_inputs": (),
    },
    "disturbance-map": {
        "required": ("field",),
        "optional": (),
        "options": ("cmap", "point_size"),
        "list_inputs": (),
    },
    "variance-line": {
        "required": ("variance",),
        "optional": ("summary",),
        "options": (),
        "list_inputs": (),
    },
    "tomo-scatter": {
        "required": ("comparison",),
        "optional": (),
        "options": ("min_count",),
        "list_inputs": (),
    },
    "trajectory-3d": {
        "required": ("trajectories",),
        "optional": (),
        "options": ("elev_deg", "azim_deg"),
        "list_inputs": ("trajectories",),
    },
}


@dataclass(frozen=True)
class FigureSpec:
    """A validated figure specification with resolved input paths."""

    kind: str
    inputs: dict
    out: Path
    title: str | None = None
    options: dict = field(default_factory=dict)


def _resolve(raw, base: Path, crumb: str) -> Path:
    if not isinstance(raw, str) or not raw:
        raise SpecError(f"{crumb} must be a non-empty path string")
    path = Path(raw)
    if not path.is_absolute():
        path = base / path
    if not path.is_file():
        raise SpecError(f"{crumb}: input file not found: {path}")
    return path


def load_spec(path, *, out_dir=None) -> FigureSpec:
    """Load and validate a figure specification file.

    Relative input paths resolve against the specification's directory;
    a relative ``out`` resolves against ``out_dir`` when given, else
    against the specification's directory as well.
    """
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read spec file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec file is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise SpecError("spec file must hold a JSON object")

    unknown = set(raw) - {"kind", "inputs", "out", "title", "options"}
    if unknown:
        raise SpecError(f"unknown spec key(s): {sorted(unknown)}")
    kind = raw.get("kind")
    if kind not in FIGURE_KINDS:
        raise SpecError(
            f"unknown figure kind: {kind!r}; known: {sorted(FIGURE_KINDS)}"
        )
    schema = FIGURE_KINDS[kind]

    inputs = raw.get("inputs")
    if not isinstance(inputs, dict):
        raise SpecError("inputs must be an object")
    allowed = set(schema["required"]) | set(schema["optional"])
    unknown = set(inputs) - allowed
    if unknown:
        raise SpecError(f"unknown input(s) for {kind}: {sorted(unknown)}")
    missing = [name for name in schema["required"] if name not in inputs]
    if missing:
        raise SpecError(f"missing input(s) for {kind}: {missing}")

    base = path.parent
    resolved = {}
    for name, value in inputs.items():
        crumb = f"inputs.{name}"
        if name in schema["list_inputs"]:
            if not isinstance(value, list) or not value:
                raise SpecError(f"{crumb} must be a non-empty list of paths")
            resolved[name] = [
                _resolve(v, base, f"{crumb}[{i}]")
                for i, v in enumerate(value)
            ]
        else:
            resolved[name] = _resolve(value, base, crumb)

    out = raw.get("out")
    if not isinstance(out, str) or not out:
        raise SpecError("out must be a non-empty basename string")
    out_path = Path(out)
    if not out_path.is_absolute():
        out_path = (Path(out_dir) if out_dir is not None else base) / out_path
    if out_path.suffix in (".png", ".svg"):
        raise SpecError("out is a basename; the renderer adds .png/.svg")

    title = raw.get("title")
    if title is not None and not isinstance(title, str):
        raise SpecError("title must be a string or omitted")

    options = raw.get("options", {})
    if not isinstance(options, dict):
        raise SpecError("options must be an object")
    unknown = set(options) - set(schema["options"])
    if unknown:
        raise SpecError(f"unknown option(s) for {kind}: {sorted(unknown)}")

    return FigureSpec(kind=kind, inputs=resolved, out=out_path,
                      title=title, options=dict(options))
