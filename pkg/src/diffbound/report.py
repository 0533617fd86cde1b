"""Structured analysis reports: canonical JSON and aligned text."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any

from . import __version__
from ._backend import BACKEND


def _clean(obj: Any) -> Any:
    """JSON-safe copy: tuples become lists, non-finite floats become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalar
        return _clean(obj.item())
    return obj


def dedupe(messages) -> list[str]:
    """Drop repeated messages, keeping first-seen order."""
    seen = set()
    out = []
    for m in messages:
        if m not in seen:
            seen.add(m)
            out.append(m)
    return out


@dataclass
class AnalysisReport:
    """Everything a run produced.

    ``sections`` holds the results (bounds, region, diagnostics, tables);
    ``provenance`` records seed, version and a timestamp.
    """

    kind: str
    sections: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    def warn(self, *messages: str) -> None:
        self.warnings = dedupe([*self.warnings, *messages])

    def stamp(self, seed: int | None, config: dict) -> None:
        self.provenance = {
            "version": __version__,
            "backend": BACKEND,
            "seed": seed,
            "config": config,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        }

    def to_dict(self) -> dict:
        return _clean({"kind": self.kind, **self.sections, "warnings": dedupe(self.warnings),
                       "provenance": self.provenance})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"

    def to_text(self) -> str:
        d = self.to_dict()
        lines = []
        pre = self.sections.get("table_text")
        if pre:
            lines.append(pre.rstrip("\n"))
            lines.append("")
        flat = []
        for key in sorted(d):
            if key in ("warnings", "table_text"):
                continue
            _flatten(d[key], key, flat)
        width = max((len(k) for k, _ in flat), default=0)
        lines.extend(f"{k.ljust(width)}  {v}" for k, v in flat)
        for w in d["warnings"]:
            lines.append(f"warning: {w}")
        return "\n".join(lines) + "\n"


def _fmt(v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _flatten(obj: Any, prefix: str, out: list) -> None:
    if isinstance(obj, dict):
        for k in sorted(obj):
            _flatten(obj[k], f"{prefix}.{k}", out)
    elif isinstance(obj, list) and obj and all(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            _flatten(v, f"{prefix}[{i}]", out)
    elif isinstance(obj, list):
        out.append((prefix, "[" + ", ".join(_fmt(v) for v in obj) + "]"))
    else:
        out.append((prefix, _fmt(obj)))
