"""Link JSON and CSV serialization.

JSON layout::

    {"components": [{"vertices": [[x, y, z], ...], "closed": bool}, ...],
     "constraints": [{"component", "end", "kind", "anchor", "basis"}, ...],
     "obstacles": [{"component", "normal", "offset"}, ...]}

Floats are written with :func:`repr`, the shortest string that reads back
to the same double, so a JSON round trip is bit-exact.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .errors import DomainError
from .geometry import EndpointConstraint, HalfSpaceObstacle, PolyCurve, PolyLink

__all__ = ["link_to_dict", "link_from_dict", "dumps", "loads", "save", "load",
           "vertex_csv", "table_csv", "write_table", "write_json",
           "json_text", "finite_or_null"]


def _floats(a):
    return np.asarray(a, float).tolist()


def link_to_dict(L: PolyLink) -> dict:
    comps = [{"vertices": _floats(c.vertices), "closed": bool(c.closed)} for c in L.components]
    cons = [
        {"component": int(ci), "end": end, "kind": c.kind,
         "anchor": _floats(c.anchor), "basis": _floats(c.basis)}
        for (ci, end), c in sorted(L.endpoint_constraints.items())
    ]
    obs = [
        {"component": ci, "normal": _floats(o.normal), "offset": float(o.offset)}
        for ci, group in enumerate(L.obstacles) for o in group
    ]
    return {"components": comps, "constraints": cons, "obstacles": obs}


def link_from_dict(d: dict, check: bool = True) -> PolyLink:
    """Inverse of :func:`link_to_dict`; missing ``constraints``/``obstacles`` mean none."""
    try:
        comps = tuple(PolyCurve(np.asarray(c["vertices"], float), bool(c.get("closed", False)))
                      for c in d["components"])
        cons = {}
        for c in d.get("constraints", []):
            key = (int(c["component"]), c["end"])
            if key in cons:
                raise DomainError(f"duplicate constraint on {key}")
            cons[key] = EndpointConstraint(c["kind"], c["anchor"], np.reshape(c.get("basis", []), (-1, 3)))
        obs = [[] for _ in comps]
        for o in d.get("obstacles", []):
            ci = int(o["component"])
            if not 0 <= ci < len(comps):
                raise DomainError(f"obstacle on missing component {ci}")
            obs[ci].append(HalfSpaceObstacle(o["normal"], o["offset"]))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, DomainError):
            raise
        raise DomainError(f"malformed link data: {e!r}") from e
    return PolyLink(comps, cons, tuple(tuple(g) for g in obs), check=check)


def dumps(L: PolyLink) -> str:
    return json.dumps(link_to_dict(L), separators=(",", ":")) + "\n"


def loads(text: str, check: bool = True) -> PolyLink:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise DomainError(f"invalid JSON: {e}") from e
    if not isinstance(d, dict):
        raise DomainError("link JSON must be an object")
    return link_from_dict(d, check=check)


def save(L: PolyLink, path, fmt: str | None = None) -> None:
    """Write ``L`` as JSON or per-vertex CSV; the format defaults from the suffix."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    if fmt == "json":
        path.write_text(dumps(L))
    elif fmt == "csv":
        path.write_text(vertex_csv(L))
    else:
        raise DomainError(f"unknown format {fmt!r}")


def load(path, check: bool = True) -> PolyLink:
    return loads(Path(path).read_text(), check=check)


def vertex_csv(L: PolyLink) -> str:
    rows = [(ci, i, *p) for ci, c in enumerate(L.components) for i, p in enumerate(c.vertices)]
    return table_csv(["component", "index", "x", "y", "z"], rows)


def _cell(x):
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return int(x)
    return x


def table_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(x) for x in r])
    return buf.getvalue()


def write_table(path, header, rows) -> None:
    Path(path).write_text(table_csv(header, rows))


def finite_or_null(obj):
    """Replace non-finite floats by ``None`` so the output is strict JSON."""
    if isinstance(obj, dict):
        return {k: finite_or_null(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [finite_or_null(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def json_text(obj, indent=2) -> str:
    return json.dumps(finite_or_null(obj), indent=indent, sort_keys=True, allow_nan=False)


def write_json(path, obj) -> None:
    Path(path).write_text(json_text(obj) + "\n")
