"""Run artifacts: CSV traces, SVG snapshots and run manifests.

Every file is written to a temporary sibling and renamed into place.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .geometry import DomainPolygon

TRACE_HEADER = (
    "t, agent, px, py, ux_nom, uy_nom, ux, uy, h, hbar, "
    "theta_hat_norm, dhat_max_norm, neighbor, min_dist, H_cost"
)
DEFAULT_SNAPSHOT_TIMES = (0.0, 1.0, 10.0, 30.0)


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _g(x) -> str:
    return f"{float(x):.9g}"


def trace_lines(records):
    yield TRACE_HEADER
    for r in records:
        t, md, H = _g(r.t), _g(r.min_dist), _g(r.H_cost)
        th = r.theta_hat_norm
        for i in range(len(r.positions)):
            yield ", ".join(
                (
                    t,
                    str(i),
                    _g(r.positions[i, 0]),
                    _g(r.positions[i, 1]),
                    _g(r.u_nom[i, 0]),
                    _g(r.u_nom[i, 1]),
                    _g(r.u[i, 0]),
                    _g(r.u[i, 1]),
                    _g(r.h[i]),
                    _g(r.hbar[i]),
                    _g(th[i]),
                    _g(r.dhat_max_norm[i]),
                    str(int(r.neighbor[i])),
                    md,
                    H,
                )
            )


def emit_trace(records, path) -> Path:
    """Write one row per agent per step; values carry 9 significant digits."""
    records = list(records)
    if not records:
        raise ValueError("cannot write a trace for an empty run")
    return atomic_write(path, "\n".join(trace_lines(records)) + "\n")


def read_trace(path) -> dict[str, np.ndarray]:
    """Load a trace written by :func:`emit_trace` into column arrays."""
    with open(path) as fh:
        header = [c.strip() for c in fh.readline().split(",")]
        rows = [line.split(",") for line in fh if line.strip()]
    cols = list(zip(*rows)) if rows else [[] for _ in header]
    return {name: np.array([float(v) for v in col]) for name, col in zip(header, cols)}


def nearest_record(records, t: float):
    return min(records, key=lambda r: (abs(r.t - t), r.t))


def emit_snapshot(record, domain: DomainPolygon, cells, path, t_label: str, r_safe: float, density=None) -> Path:
    """Static SVG 1.1 picture of one step.

    Domain outline as a ``path``; one ``polygon`` per Voronoi cell (empty
    ``points`` for agents whose cell is empty); one red ``circle`` per safety
    disk; agent centres as round-capped zero-length strokes; density level
    sets as ``ellipse`` elements.
    """
    if record is None:
        raise ValueError("snapshot needs a recorded step")
    P = np.asarray(record.positions, dtype=float)
    v = domain.vertices
    lo, hi = v.min(axis=0), v.max(axis=0)
    pad = 0.08 * float(max(hi - lo))
    lo, hi = lo - pad, hi + pad
    scale = 400.0 / float(max(hi - lo))
    W, H = (hi - lo) * scale

    def xy(q):
        return (q[0] - lo[0]) * scale, (hi[1] - q[1]) * scale

    def pts(poly):
        return " ".join("{:.3f},{:.3f}".format(*xy(q)) for q in poly)

    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{W:.1f}" height="{H + 24:.1f}" viewBox="0 0 {W:.3f} {H + 24:.3f}">',
        f"<title>t = {t_label}</title>",
        f'<rect x="0" y="0" width="{W:.3f}" height="{H + 24:.3f}" fill="white"/>',
    ]
    if density is not None and hasattr(density, "sigma"):
        cx, cy = xy(density.mean)
        for k in (1, 2, 3):
            out.append(
                f'<ellipse class="density" cx="{cx:.3f}" cy="{cy:.3f}" rx="{k * density.sigma[0] * scale:.3f}" '
                f'ry="{k * density.sigma[1] * scale:.3f}" fill="none" stroke="#999999" stroke-dasharray="4,3"/>'
            )
    d = "M " + " L ".join("{:.3f} {:.3f}".format(*xy(q)) for q in v) + " Z"
    out.append(f'<path class="domain" d="{d}" fill="none" stroke="#1f4fd8" stroke-width="2"/>')
    for i, cell in enumerate(cells):
        out.append(
            f'<polygon class="cell" id="cell{i}" points="{pts(cell) if len(cell) else ""}" '
            'fill="none" stroke="#1f4fd8" stroke-width="0.8"/>'
        )
    r_px = r_safe * scale
    for i, p in enumerate(P):
        x, y = xy(p)
        out.append(f'<circle class="safety" cx="{x:.3f}" cy="{y:.3f}" r="{r_px:.3f}" fill="none" stroke="red"/>')
        out.append(
            f'<path class="agent" d="M {x:.3f} {y:.3f} h 0" stroke="black" stroke-width="5" stroke-linecap="round"/>'
        )
    off = sum(not domain.contains(p) for p in P)
    label = f"t = {t_label} s"
    if off:
        label += f"  ({off} of {len(P)} agents off the domain)"
    out.append(f'<text x="6" y="{H + 17:.1f}" font-family="sans-serif" font-size="13">{label}</text>')
    out.append("</svg>")
    return atomic_write(path, "\n".join(out) + "\n")


def write_manifest(path, manifest: dict) -> Path:
    def clean(v):
        if isinstance(v, float) and not math.isfinite(v):
            return str(v)
        if isinstance(v, dict):
            return {k: clean(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [clean(x) for x in v]
        if isinstance(v, (np.floating, np.integer)):
            return clean(v.item())
        return v

    return atomic_write(path, json.dumps(clean(manifest), indent=2, sort_keys=True) + "\n")
