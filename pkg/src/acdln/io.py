"""Output writers: legacy VTK snapshots, the energy trace CSV and run metadata."""
from __future__ import annotations

import csv
import json
import platform
import sys
from pathlib import Path

import numpy as np

from .energy import CSV_FIELDS, EnergyRecord
from .solver import Discretization, Fields


def _p1_on_p2_nodes(disc: Discretization, q: np.ndarray) -> np.ndarray:
    """Linear interpolation of P1 coefficients to the P2 node set."""
    edges = disc.mesh.edges
    return np.concatenate([q, 0.5 * (q[edges[:, 0]] + q[edges[:, 1]])])


def sub_triangles(disc: Discretization) -> np.ndarray:
    """Each P2 triangle split into four linear ones on its six nodes."""
    c = disc.scal.cell_dofs  # v0 v1 v2 m01 m12 m20
    return np.concatenate([
        c[:, [0, 3, 5]],
        c[:, [3, 1, 4]],
        c[:, [5, 4, 2]],
        c[:, [3, 4, 5]],
    ])


def point_arrays(disc: Discretization, f: Fields) -> dict[str, np.ndarray]:
    n = disc.n2
    pad = np.zeros(n)
    return {
        "u": np.column_stack([f.u[:n], f.u[n:], pad]),
        "w": np.column_stack([f.w[:n], f.w[n:], pad]),
        "p": _p1_on_p2_nodes(disc, f.p),
        "xi": _p1_on_p2_nodes(disc, f.xi),
        "phi": f.phi,
        "m": f.m,
    }


def write_vtk(path: str | Path, disc: Discretization, f: Fields, t: float | None = None) -> Path:
    """Legacy ASCII VTK unstructured grid with all six fields as point data."""
    path = Path(path)
    nodes = disc.scal.nodes
    tris = sub_triangles(disc)
    arrays = point_arrays(disc, f)
    title = "acdln snapshot" if t is None else f"acdln snapshot t={t!r}"
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(nodes)} double",
    ]
    lines += [f"{x!r} {y!r} 0.0" for x, y in nodes.tolist()]
    lines.append(f"CELLS {len(tris)} {4 * len(tris)}")
    lines += [f"3 {a} {b} {c}" for a, b, c in tris.tolist()]
    lines.append(f"CELL_TYPES {len(tris)}")
    lines += ["5"] * len(tris)
    lines.append(f"POINT_DATA {len(nodes)}")
    for name, arr in arrays.items():
        if arr.ndim == 2:
            lines.append(f"VECTORS {name} double")
            lines += [f"{a!r} {b!r} {c!r}" for a, b, c in arr.tolist()]
        else:
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [repr(v) for v in arr.tolist()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_vtk(path: str | Path) -> dict:
    """Minimal reader for the files produced by :func:`write_vtk`."""
    tokens = Path(path).read_text().split("\n")
    out = {"point_data": {}}
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("POINTS"):
            n = int(line.split()[1])
            out["points"] = np.array([[float(v) for v in tokens[i + 1 + j].split()] for j in range(n)])
            i += n
        elif line.startswith("CELLS"):
            n = int(line.split()[1])
            out["cells"] = np.array([[int(v) for v in tokens[i + 1 + j].split()[1:]] for j in range(n)])
            i += n
        elif line.startswith("CELL_TYPES"):
            n = int(line.split()[1])
            out["cell_types"] = np.array([int(tokens[i + 1 + j]) for j in range(n)])
            i += n
        elif line.startswith("VECTORS"):
            name = line.split()[1]
            n = len(out["points"])
            out["point_data"][name] = np.array(
                [[float(v) for v in tokens[i + 1 + j].split()] for j in range(n)])
            i += n
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            n = len(out["points"])
            out["point_data"][name] = np.array([float(tokens[i + 2 + j]) for j in range(n)])
            i += n + 1
        i += 1
    return out


def write_energy_csv(path: str | Path, records: list[EnergyRecord]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_FIELDS)
        for rec in records:
            out.writerow([repr(float(v)) if isinstance(v, float) else v for v in rec.row()])
    return path


def read_energy_csv(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    conv = {"step": int, "newton_iters": int}
    return [{k: conv.get(k, float)(v) for k, v in row.items()} for row in rows]


def build_identifier() -> dict:
    from . import __version__, kernels

    import scipy

    return {
        "acdln": __version__,
        "kernels": kernels.BACKEND,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "platform": platform.platform(),
    }


def write_metadata(path: str | Path, config: dict, seed: int | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    meta = {"config": config, "seed": seed, "build": build_identifier()}
    if extra:
        meta.update(extra)
    path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
    return path
