"""File formats: model/perturbation JSON, trajectory CSV, run manifests.

One config language (JSON) for models and perturbations, CSV only for
trajectories and scan series.  JSON numbers use Python's shortest
round-trip representation so a reloaded file replays bit-identically;
CSV keeps 10 significant digits (it feeds plots, not replays).
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidFormat
from .model import (BoundaryConditions, ConstantGain, FloatArray, GainModel,
                    GridTabulated, LossModel, QuadraticWell, Trajectory)
from .oscillators import Perturbation, Sinusoid
from .variational import el_residual

MODEL_SCHEMA = "kpidyn-model/1"
PERTURBATION_SCHEMA = "kpidyn-perturbation/1"
MANIFEST_SCHEMA = "kpidyn-manifest/1"

CSV_FMT = ".10g"


@dataclass
class ModelSpec:
    """A loss model, a gain model and (optionally) boundary conditions."""

    loss: LossModel
    gain: GainModel
    boundary: BoundaryConditions | None = None

    @property
    def n(self) -> int:
        return self.loss.n


def load_model(path) -> ModelSpec:
    """Parse a kpidyn-model/1 JSON file."""
    doc = _load_json(path)
    if doc.get("schema") != MODEL_SCHEMA:
        raise InvalidFormat(f"{path}: expected schema {MODEL_SCHEMA!r}, "
                            f"got {doc.get('schema')!r}")
    try:
        n = int(doc["n"])
        loss = LossModel(np.array(doc["loss"]["matrix"], dtype=float))
        gain = _parse_gain(doc["gain"], n)
    except KeyError as exc:
        raise InvalidFormat(f"{path}: missing field {exc}") from None
    if loss.n != n:
        raise InvalidFormat(f"{path}: loss matrix is {loss.n}-dim, header says {n}")
    if gain.n != n:
        raise InvalidFormat(f"{path}: gain model is {gain.n}-dim, header says {n}")
    boundary = None
    if "boundary" in doc and doc["boundary"] is not None:
        b = doc["boundary"]
        try:
            boundary = BoundaryConditions(x1=np.array(b["x1"], dtype=float),
                                          t1=float(b["t1"]),
                                          x2=np.array(b["x2"], dtype=float),
                                          t2=float(b["t2"]))
        except KeyError as exc:
            raise InvalidFormat(f"{path}: boundary missing field {exc}") from None
    return ModelSpec(loss=loss, gain=gain, boundary=boundary)


def _parse_gain(g: dict, n: int) -> GainModel:
    kind = g.get("kind")
    if kind == "constant":
        return ConstantGain(u0=float(g["u0"]), n=n)
    if kind == "quadratic_well":
        return QuadraticWell(u0=float(g.get("u0", 0.0)),
                             center=np.array(g["center"], dtype=float),
                             curvature=np.array(g["curvature"], dtype=float))
    if kind == "grid":
        axes = tuple(np.array(a, dtype=float) for a in g["axes"])
        return GridTabulated(axes=axes, values_grid=np.array(g["values"], dtype=float))
    raise InvalidFormat(f"unknown gain kind {kind!r}")


def save_model(spec: ModelSpec, path) -> None:
    doc: dict = {"schema": MODEL_SCHEMA, "n": spec.n,
                 "loss": {"matrix": spec.loss.k_matrix.tolist()}}
    gain = spec.gain
    if isinstance(gain, ConstantGain):
        doc["gain"] = {"kind": "constant", "u0": gain.u0}
    elif isinstance(gain, QuadraticWell):
        doc["gain"] = {"kind": "quadratic_well", "u0": gain.u0,
                       "center": gain.center.tolist(),
                       "curvature": gain.curvature.tolist()}
    elif isinstance(gain, GridTabulated):
        doc["gain"] = {"kind": "grid", "axes": [a.tolist() for a in gain.axes],
                       "values": gain.values_grid.tolist()}
    else:
        raise InvalidFormat(f"cannot serialize gain model {type(gain).__name__}")
    if spec.boundary is not None:
        b = spec.boundary
        doc["boundary"] = {"x1": b.x1.tolist(), "t1": b.t1,
                           "x2": b.x2.tolist(), "t2": b.t2}
    _dump_json(doc, path)


def load_perturbation(path) -> Perturbation:
    doc = _load_json(path)
    if doc.get("schema") != PERTURBATION_SCHEMA:
        raise InvalidFormat(f"{path}: expected schema {PERTURBATION_SCHEMA!r}, "
                            f"got {doc.get('schema')!r}")
    forcing = _parse_sinusoid_list(doc.get("forcing"))
    modulation = _parse_sinusoid_list(doc.get("stiffness_modulation"))
    damping = doc.get("damping")
    if damping is not None:
        damping = np.array(damping, dtype=float)
    cross = doc.get("cross_stiffness")
    if cross is not None:
        cross = tuple((int(e["i"]), int(e["k"]), _parse_sinusoid(e)) for e in cross)
    return Perturbation(forcing=forcing, stiffness_modulation=modulation,
                        damping=damping, cross_stiffness=cross)


def _parse_sinusoid(e: dict) -> Sinusoid:
    return Sinusoid(amplitude=float(e["amplitude"]), frequency=float(e["frequency"]),
                    phase=float(e.get("phase", 0.0)))


def _parse_sinusoid_list(entries):
    if entries is None:
        return None
    return tuple(None if e is None else _parse_sinusoid(e) for e in entries)


def save_perturbation(pert: Perturbation, path) -> None:
    doc: dict = {"schema": PERTURBATION_SCHEMA}
    doc["forcing"] = _sinusoid_list_doc(pert.forcing)
    doc["stiffness_modulation"] = _sinusoid_list_doc(pert.stiffness_modulation)
    doc["damping"] = pert.damping.tolist() if pert.damping is not None else None
    if pert.cross_stiffness is not None:
        doc["cross_stiffness"] = [
            {"i": i, "k": k, "amplitude": s.amplitude,
             "frequency": s.frequency, "phase": s.phase}
            for i, k, s in pert.cross_stiffness]
    else:
        doc["cross_stiffness"] = None
    _dump_json(doc, path)


def _sinusoid_list_doc(entries):
    if entries is None:
        return None
    return [None if s is None else
            {"amplitude": s.amplitude, "frequency": s.frequency, "phase": s.phase}
            for s in entries]


# -- trajectory CSV ----------------------------------------------------------

def trajectory_header(n: int) -> list[str]:
    return (["t"] + [f"x_{i+1}" for i in range(n)] + [f"v_{i+1}" for i in range(n)]
            + ["U", "K", "E", "D_norm"])


def write_trajectory_csv(path, trajectory: Trajectory, loss: LossModel,
                         gain: GainModel) -> None:
    """Write t, states, velocities plus the derived U, K, E, D_norm columns.

    D_norm is interior-only; the two end rows carry nan there.
    """
    u = gain.values(trajectory.states)
    k = loss.values(trajectory.velocities)
    e = u + k
    d = np.full(trajectory.m, np.nan)
    if trajectory.m >= 3:
        d[1:-1] = np.linalg.norm(el_residual(loss, gain, trajectory), axis=1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(trajectory_header(trajectory.n))
        for i in range(trajectory.m):
            row = ([trajectory.times[i]] + list(trajectory.states[i])
                   + list(trajectory.velocities[i]) + [u[i], k[i], e[i], d[i]])
            w.writerow(format(val, CSV_FMT) for val in row)


def read_trajectory_csv(path) -> Trajectory:
    """Read a trajectory CSV back; derived columns are ignored.

    The time grid is rebuilt as an exact uniform grid between the first
    and last stamps (10-digit CSV rounding would otherwise break the
    uniformity invariant on long runs).
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not rows[0] or rows[0][0] != "t":
        raise InvalidFormat(f"{path}: not a trajectory CSV (missing 't' header)")
    header = rows[0]
    n = sum(1 for c in header if c.startswith("x_"))
    if n < 1 or header[1:1 + n] != [f"x_{i+1}" for i in range(n)] \
            or header[1 + n:1 + 2 * n] != [f"v_{i+1}" for i in range(n)]:
        raise InvalidFormat(f"{path}: unexpected column layout {header}")
    try:
        data = np.array([[float(c) for c in row[:1 + 2 * n]]
                         for row in rows[1:] if row], dtype=float)
    except ValueError as exc:
        raise InvalidFormat(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[0] < 2:
        raise InvalidFormat(f"{path}: need at least 2 data rows")
    t_raw = data[:, 0]
    m = t_raw.size
    times = np.linspace(t_raw[0], t_raw[-1], m)
    dt = (t_raw[-1] - t_raw[0]) / (m - 1)
    if dt <= 0.0 or np.max(np.abs(t_raw - times)) > 1e-6 * dt + 1e-9 * max(1.0, abs(t_raw[-1])):
        raise InvalidFormat(f"{path}: time stamps are not a uniform increasing grid")
    return Trajectory(times=times, states=data[:, 1:1 + n],
                      velocities=data[:, 1 + n:1 + 2 * n])


def write_series_csv(path, columns: dict[str, FloatArray]) -> None:
    """Write named columns (e.g. a scan response) at CSV precision."""
    names = list(columns)
    arrays = [np.asarray(columns[c], dtype=float) for c in names]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for i in range(arrays[0].size):
            w.writerow(format(a[i], CSV_FMT) for a in arrays)


# -- manifests ---------------------------------------------------------------

def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def build_manifest(version: str, subcommand: str, config: dict,
                   input_paths: list, output_paths: list,
                   duration_seconds: float) -> dict:
    return {
        "schema": MANIFEST_SCHEMA,
        "tool": "kpidyn",
        "version": version,
        "subcommand": subcommand,
        "config": config,
        "inputs": {str(p): sha256_file(p) for p in input_paths},
        "outputs": [str(p) for p in output_paths],
        "duration_seconds": duration_seconds,
    }


def write_manifest(manifest: dict, path) -> None:
    """Atomic write: the manifest appears complete or not at all."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InvalidFormat(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise InvalidFormat(f"{path}: expected a JSON object")
    return doc


def _dump_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
