"""File formats for demonstrations, via-points, tables, policies, manifests.

Everything textual: comma-separated columns with '#'-prefixed metadata
lines, JSON for structured records. Floats are written with repr so a
save/load round trip reproduces the exact double. Manifests carry no
timestamps; re-running a command from its manifest must reproduce outputs
byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from .alignment import Trajectory
from .errors import FormatError, ParseError
from .gp import HeteroGPModel, KernelParams, TrainingSet, fit_gp
from .policy import DIM_NAMES, TaskPolicy, ViaPoint
from .se3 import Pose, RotationVector, quaternion_of, rotvec_from_quaternion

FORMAT_DEMO = "gplfd-demo v1"
FORMAT_VIA = "gplfd-via v1"
FORMAT_TABLE = "gplfd-table v1"
FORMAT_POLICY = "gplfd-policy v1"
FORMAT_MANIFEST = "gplfd-manifest v1"

_DEMO_HEADER = ["t", "x", "y", "z", "qw", "qx", "qy", "qz"]
_VIA_HEADER = _DEMO_HEADER + ["position_strength", "rotation_strength"]
_QUAT_ORDERS = ("wxyz", "xyzw")


def _fmt(value) -> str:
    return repr(float(value))


def _write_columnar(path, fmt_tag, metadata, header, rows):
    lines = [f"# format: {fmt_tag}"]
    for key, value in metadata.items():
        lines.append(f"# {key}: {value}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _read_columnar(path):
    """Returns (metadata, header, rows-with-line-numbers)."""
    metadata, header, rows = {}, None, []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if header is not None:
                raise ParseError("metadata after the header row", line=lineno)
            body = line.lstrip("#").strip()
            if ":" not in body:
                raise ParseError("metadata line is not 'key: value'", line=lineno)
            key, value = body.split(":", 1)
            metadata[key.strip()] = value.strip()
        elif header is None:
            header = [cell.strip() for cell in line.split(",")]
        else:
            rows.append((lineno, line.split(",")))
    if header is None:
        raise FormatError(f"{path}: no header row")
    return metadata, header, rows


def _parse_floats(cells, lineno, expected):
    if len(cells) != expected:
        raise ParseError(f"expected {expected} columns, found {len(cells)}",
                         line=lineno)
    out = []
    for cell in cells:
        try:
            out.append(float(cell))
        except ValueError:
            raise ParseError(f"unreadable number {cell.strip()!r}",
                             line=lineno) from None
    return out


def _check_format(metadata, expected, path):
    found = metadata.get("format")
    if found != expected:
        raise FormatError(f"{path}: expected format {expected!r}, found {found!r}")


def _quaternion_order(metadata, path):
    order = metadata.get("quaternion")
    if order not in _QUAT_ORDERS:
        raise FormatError(f"{path}: unsupported quaternion convention {order!r}")
    return order


def _pose_from_cells(values, order, lineno):
    position = np.array(values[0:3])
    quat = np.array(values[3:7])
    if order == "xyzw":
        quat = quat[[3, 0, 1, 2]]
    if abs(np.linalg.norm(quat) - 1.0) > 1e-6:
        raise ParseError("quaternion is not unit length", line=lineno)
    return Pose(position, rotvec_from_quaternion(quat))


# ---------------------------------------------------------------------------
# Demonstrations
# ---------------------------------------------------------------------------

def save_demonstration(path, traj: Trajectory, frame: str = "task") -> None:
    rows = []
    for t, pose in zip(traj.stamps, traj.poses):
        q = quaternion_of(pose.rotation)
        rows.append([t, *pose.position, *q])
    _write_columnar(path, FORMAT_DEMO,
                    {"frame": frame, "quaternion": "wxyz"},
                    _DEMO_HEADER, rows)


def load_demonstration(path) -> Trajectory:
    metadata, header, rows = _read_columnar(path)
    _check_format(metadata, FORMAT_DEMO, path)
    order = _quaternion_order(metadata, path)
    stamps, poses = [], []
    for lineno, cells in rows:
        values = _parse_floats(cells, lineno, len(_DEMO_HEADER))
        stamps.append(values[0])
        poses.append(_pose_from_cells(values[1:], order, lineno))
    return Trajectory(np.array(stamps), tuple(poses))


def load_demonstrations(paths) -> list:
    """Load several demonstration files, requiring consistent headers."""
    paths = list(paths)
    demos, orders = [], set()
    for path in paths:
        metadata, _, _ = _read_columnar(path)
        _check_format(metadata, FORMAT_DEMO, path)
        orders.add(_quaternion_order(metadata, path))
    if len(orders) > 1:
        raise FormatError("mixed quaternion conventions across demonstration "
                          f"files: {sorted(orders)}")
    for path in paths:
        demos.append(load_demonstration(path))
    return demos


# ---------------------------------------------------------------------------
# Via-points
# ---------------------------------------------------------------------------

def save_viapoints(path, vias) -> None:
    rows = []
    for via in vias:
        q = quaternion_of(via.pose.rotation)
        rows.append([via.time, *via.pose.position, *q,
                     via.strength[0], via.strength[3]])
    _write_columnar(path, FORMAT_VIA, {"quaternion": "wxyz"},
                    _VIA_HEADER, rows)


def load_viapoints(path) -> list:
    metadata, header, rows = _read_columnar(path)
    _check_format(metadata, FORMAT_VIA, path)
    order = _quaternion_order(metadata, path)
    vias = []
    for lineno, cells in rows:
        values = _parse_floats(cells, lineno, len(_VIA_HEADER))
        pose = _pose_from_cells(values[1:8], order, lineno)
        strength = np.array([values[8]] * 3 + [values[9]] * 3)
        vias.append(ViaPoint(values[0], pose, strength))
    return vias


# ---------------------------------------------------------------------------
# Generic tables and simulation traces
# ---------------------------------------------------------------------------

def write_table(path, header, rows, metadata=None) -> None:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    if rows.size and rows.shape[1] != len(header):
        raise FormatError("table rows do not match the header width")
    _write_columnar(path, FORMAT_TABLE, dict(metadata or {}), list(header), rows)


def read_table(path):
    """Returns (metadata, header, float array of shape (rows, columns))."""
    metadata, header, raw = _read_columnar(path)
    _check_format(metadata, FORMAT_TABLE, path)
    rows = [_parse_floats(cells, lineno, len(header)) for lineno, cells in raw]
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(header)))
    return metadata, header, data


def save_trace(path, trace) -> None:
    """Columnar dump of a simulation trace, one block of 6 axes per signal."""
    header = ["t"]
    blocks = [("e", trace.error), ("de", trace.rate), ("kp", trace.stiffness),
              ("d", trace.damping), ("F", trace.force), ("sigma", trace.sigma)]
    for tag, _ in blocks:
        header.extend(f"{tag}_{name}" for name in DIM_NAMES)
    rows = np.hstack([trace.times[:, None]] + [arr for _, arr in blocks])
    write_table(path, header, rows, {"inertia": _fmt(trace.inertia)})


# ---------------------------------------------------------------------------
# Policies
# ---------------------------------------------------------------------------

def _gp_payload(model):
    noise = model.noise
    return {
        "t": model.train.t.tolist(),
        "y": model.train.y.tolist(),
        "length_scale": float(model.params.length_scale),
        "signal_std": float(model.params.signal_std),
        "noise": noise.tolist() if isinstance(noise, np.ndarray) else float(noise),
    }


def _gp_restore(payload):
    train = TrainingSet(np.array(payload["t"]), np.array(payload["y"]))
    params = KernelParams(payload["length_scale"], payload["signal_std"])
    noise = payload["noise"]
    noise = np.array(noise) if isinstance(noise, list) else float(noise)
    return fit_gp(train, params, noise=noise)


def save_policy(path, policy: TaskPolicy) -> None:
    dims = []
    for name, dim in zip(DIM_NAMES, policy.dims):
        dims.append({"name": name,
                     "degenerate": bool(dim.degenerate),
                     "signal": _gp_payload(dim.signal_gp),
                     "noise": _gp_payload(dim.noise_gp)})
    payload = {"format": FORMAT_POLICY,
               "grid": policy.grid.tolist(),
               "dims": dims}
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_policy(path) -> TaskPolicy:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != FORMAT_POLICY:
        raise FormatError(f"{path}: not a {FORMAT_POLICY} file")
    dims = []
    for entry in payload["dims"]:
        dims.append(HeteroGPModel(signal_gp=_gp_restore(entry["signal"]),
                                  noise_gp=_gp_restore(entry["noise"]),
                                  degenerate=bool(entry["degenerate"])))
    return TaskPolicy(dims=tuple(dims), grid=np.array(payload["grid"]))


# ---------------------------------------------------------------------------
# Run manifests
# ---------------------------------------------------------------------------

def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions() -> dict:
    import numpy
    import scipy

    from . import __version__

    return {"python": sys.version.split()[0],
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "gplfd": __version__}


def write_manifest(path, command: str, config: dict, inputs, outputs,
                   arguments=None) -> None:
    """Record everything needed to reproduce a command's outputs.

    ``arguments`` carries command-line extras that live outside the config
    (file names, query grids). No timestamps by design: two runs of the
    same command from the same manifest must produce identical manifests.
    """
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    manifest = {
        "format": FORMAT_MANIFEST,
        "command": command,
        "seed": config.get("seed"),
        "config": config,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "arguments": dict(arguments or {}),
        "inputs": {str(p): file_sha256(p) for p in inputs},
        "outputs": {str(p): file_sha256(p) for p in outputs},
        "versions": _versions(),
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    manifest = json.loads(Path(path).read_text())
    if manifest.get("format") != FORMAT_MANIFEST:
        raise FormatError(f"{path}: not a {FORMAT_MANIFEST} file")
    return manifest
