"""Problem-file and report serialization: JSON for structured data, CSV for
trajectories. Numbers round-trip exactly through the shortest decimal form."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .certificate import Certificate
from .closedloop import BaseTrajectory, ClosedLoopReport
from .errors import InputError
from .lifting import LiftedProblem, ProblemData

SCHEMA_VERSION = 1


def problem_to_dict(pd: ProblemData) -> dict:
    obj = {
        "schema_version": SCHEMA_VERSION,
        "n": pd.n,
        "m": pd.m,
        "mode": "periodic" if pd.periodic else "window",
        ("period" if pd.periodic else "window_length"): pd.count,
        "A": pd.A.tolist(),
        "B": pd.B.tolist(),
        "Q": pd.Q.tolist(),
        "R": pd.R.tolist(),
    }
    if pd.name:
        obj["name"] = pd.name
    if pd.description:
        obj["description"] = pd.description
    return obj


def _require(obj: dict, key: str, kind, source: str):
    if key not in obj:
        raise InputError(f"{source}: missing required field {key!r}")
    val = obj[key]
    if kind is int and (not isinstance(val, int) or isinstance(val, bool)):
        raise InputError(f"{source}: field {key!r} must be an integer")
    if kind is str and not isinstance(val, str):
        raise InputError(f"{source}: field {key!r} must be a string")
    if kind is list and not isinstance(val, list):
        raise InputError(f"{source}: field {key!r} must be an array")
    return val


def _matrix_stack(obj: dict, key: str, shape: tuple, source: str) -> np.ndarray:
    raw = _require(obj, key, list, source)
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{source}: field {key!r} is not numeric: {exc}") from exc
    if arr.shape != shape:
        raise InputError(
            f"{source}: field {key!r} has shape {arr.shape}, expected {shape}"
        )
    if not np.all(np.isfinite(arr)):
        bad = int(np.argwhere(~np.isfinite(arr).all(axis=tuple(range(1, arr.ndim))))[0][0])
        raise InputError(f"{source}: {key}[{bad}] contains NaN or infinity")
    return arr


def problem_from_dict(obj: dict, source: str = "<dict>") -> ProblemData:
    if not isinstance(obj, dict):
        raise InputError(f"{source}: top level must be a JSON object")
    version = _require(obj, "schema_version", int, source)
    if version != SCHEMA_VERSION:
        raise InputError(
            f"{source}: unsupported schema_version {version} (expected {SCHEMA_VERSION})"
        )
    n = _require(obj, "n", int, source)
    m = _require(obj, "m", int, source)
    mode = _require(obj, "mode", str, source)
    if mode not in ("periodic", "window"):
        raise InputError(f"{source}: mode must be 'periodic' or 'window', got {mode!r}")
    count_key = "period" if mode == "periodic" else "window_length"
    count = _require(obj, count_key, int, source)
    if n < 1 or m < 1 or count < 1:
        raise InputError(f"{source}: n, m and {count_key} must be positive")
    A = _matrix_stack(obj, "A", (count, n, n), source)
    B = _matrix_stack(obj, "B", (count, n, m), source)
    Q = _matrix_stack(obj, "Q", (count, n, n), source)
    R = _matrix_stack(obj, "R", (count, m, m), source)
    return ProblemData(
        A=A,
        B=B,
        Q=Q,
        R=R,
        periodic=(mode == "periodic"),
        name=obj.get("name", ""),
        description=obj.get("description", ""),
    )


def parse_problem(path) -> ProblemData:
    """Load and fully validate a problem file."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"problem file not found: {path}")
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON: {exc}") from exc
    return problem_from_dict(obj, source=str(path))


def emit_problem(pd: ProblemData, path) -> None:
    write_json(problem_to_dict(pd), path)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def problem_digest(pd: ProblemData) -> str:
    """SHA-256 of the canonical JSON form of the problem."""
    return hashlib.sha256(canonical_json(problem_to_dict(pd)).encode()).hexdigest()


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def certificate_to_dict(cert: Certificate) -> dict:
    return asdict(cert)


def lifted_to_dict(lp: LiftedProblem, include_matrices: bool = True) -> dict:
    obj = {
        "n": lp.n,
        "m": lp.m,
        "d": lp.d,
        "mode": "periodic" if lp.periodic else "window",
        "lifted_steps": lp.period,
        "margins": {
            "q_min_eig": lp.q_lo,
            "bbt_min_eig": lp.b_lo,
            "aat_min_eig": lp.a_lo,
        },
    }
    if include_matrices:
        obj["A"] = lp.A.tolist()
        obj["B"] = lp.B.tolist()
        obj["Q"] = lp.Q.tolist()
        obj["R"] = lp.R.tolist()
        obj["input_correction"] = lp.corr.tolist()
    return obj


def write_trajectory_csv(path, report: ClosedLoopReport) -> None:
    """Lifted-domain trajectory: t, state, stacked input, stage cost, W1."""
    n = report.x.shape[1]
    md = report.u.shape[1]
    header = (
        ["t"]
        + [f"x{i}" for i in range(n)]
        + [f"u{i}" for i in range(md)]
        + ["stage_cost", "w1"]
    )
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for t in range(report.steps):
            writer.writerow(
                [t]
                + [repr(float(v)) for v in report.x[t]]
                + [repr(float(v)) for v in report.u[t]]
                + [repr(float(report.stage[t])), repr(float(report.w1[t]))]
            )


def write_base_csv(path, base: BaseTrajectory) -> None:
    """Base-domain trajectory: k, state, input, stage cost."""
    n = base.x.shape[1]
    m = base.u.shape[1]
    header = ["k"] + [f"x{i}" for i in range(n)] + [f"u{i}" for i in range(m)] + [
        "stage_cost"
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(base.u.shape[0]):
            writer.writerow(
                [k]
                + [repr(float(v)) for v in base.x[k]]
                + [repr(float(v)) for v in base.u[k]]
                + [repr(float(base.stage[k]))]
            )
