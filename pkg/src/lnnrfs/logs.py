"""JSONL truth, scan and estimate logs."""
from __future__ import annotations

import json

import numpy as np

from .errors import ContractError
from .scenario import Scan, TruthSet


def _dump(rec) -> str:
    return json.dumps(rec, separators=(",", ":")) + "\n"


def write_truth(path, truth: TruthSet) -> None:
    with open(path, "w") as fh:
        for t, objs in zip(truth.times, truth.objects):
            fh.write(_dump({"t": float(t), "objects": [
                {"id": int(i), "x": float(s[0]), "y": float(s[1]),
                 "vx": float(s[2]), "vy": float(s[3])} for i, s in objs]}))


def read_truth(path) -> TruthSet:
    times, objects = [], []
    for rec in _records(path):
        times.append(rec["t"])
        objects.append([(o["id"], np.array([o["x"], o["y"], o["vx"], o["vy"]], dtype=float))
                        for o in rec["objects"]])
    return TruthSet(np.array(times, dtype=float), objects)


def write_scans(path, scans: list[Scan]) -> None:
    with open(path, "w") as fh:
        for s in scans:
            fh.write(_dump({"t": s.t, "measurements": s.measurements.tolist()}))


def read_scans(path) -> list[Scan]:
    return [Scan(float(r["t"]), np.array(r["measurements"], dtype=float).reshape(-1, 2))
            for r in _records(path)]


def write_estimates(path, times, estimates) -> None:
    with open(path, "w") as fh:
        for t, est in zip(times, estimates):
            fh.write(_dump({"t": float(t), "estimates": [e.to_dict() for e in est]}))


def read_estimates(path) -> tuple[np.ndarray, list[np.ndarray]]:
    """Times and per-scan ``(n, 4)`` estimated states."""
    times, states = [], []
    for rec in _records(path):
        times.append(rec["t"])
        states.append(np.array([[e["x"], e["y"], e["vx"], e["vy"]] for e in rec["estimates"]],
                               dtype=float).reshape(-1, 4))
    return np.array(times, dtype=float), states


def _records(path):
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if line.strip():
                try:
                    yield json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ContractError(f"{path}:{lineno}: {exc.msg}") from exc
