"""File formats: dataset CSV, hyperparameter JSON and neighbour messages."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import Pose
from .gp_expert import Dataset, HyperParams, channel_lml

DATASET_COLUMNS = ("px", "py", "pz", "theta", "y1", "y2", "y3", "y4")


class FormatError(ValueError):
    pass


def noise_std(noise_var: float) -> float:
    """Observation noise std used for a configured variance (floored so the Gram stays PD)."""
    return max(math.sqrt(noise_var), 1e-6)


def dataset_to_csv(d: Dataset, path) -> None:
    buf = io.StringIO()
    np.savetxt(buf, np.hstack([d.X, d.Y]), fmt="%.17g", delimiter=",", header=",".join(DATASET_COLUMNS), comments="")
    Path(path).write_text(buf.getvalue())


def dataset_from_csv(path, noise_var: float) -> Dataset:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FormatError(f"cannot read dataset {path}: {exc}") from None
    if not rows or tuple(c.strip() for c in rows[0]) != DATASET_COLUMNS:
        raise FormatError(f"{path}: header must be {','.join(DATASET_COLUMNS)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] != 8:
        raise FormatError(f"{path}: need at least one row of 8 values")
    return Dataset(data[:, :4], data[:, 4:], np.full(4, noise_std(noise_var)))


def dataset_name(i: int) -> str:
    return f"drone_{i}.csv"


def hyperparams_to_json(h: HyperParams, d: Dataset | None = None, initial: HyperParams | None = None) -> dict:
    """Per-channel hyperparameters, with the achieved (and initial) LML when data is given."""
    channels = h.to_json()
    if d is not None:
        for c, ch in enumerate(channels):
            ch["lml"] = channel_lml(d.X, d.Y[:, c], d.sigma_n[c] ** 2, *h.channel(c))
            if initial is not None:
                ch["lml_initial"] = channel_lml(d.X, d.Y[:, c], d.sigma_n[c] ** 2, *initial.channel(c))
    return {"channels": channels}


def hyperparams_from_json(obj: dict) -> HyperParams:
    try:
        return HyperParams.from_json(obj["channels"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad hyperparameter record: {exc}") from None


def save_hyperparams(records: Sequence[dict], path) -> None:
    doc = {"drones": [{"drone": i, **r} for i, r in enumerate(records)]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_hyperparams(path) -> list[HyperParams]:
    try:
        doc = json.loads(Path(path).read_text())
        drones = sorted(doc["drones"], key=lambda r: r["drone"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"cannot read hyperparameters {path}: {exc}") from None
    return [hyperparams_from_json(r) for r in drones]


def neighbor_message(drone: int, mu, var, pose: Pose) -> dict:
    return {
        "drone": int(drone),
        "mu": [float(v) for v in mu],
        "var": [float(v) for v in var],
        "pose": pose.to_json(),
    }


def message_from_json(obj: dict) -> tuple[int, np.ndarray, np.ndarray, Pose]:
    return int(obj["drone"]), np.asarray(obj["mu"], float), np.asarray(obj["var"], float), Pose.from_json(obj["pose"])


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


MANIFEST = "manifest.json"


def save_dataset_dir(datasets: Sequence[Dataset], out_dir, manifest: dict) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, d in enumerate(datasets):
        dataset_to_csv(d, out / dataset_name(i))
        files.append({"drone": i, "file": dataset_name(i), "rows": d.M})
    write_json({**manifest, "files": files}, out / MANIFEST)


def load_dataset_dir(path, n: int, noise_var: float) -> list[Dataset]:
    """Read ``drone_<i>.csv`` for every drone; the manifest's noise variance wins if present."""
    path = Path(path)
    if not path.is_dir():
        raise FormatError(f"dataset directory {path} does not exist")
    man = path / MANIFEST
    if man.exists():
        try:
            noise_var = float(json.loads(man.read_text()).get("noise_var", noise_var))
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise FormatError(f"bad manifest {man}: {exc}") from None
    return [dataset_from_csv(path / dataset_name(i), noise_var) for i in range(n)]
