"""CSV persistence.

Every file starts with ``# key=value`` comment lines (always including
``config_hash`` when one is supplied), then a header row, then data.
Floats are written with 17 significant digits so reruns compare byte for
byte.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dictionary import Dictionary
from .edmd import KoopmanMatrix
from .experiments import RECORD_COLUMNS, AccuracyRecord, ExponentRow
from .generator import GeneratorMatrix, ReferenceKoopman
from .mori_zwanzig import GleSolution
from .powerlaw import PowerLawFit
from .simulate import SnapshotPairs, TrajectoryDataset


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % value
    return str(value)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], meta: Mapping | None = None,
              config_hash: str | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if config_hash is not None:
        lines.append(f"# config_hash={config_hash}")
    for k, v in (meta or {}).items():
        lines.append(f"# {k}={fmt(v)}")
    with path.open("w", newline="") as fh:
        for line in lines:
            fh.write(line + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Return (comment metadata, header, rows as strings)."""
    meta: dict[str, str] = {}
    body = []
    with Path(path).open(newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                meta[k.strip()] = v
            else:
                body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: no header row")
    return meta, rows[0], rows[1:]


def _float_block(rows: list[list[str]], start: int = 0) -> np.ndarray:
    return np.array([[float(v) for v in r[start:]] for r in rows], dtype=float)


# trajectories and pairs

def save_dataset(ds: TrajectoryDataset, path, config_hash: str | None = None) -> Path:
    times = ds.times
    header = ["time", "traj_id"] + [f"x_{d + 1}" for d in range(ds.dim)]
    rows = ([times[k], i, *ds.trajectories[i, k]]
            for i in range(ds.n_traj) for k in range(ds.points_per_traj))
    meta = {"system": ds.system_name, "sigma": ds.sigma, "dt_obs": ds.dt_obs, "t0": ds.t0}
    return write_csv(path, header, rows, meta, config_hash)


def load_dataset(path) -> TrajectoryDataset:
    meta, header, rows = read_csv(path)
    data = _float_block(rows)
    ids = data[:, 1].astype(int)
    n_traj = ids.max() + 1
    traj = data[:, 2:].reshape(n_traj, -1, len(header) - 2)
    return TrajectoryDataset(meta.get("system", ""), float(meta["sigma"]), float(meta["dt_obs"]),
                             traj, float(meta.get("t0", 0.0)))


def save_pairs(pairs: SnapshotPairs, stem, config_hash: str | None = None) -> tuple[Path, Path]:
    stem = Path(stem)
    cols = [f"v_{j + 1}" for j in range(pairs.X.shape[1])]
    meta = {"dt_obs": pairs.dt_obs, **{k: v for k, v in pairs.meta.items()}}
    px = write_csv(stem.with_name(stem.name + "_X.csv"), cols, pairs.X, meta, config_hash)
    py = write_csv(stem.with_name(stem.name + "_Y.csv"), cols, pairs.Y, meta, config_hash)
    return px, py


def load_pairs(stem) -> SnapshotPairs:
    stem = Path(stem)
    meta, _, rx = read_csv(stem.with_name(stem.name + "_X.csv"))
    _, _, ry = read_csv(stem.with_name(stem.name + "_Y.csv"))
    dt_obs = float(meta.pop("dt_obs"))
    meta.pop("config_hash", None)
    return SnapshotPairs(_float_block(rx), _float_block(ry), dt_obs, meta)


# matrices

def save_matrix(km: KoopmanMatrix | GeneratorMatrix, stem, config_hash: str | None = None) -> tuple[Path, Path]:
    """Matrix CSV plus a ``.dict`` manifest naming the basis order."""
    stem = Path(stem)
    d = km.dictionary
    if isinstance(km, GeneratorMatrix):
        mat = km.A
        meta = {"kind": "generator", "system": km.system_name, "sigma": km.sigma}
    else:
        mat = km.K
        meta = km.header()
    labels = d.labels()
    rows = ([labels[i], *mat[i]] for i in range(len(d)))
    mpath = write_csv(stem.with_suffix(".csv"), ["row"] + labels, rows, meta, config_hash)
    dpath = stem.with_suffix(".dict")
    dpath.write_text(d.manifest())
    return mpath, dpath


def load_matrix(stem) -> KoopmanMatrix | GeneratorMatrix:
    stem = Path(stem)
    meta, _, rows = read_csv(stem.with_suffix(".csv"))
    d = Dictionary.from_manifest(stem.with_suffix(".dict").read_text())
    mat = _float_block(rows, start=1)
    kind = meta.get("kind", "estimated")
    if kind == "generator":
        return GeneratorMatrix(d, mat, meta.get("system", ""), float(meta.get("sigma", 0.0)))
    common = dict(ridge=float(meta.get("ridge", 0.0)), data_hash=meta.get("data_hash", ""))
    if kind == "reference":
        return ReferenceKoopman(d, float(meta["dt_obs"]), mat, method=meta.get("method", "crank_nicolson"),
                                dt=float(meta.get("dt", 0.0)), sigma=float(meta.get("sigma", 0.0)), **common)
    return KoopmanMatrix(d, float(meta["dt_obs"]), mat, **common)


# Mori-Zwanzig output

def save_gle(sol: GleSolution, path, labels: Sequence[str] | None = None,
             config_hash: str | None = None) -> Path:
    n = sol.c_O.shape[1]
    names = list(labels) if labels is not None else [f"c_{i}" for i in sol.observed or range(n)]
    header = ["time"]
    for part in ("c", "markov", "memory", "noise"):
        header += [f"{part}[{nm}]" for nm in names]
    rows = (np.concatenate([[sol.times[k]], sol.c_O[k], sol.markov[k], sol.memory[k], sol.noise[k]])
            for k in range(len(sol.times)))
    return write_csv(path, header, rows, {"observed": " ".join(map(str, sol.observed))}, config_hash)


# experiment tables

def save_records(records: Sequence[AccuracyRecord], path, config_hash: str | None = None) -> Path:
    rows = ([r.as_row()[c] for c in RECORD_COLUMNS] for r in records)
    return write_csv(path, RECORD_COLUMNS, rows, None, config_hash)


def _parse_params(text: str) -> dict:
    out = {}
    for item in filter(None, text.split(";")):
        k, _, v = item.partition("=")
        out[k] = float(v) if "." in v or "e" in v.lower() else int(v)
    return out


def load_records(path) -> list[AccuracyRecord]:
    _, header, rows = read_csv(path)
    if header != RECORD_COLUMNS:
        raise ValueError(f"{path}: unexpected columns {header}")
    out = []
    for r in rows:
        v = dict(zip(header, r))
        out.append(AccuracyRecord(v["system"], _parse_params(v["params"]), int(v["observed_dim"]), v["target"],
                                  v["dict_kind"], int(v["degree"]), int(v["M"]), float(v["sigma"]),
                                  float(v["error"]), int(v["n_test"]), int(v["seed"])))
    return out


SUMMARY_COLUMNS = ["variant", "target", "alpha1_mean", "alpha1_std", "alpha1_median", "n_fits", "alpha1_values"]


def save_summary(rows: Sequence[ExponentRow], path, config_hash: str | None = None) -> Path:
    body = ([r.variant, r.target, r.alpha1_mean, r.alpha1_std, r.alpha1_median, len(r.alpha1),
             " ".join(fmt(a) for a in r.alpha1)] for r in rows)
    return write_csv(path, SUMMARY_COLUMNS, body, None, config_hash)


FIT_COLUMNS = ["system", "params", "target", "seed", "alpha1", "alpha2", "alpha3", "residual_rms",
               "converged", "identifiable"]


def save_fits(fits: Mapping[tuple, PowerLawFit], path, config_hash: str | None = None) -> Path:
    body = ([k[0], ";".join(f"{a}={b!r}" for a, b in k[1]), k[2], k[3], f.alpha1, f.alpha2, f.alpha3,
             f.residual_rms, f.converged, f.identifiable] for k, f in fits.items())
    return write_csv(path, FIT_COLUMNS, body, None, config_hash)


def save_plot_data(records: Sequence[AccuracyRecord], fits: Mapping[tuple, PowerLawFit], path,
                   n_curve: int = 50, config_hash: str | None = None) -> Path:
    """Long-format table: measured points (kind=data) and fitted curves (kind=fit)."""
    header = ["system", "params", "target", "seed", "kind", "sigma", "value"]
    body = []
    for key, fit in fits.items():
        system, params, target, seed = key
        ptxt = ";".join(f"{a}={b!r}" for a, b in params)
        pts = sorted((r.sigma, r.error) for r in records
                     if r.system == system and tuple(sorted(r.params.items())) == params
                     and r.target == target and r.seed == seed)
        body += [[system, ptxt, target, seed, "data", s, e] for s, e in pts]
        if pts and fit.identifiable and math.isfinite(fit.alpha1):
            grid = np.geomspace(pts[0][0], pts[-1][0], n_curve)
            body += [[system, ptxt, target, seed, "fit", s, v] for s, v in zip(grid, fit(grid))]
    return write_csv(path, header, body, None, config_hash)
