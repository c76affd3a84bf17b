"""CSV ingestion with optional rescaling, and (de)serialization of run artifacts."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bspline import BasisSpec, KnotVector
from .errors import DataError
from .posterior import FittedPosterior, PriorSpec
from .ridge import Filament


@dataclass(frozen=True)
class AffineTransform:
    """Per-coordinate map of ``[lo, hi]`` onto ``[0, 1]``."""

    lo: tuple
    hi: tuple

    @classmethod
    def identity(cls) -> "AffineTransform":
        return cls((0.0, 0.0), (1.0, 1.0))

    def forward(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return (pts - lo) / (hi - lo)

    def inverse(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        lo, hi = np.asarray(self.lo), np.asarray(self.hi)
        return lo + u * (hi - lo)

    def to_dict(self) -> dict:
        return {"lo": list(self.lo), "hi": list(self.hi)}

    @classmethod
    def from_dict(cls, d) -> "AffineTransform":
        return cls(tuple(float(v) for v in d["lo"]), tuple(float(v) for v in d["hi"]))


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        return float(cell)
    except (TypeError, ValueError):
        raise DataError(f"non-numeric value {cell!r} at row {row}, column {col!r}") from None


def ingest_csv(path, columns=("x1", "x2", "y"), rescale: bool = True, header: bool = True):
    """Read ``(xs, ys, transform)`` from a CSV file.

    With ``header`` the three columns are looked up by name; without it
    ``columns`` must be integer positions.  When ``rescale`` is set each
    coordinate's observed range is mapped onto [0, 1]; responses are never
    transformed.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if header:
        if not rows:
            raise DataError(f"{path}: empty file")
        names = [c.strip() for c in rows[0]]
        idx = []
        for col in columns:
            if col not in names:
                raise DataError(f"{path}: missing column {col!r} (have {names})")
            idx.append(names.index(col))
        labels = list(columns)
        body = rows[1:]
        first = 2
    else:
        idx = [int(c) for c in columns]
        labels = [str(c) for c in columns]
        body = rows
        first = 1
    if not body:
        raise DataError(f"{path}: no data rows")
    data = np.empty((len(body), 3))
    for i, r in enumerate(body):
        for j, (c, lab) in enumerate(zip(idx, labels)):
            if c >= len(r):
                raise DataError(f"{path}: row {i + first} has no column {lab!r}")
            data[i, j] = _parse_float(r[c].strip(), i + first, lab)
    xs, ys = data[:, :2], data[:, 2]
    if rescale:
        lo, hi = xs.min(axis=0), xs.max(axis=0)
        for k in range(2):
            if not hi[k] > lo[k]:
                raise DataError(f"{path}: coordinate {labels[k]!r} is constant; cannot rescale")
        tr = AffineTransform(tuple(lo.tolist()), tuple(hi.tolist()))
        xs = np.clip(tr.forward(xs), 0.0, 1.0)
    else:
        tr = AffineTransform.identity()
    return xs, ys, tr


def _fmt(v: float) -> str:
    return repr(float(v))


def write_data_csv(path, xs, ys) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "y"])
        for (a, b), y in zip(np.asarray(xs), np.asarray(ys)):
            w.writerow([_fmt(a), _fmt(b), _fmt(y)])


def write_filament_csv(path, fil: Filament, transform: AffineTransform | None = None, extra=None) -> None:
    """Filament table ``x1,x2,lambda,status`` in original coordinates.

    ``extra`` optionally maps a leading column name to a per-row value
    (used to tag posterior draws).
    """
    pts = fil.points if transform is None else transform.inverse(fil.points)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        lead = [] if extra is None else [extra[0]]
        w.writerow(lead + ["x1", "x2", "lambda", "status"])
        for i, ((a, b), lam, st) in enumerate(zip(pts, fil.lambdas, fil.status)):
            pre = [] if extra is None else [str(extra[1][i])]
            w.writerow(pre + [_fmt(a), _fmt(b), _fmt(lam), st])


def read_filament_csv(path) -> Filament:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"x1", "x2", "lambda", "status"} - set(reader.fieldnames or [])
        if missing:
            raise DataError(f"{path}: missing columns {sorted(missing)}")
        pts, lams, sts = [], [], []
        for i, r in enumerate(reader):
            pts.append([_parse_float(r["x1"], i + 2, "x1"), _parse_float(r["x2"], i + 2, "x2")])
            lams.append(_parse_float(r["lambda"], i + 2, "lambda"))
            sts.append(r["status"])
    return Filament(np.asarray(pts, dtype=float).reshape(-1, 2), np.asarray(sts, dtype=object), np.asarray(lams))


def _kv_dict(kv: KnotVector) -> dict:
    return {"order": kv.order, "knots": kv.knots.tolist()}


def posterior_to_dict(post: FittedPosterior, transform: AffineTransform | None = None) -> dict:
    return {
        "kv1": _kv_dict(post.spec.kv1),
        "kv2": _kv_dict(post.spec.kv2),
        "prior": {"theta0": post.prior.theta0.tolist(), "lambda0_diag": post.prior.lambda0_diag.tolist()},
        "mean_theta": post.mean_theta.tolist(),
        "precision_chol": post.precision_chol.tolist(),
        "sigma2_hat": post.sigma2_hat,
        "n": post.n,
        "logdet_precision": post.logdet_precision,
        "transform": None if transform is None else transform.to_dict(),
    }


def posterior_from_dict(d: dict):
    spec = BasisSpec(KnotVector(d["kv1"]["order"], np.array(d["kv1"]["knots"])),
                     KnotVector(d["kv2"]["order"], np.array(d["kv2"]["knots"])))
    prior = PriorSpec(np.array(d["prior"]["theta0"]), np.array(d["prior"]["lambda0_diag"]))
    post = FittedPosterior(spec, prior, np.array(d["mean_theta"]), np.array(d["precision_chol"]),
                           float(d["sigma2_hat"]), int(d["n"]), float(d["logdet_precision"]))
    tr = None if d.get("transform") is None else AffineTransform.from_dict(d["transform"])
    return post, tr


def write_json(path, obj) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path) -> dict:
    with Path(path).open(encoding="utf-8") as fh:
        return json.load(fh)
