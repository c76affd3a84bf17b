"""Command-line pipeline: simulate -> fit -> select -> scms -> credible, plus hausdorff.

Every command writes its artifacts and a ``summary.json`` into ``--out-dir``.
Failures print one JSON error record to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .bspline import make_spec
from .config import PRESETS, RunConfig, load_config
from .errors import ConfigError, DataError, EmptySetError, SplineFilError
from .field import ScalarField
from .io import (
    ingest_csv, posterior_from_dict, posterior_to_dict, read_filament_csv, read_json,
    write_data_csv, write_filament_csv, write_json,
)
from .metrics import hausdorff
from .posterior import PriorSpec, fit, sample_theta, select_j
from .ridge import DISCARDED_TAU, Filament, scms
from .synth import generate, paper_surface
from .uncertainty import (
    SECOND_DERIVS, CredibleSpec, band_mask, empirical_quantile, estimate_c_over_eta, posterior_suprema,
)

log = logging.getLogger("splinefil")

# sub-stream labels for the master seed
_STREAM_SIMULATE = 0
_STREAM_POSTERIOR = 1


def derived_seed(master: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master), int(stream)])


def _prior_builder(cfg: RunConfig):
    def build(spec):
        p = spec.dim
        return PriorSpec(np.full(p, cfg.prior.mean), np.full(p, cfg.prior.scale))

    return build


def _load_data(cfg: RunConfig, path):
    cols = tuple(cfg.data.columns)
    return ingest_csv(path, cols, rescale=cfg.data.rescale, header=cfg.data.header)


def _select(cfg: RunConfig, xs, ys):
    best, scores = select_j(cfg.select.candidates(), xs, ys, _prior_builder(cfg), cfg.spline.q, return_scores=True)
    return best, scores


def _fit(cfg: RunConfig, xs, ys):
    J = cfg.spline.J
    scores = None
    if J is None:
        J, scores = _select(cfg, xs, ys)
    spec = make_spec(cfg.spline.q, J[0], cfg.spline.q, J[1])
    return fit(spec, _prior_builder(cfg)(spec), xs, ys), scores


def _load_posterior(path):
    return posterior_from_dict(read_json(path))


# ----------------------------------------------------------------- commands


def cmd_simulate(cfg: RunConfig, args, out: Path) -> dict:
    xs, ys = generate(paper_surface(), cfg.simulate.n, cfg.simulate.noise_sd, derived_seed(cfg.seed, _STREAM_SIMULATE))
    write_data_csv(out / "data.csv", xs, ys)
    return {"outputs": ["data.csv"], "n": int(xs.shape[0])}


def cmd_fit(cfg: RunConfig, args, out: Path) -> dict:
    xs, ys, tr = _load_data(cfg, _require(args.data, "--data"))
    post, scores = _fit(cfg, xs, ys)
    write_json(out / "posterior.json", posterior_to_dict(post, tr))
    res = {"outputs": ["posterior.json"], "J": list(post.spec.shape), "sigma2_hat": post.sigma2_hat, "n": post.n}
    if scores is not None:
        res["selection_scores"] = _score_table(scores)
    return res


def _score_table(scores: dict) -> list:
    return [{"J": list(k), "score": (v if np.isfinite(v) else None)} for k, v in scores.items()]


def cmd_select(cfg: RunConfig, args, out: Path) -> dict:
    xs, ys, _ = _load_data(cfg, _require(args.data, "--data"))
    best, scores = _select(cfg, xs, ys)
    write_json(out / "selection.json", {"selected": list(best), "scores": _score_table(scores), "q": cfg.spline.q})
    return {"outputs": ["selection.json"], "selected": list(best)}


def cmd_scms(cfg: RunConfig, args, out: Path) -> dict:
    tr = None
    if args.surface == "paper":
        field = paper_surface()
    elif args.posterior is not None:
        post, tr = _load_posterior(args.posterior)
        field = ScalarField(post.spec, post.mean_theta)
    elif args.data is not None:
        xs, ys, tr = _load_data(cfg, args.data)
        post, _ = _fit(cfg, xs, ys)
        write_json(out / "posterior.json", posterior_to_dict(post, tr))
        field = ScalarField(post.spec, post.mean_theta)
    else:
        raise ConfigError("scms needs one of --posterior, --data or --surface")
    fil = scms(field, cfg.scms.to_scms_config())
    write_filament_csv(out / "filament.csv", fil, tr)
    return {"outputs": ["filament.csv"], "status_counts": fil.status_counts()}


def _safe_hausdorff(a: Filament, b: Filament):
    try:
        return hausdorff(a.ridge_points(), b.ridge_points())
    except EmptySetError:
        return None


def cmd_credible(cfg: RunConfig, args, out: Path) -> dict:
    post, tr = _load_posterior(_require(args.posterior, "--posterior"))
    c = cfg.credible
    scms_cfg = cfg.scms.to_scms_config()
    mean_field = ScalarField(post.spec, post.mean_theta)
    mean_fil = scms(mean_field, scms_cfg)

    thetas = sample_theta(post, post.sigma2_hat, derived_seed(cfg.seed, _STREAM_POSTERIOR), c.samples)
    sup = posterior_suprema(post, thetas, c.grid_n)
    r_q = {k: empirical_quantile(sup[:, i], c.gamma) for i, k in enumerate(SECOND_DERIVS)}
    if c.c_over_eta is None:
        ce = estimate_c_over_eta(mean_field, mean_fil.ridge_only(), c.grid_n)
        ce_source = "estimated"
    else:
        ce, ce_source = float(c.c_over_eta), "config"
    spec = CredibleSpec(c.gamma, c.rho, r_q, ce)
    accepted = np.flatnonzero(band_mask(sup, spec))
    fils = _run_scms_many(post, thetas, accepted, scms_cfg, cfg.workers)

    per_sample = []
    for i, fil in zip(accepted, fils):
        d = _safe_hausdorff(fil, mean_fil)
        per_sample.append({"draw": int(i), "hausdorff": d, "in_ball": None if d is None else bool(d <= spec.radius)})
    manifest = {
        "gamma": c.gamma,
        "rho": c.rho,
        "sample_count": c.samples,
        "r_quantiles": {str(k): v for k, v in r_q.items()},
        "acceptance_fraction": accepted.size / c.samples,
        "per_k_pass_fraction": {str(k): float(np.mean(sup[:, i] <= c.rho * r_q[k])) for i, k in enumerate(SECOND_DERIVS)},
        "c_over_eta": ce,
        "c_over_eta_source": ce_source,
        "radius": spec.radius,
        "per_sample": per_sample,
    }
    write_json(out / "credible_manifest.json", manifest)
    write_filament_csv(out / "mean_filament.csv", mean_fil, tr)
    _write_draw_filaments(out / "credible_filaments.csv", accepted, fils, tr)
    return {"outputs": ["credible_manifest.json", "mean_filament.csv", "credible_filaments.csv"],
            "acceptance_fraction": manifest["acceptance_fraction"], "radius": spec.radius}


def _run_scms_many(post, thetas, idx, scms_cfg, workers):
    def run(i):
        return scms(ScalarField(post.spec, thetas[i]), scms_cfg)

    if workers > 1 and len(idx) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, idx))
    return [run(i) for i in idx]


def _write_draw_filaments(path, idx, fils, tr):
    if not fils:
        write_filament_csv(path, Filament(np.zeros((0, 2)), [], []), tr, ("draw", []))
        return
    # seeds discarded by the threshold carry no information about a draw
    fils = [f.subset(f.status != DISCARDED_TAU) for f in fils]
    pts = np.vstack([f.points for f in fils])
    st = np.concatenate([f.status for f in fils])
    lam = np.concatenate([f.lambdas for f in fils])
    tags = np.concatenate([np.full(len(f), i) for i, f in zip(idx, fils)])
    write_filament_csv(path, Filament(pts, st, lam), tr, ("draw", tags.tolist()))


def cmd_hausdorff(cfg: RunConfig, args, out: Path) -> dict:
    if len(args.files) != 2:
        raise ConfigError("hausdorff needs exactly two filament files")
    a, b = (read_filament_csv(p) for p in args.files)
    d = hausdorff(a.ridge_points(), b.ridge_points())
    write_json(out / "hausdorff.json", {"a": str(args.files[0]), "b": str(args.files[1]), "hausdorff": d})
    print(json.dumps({"hausdorff": d}))
    return {"outputs": ["hausdorff.json"], "hausdorff": d}


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "select": cmd_select,
    "scms": cmd_scms,
    "credible": cmd_credible,
    "hausdorff": cmd_hausdorff,
}


def _require(value, flag):
    if value is None:
        raise ConfigError(f"missing required option {flag}")
    return value


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="splinefil", description="Bayesian spline filament estimation.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("files", nargs="*", help="filament CSV files (hausdorff only)")
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--data", help="input CSV with columns x1,x2,y")
    p.add_argument("--posterior", help="posterior.json from the fit command")
    p.add_argument("--surface", choices=["paper"], help="run scms on the closed-form test surface")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _versions() -> dict:
    return {"splinefil": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.preset)
        over = {}
        if args.seed is not None:
            over["seed"] = args.seed
        if args.workers is not None:
            over["workers"] = args.workers
        cfg = cfg.merged(over)
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        result = COMMANDS[args.command](cfg, args, out)
        elapsed = time.perf_counter() - t0
        write_json(out / "summary.json", {
            "command": args.command,
            "seed": cfg.seed,
            "preset": args.preset,
            "config": cfg.to_dict(),
            "versions": _versions(),
            "result": result,
            "timings": {"total_seconds": elapsed},
        })
    except (SplineFilError, OSError) as exc:
        kind = "data" if isinstance(exc, (DataError, OSError)) else "config" if isinstance(exc, ConfigError) else "runtime"
        rec = {"error": {"type": type(exc).__name__, "kind": kind, "command": args.command, "message": str(exc)}}
        print(json.dumps(rec), file=sys.stderr)
        return 2 if kind == "config" else 1
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
