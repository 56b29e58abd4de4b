"""Command-line entry point.

Every command prints JSON lines to stdout: a versioned header echoing the
fully resolved configuration, then result records. With ``--out DIR`` the
same configuration is written to ``DIR/manifest.json`` together with any
artifacts (CSV traces, encoder state, flow bundles), and passing that
manifest back through ``--config`` reproduces the run.

Exit status: 0 when every declared threshold passes, 1 on a threshold
failure, 2 on usage, parse, or validation errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .contrastive import NegativePolicy, TupleBatch, info_nce, loss_grad
from .energy import EnergyParams, Pair, area_grad, energy, energy_grad
from .errors import SimplexAlignError
from .fdcheck import relative_error, sphere_fd_grad
from .sphere import is_unit, normalize, pairwise_cosines, random_unit, simplex_volume, triangle_area

RECORD_FORMAT = "simplexalign.records"
MANIFEST_FORMAT = "simplexalign.manifest"
FORMAT_VERSION = 1

EXIT_OK, EXIT_THRESHOLD, EXIT_USAGE = 0, 1, 2

DEFAULTS: dict[str, dict] = {
    "eval": {"vectors": None, "file": None, "alpha": 1.0, "tau": 0.07, "pair": "LanguageFlow", "normalize": False},
    "gradcheck": {"trials": 100, "dim": 8, "batch": 4, "alpha": 1.0, "tau": 0.07, "tol": 1e-4},
    "demo": {
        "kind": None,
        "theta0": math.pi / 4,
        "alpha": 0.0,
        "steps": 2000,
        "lr": 0.1,
        "pair": "xy",
        "free": "yz",
        "trials": 10_000,
        "dim": 3,
    },
    "train": {
        "objective": "FullContrastive",
        "optimizer": "AdamWStyle",
        "learning_rate": 1e-4,
        "weight_decay": 1e-2,
        "batch_size": 32,
        "steps": 4000,
        "embed_dim": 16,
        "alpha": 1.0,
        "tau": 0.07,
        "pair": "LanguageFlow",
        "negative_mode": "SingleModality",
        "per_anchor_cap": None,
        "latent_dim": 8,
        "obs_dims": [32, 32, 32],
        "noise_std": 0.05,
        "signal_scale": 0.1,
        "count": 512,
        "candidates": 64,
        "min_retrieval": 0.9,
        "lambda_tcn": 1.0,
        "lambda_act": 1.0,
        "flow_window": 7,
    },
    "flow": {
        "bundle": None,
        "ref_idx": None,
        "window_frac": 0.1,
        "verify": False,
        "tol": 1e-6,
        "camera_path": "linear",
        "motion": "static",
        "frames": 60,
        "width": 320,
        "height": 240,
        "grid_rows": 20,
        "grid_cols": 20,
    },
    "score": {"input": None},
}


class UsageError(Exception):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


class Emitter:
    def __init__(self, command: str, seed: int, params: dict, out: Path | None, stream=None):
        self.stream = stream or sys.stdout
        self.out = out
        self.manifest = {
            "format": MANIFEST_FORMAT,
            "version": FORMAT_VERSION,
            "package_version": __version__,
            "command": command,
            "seed": seed,
            "params": params,
        }
        self.record({**self.manifest, "record": "header", "format": RECORD_FORMAT})
        if out is not None:
            out.mkdir(parents=True, exist_ok=True)
            (out / "manifest.json").write_text(json.dumps(_jsonable(self.manifest), indent=2, sort_keys=True) + "\n")

    def record(self, rec: dict) -> None:
        self.stream.write(json.dumps(_jsonable(rec), sort_keys=True) + "\n")

    def path(self, name: str) -> Path | None:
        return None if self.out is None else self.out / name


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


# -- eval ---------------------------------------------------------------------


def _parse_vectors(text: str) -> np.ndarray:
    text = text.strip()
    if text.startswith("["):
        arr = np.asarray(json.loads(text), dtype=np.float64)
    else:
        rows = [r for r in text.replace(";", "\n").splitlines() if r.strip()]
        arr = np.array([[float(x) for x in r.replace(",", " ").split()] for r in rows])
    if arr.ndim != 2:
        raise ValueError("expected a list of equal-length vectors")
    return arr


def cmd_eval(params: dict, seed: int, em: Emitter) -> int:
    if (params["vectors"] is None) == (params["file"] is None):
        raise UsageError("give exactly one of --vectors or --file")
    text = params["vectors"] if params["vectors"] is not None else Path(params["file"]).read_text()
    pts = _parse_vectors(text)
    if params["normalize"]:
        pts = normalize(pts)
    elif not is_unit(pts):
        raise ValueError("vectors must be unit norm (pass --normalize to rescale)")
    p = EnergyParams(alpha=params["alpha"], tau=params["tau"], regularized_pair=Pair(params["pair"]))
    rec = {"record": "eval", "m": pts.shape[0], "d": pts.shape[1], "volume": simplex_volume(pts)}
    if pts.shape[0] == 3:
        a, b, c = pairwise_cosines(*pts)
        rec.update(area=triangle_area(*pts), energy=energy(*pts, p), cosines={"a": a, "b": b, "c": c})
    em.record(rec)
    return EXIT_OK


# -- gradcheck ------------------------------------------------------------------


def gradcheck(trials: int, dim: int, batch: int, alpha: float, tau: float, seed: int) -> dict:
    """Worst relative error of each analytic gradient against finite differences."""
    rng = np.random.default_rng(seed)
    p = EnergyParams(alpha=alpha, tau=tau)
    worst = {"area_grad": 0.0, "energy_grad": 0.0, "loss_grad": 0.0, "decomposition": 0.0}
    for _ in range(trials):
        pts = random_unit(rng, 3, dim)
        while triangle_area(*pts) <= 1e-3:
            pts = random_unit(rng, 3, dim)
        fd = sphere_fd_grad(lambda q: triangle_area(*q), pts)
        g = np.stack(area_grad(*pts))
        worst["area_grad"] = max(worst["area_grad"], *(relative_error(g[i], fd[i]) for i in range(3)))
        fd = sphere_fd_grad(lambda q: energy(*q, p), pts)
        g = np.stack(energy_grad(*pts, p))
        worst["energy_grad"] = max(worst["energy_grad"], *(relative_error(g[i], fd[i]) for i in range(3)))

        emb = random_unit(rng, (3, batch), dim)
        tb = TupleBatch(*emb)
        lg = loss_grad(tb, p)
        shape = emb.shape
        fd = sphere_fd_grad(lambda q: info_nce(TupleBatch(*q.reshape(shape)), p).loss, emb.reshape(-1, dim))
        fd = fd.reshape(shape)
        err = max(relative_error(lg.total[s, i], fd[s, i]) for s in range(3) for i in range(batch))
        worst["loss_grad"] = max(worst["loss_grad"], err)
        worst["decomposition"] = max(worst["decomposition"], float(np.abs(lg.alignment + lg.uniformity - lg.total).max()))
    return worst


def cmd_gradcheck(params: dict, seed: int, em: Emitter) -> int:
    if params["trials"] < 1:
        raise UsageError("--trials must be >= 1")
    worst = gradcheck(params["trials"], params["dim"], params["batch"], params["alpha"], params["tau"], seed)
    tol = params["tol"]
    status = EXIT_OK
    for op in ("area_grad", "energy_grad", "loss_grad"):
        passed = worst[op] < tol
        status = status if passed else EXIT_THRESHOLD
        em.record({"record": "gradcheck", "operation": op, "worst_relative_error": worst[op], "tol": tol, "pass": passed})
    passed = worst["decomposition"] <= 1e-10
    status = status if passed else EXIT_THRESHOLD
    em.record({"record": "gradcheck", "operation": "alignment+uniformity", "worst_abs_error": worst["decomposition"], "tol": 1e-10, "pass": passed})
    return status


# -- demo -----------------------------------------------------------------------


def cmd_demo(params: dict, seed: int, em: Emitter) -> int:
    from .toy.demos import demo_ambiguity, demo_conflict

    kind = params["kind"]
    if kind == "ambiguity":
        rep = demo_ambiguity(params["theta0"], params["alpha"], params["steps"], params["lr"], params["pair"], params["free"])
        path = em.path("ambiguity_trace.csv")
        if path is not None:
            _write_csv(
                path,
                ["step", "area", "energy", "cos_xy", "theta", "step_size"],
                [[s.step, repr(s.area), repr(s.energy), repr(s.cos_xy), repr(s.theta), repr(s.step_size)] for s in rep.steps],
            )
        if params["alpha"] == 0:
            checks = {"final_area<1e-4": rep.final_area < 1e-4, "final_cos_xy<-0.95": rep.final_cos_xy < -0.95}
        elif params["pair"] == "xy":
            checks = {"final_cos_xy>0.9": rep.final_cos_xy > 0.9}
        else:
            checks = {}
        em.record(
            {
                "record": "summary",
                "kind": kind,
                "initial_area": rep.initial_area,
                "final_area": rep.final_area,
                "final_cos_xy": rep.final_cos_xy,
                "iterations": len(rep.steps) - 1,
                "trace": str(path) if path else None,
                "checks": checks,
                "pass": all(checks.values()),
            }
        )
        return EXIT_OK if all(checks.values()) else EXIT_THRESHOLD
    if kind == "conflict":
        alpha = params["alpha"] if params["alpha"] > 0 else 1.0
        rep = demo_conflict(seed, params["trials"], params["dim"], alpha)
        checks = {
            "min_ratio<0.1": rep.min_ratio < 0.1,
            "decomposition<=1e-10": rep.max_decomposition_error <= 1e-10,
            "ascent_rate<=1e-12": rep.max_ascent_error <= 1e-12,
        }
        path = em.path("conflict_best.csv")
        if path is not None:
            _write_csv(path, ["vector", *[f"c{i}" for i in range(rep.config.shape[1])]], [
                ["x", *rep.config[0]], ["y", *rep.config[1]], ["z", *rep.config[2]],
                ["u_xy", *rep.pulls[0]], ["u_xz", *rep.pulls[1]],
            ])
        em.record(
            {
                "record": "summary",
                "kind": kind,
                "trials": rep.trials,
                "evaluated": rep.evaluated,
                "skipped": rep.skipped,
                "min_cancellation_ratio": rep.min_ratio,
                "configuration": rep.config,
                "cosine_pull_magnitude": rep.cosine_pull,
                "alpha": rep.alpha,
                "max_decomposition_error": rep.max_decomposition_error,
                "max_ascent_rate_error": rep.max_ascent_error,
                "checks": checks,
                "pass": all(checks.values()),
            }
        )
        return EXIT_OK if all(checks.values()) else EXIT_THRESHOLD
    raise UsageError("demo kind must be 'ambiguity' or 'conflict'")


# -- train ----------------------------------------------------------------------


def cmd_train(params: dict, seed: int, em: Emitter) -> int:
    from .toy.data import SyntheticTripletSpec, gen_triplets
    from .toy.train import Objective, TrainConfig, evaluate, train

    spec = SyntheticTripletSpec(
        latent_dim=params["latent_dim"],
        obs_dims=tuple(params["obs_dims"]),
        noise_std=params["noise_std"],
        count=params["count"],
        seed=seed,
        signal_scale=params["signal_scale"],
    )
    config = TrainConfig(
        learning_rate=params["learning_rate"],
        weight_decay=params["weight_decay"],
        batch_size=params["batch_size"],
        steps=params["steps"],
        optimizer=params["optimizer"],
        energy=EnergyParams(params["alpha"], params["tau"], Pair(params["pair"])),
        seed=seed,
        objective=params["objective"],
        embed_dim=params["embed_dim"],
        negatives=NegativePolicy(params["negative_mode"], params["per_anchor_cap"]),
        lambda_tcn=params["lambda_tcn"],
        lambda_act=params["lambda_act"],
        flow_window=params["flow_window"],
    )
    data = gen_triplets(spec)
    result = train(config, data)
    summary = evaluate(result.encoders, data, config.energy, params["candidates"], seed)
    path = em.path("trace.csv")
    if path is not None:
        _write_csv(
            path,
            ["step", "loss", "mean_area", "pair_cosine", "spread"],
            [[r.step, repr(r.loss), repr(r.mean_area), repr(r.pair_cosine), repr(r.spread)] for r in result.trace],
        )
        np.savez(em.path("encoders.npz"), **result.encoders.state())
    checks = {}
    if config.objective is Objective.FULL_CONTRASTIVE:
        checks[f"retrieval>={params['min_retrieval']}"] = summary["retrieval_top1"] >= params["min_retrieval"]
    em.record({"record": "summary", "objective": config.objective.value, "steps": len(result.trace), **summary, "checks": checks, "pass": all(checks.values())})
    return EXIT_OK if all(checks.values()) else EXIT_THRESHOLD


# -- flow -----------------------------------------------------------------------


def cmd_flow(params: dict, seed: int, em: Emitter) -> int:
    from .flow.build import build_flow, select_reference
    from .flow.io import read_bundle, write_bundle, write_flow
    from .flow.synth import SceneSpec, synth_scene
    from .flow.verify import flow_residuals

    tmp = None
    bundle = params["bundle"]
    if bundle is None:
        spec = SceneSpec(
            frames=params["frames"],
            width=params["width"],
            height=params["height"],
            grid_rows=params["grid_rows"],
            grid_cols=params["grid_cols"],
            motion=params["motion"],
            camera_path=params["camera_path"],
        )
        scene = synth_scene(spec, seed)
        root = em.out if em.out is not None else Path(tmp := tempfile.mkdtemp(prefix="simplexalign-"))
        bundle = write_bundle(root / "bundle", scene)
        em.record({"record": "synthetic_bundle", "manifest": str(bundle), "excluded_points": scene.excluded})

    tracks, depths, poses, K, gt = read_bundle(bundle)
    counts = np.sum([t.visible for t in tracks], axis=0) if tracks else np.zeros(len(depths))
    ref = params["ref_idx"] if params["ref_idx"] is not None else select_reference(counts, params["window_frac"])
    flow = build_flow(tracks, depths, poses, K, ref)
    if em.out is not None:
        write_flow(em.out, flow, K, {"source_bundle": str(bundle)})
    em.record({"record": "flow", "shape": list(flow.values.shape), "ref_idx": ref, "dropped": flow.dropped,
               "valid_fraction": float(flow.valid.mean()) if flow.valid.size else 0.0,
               "output": str(em.out / "flow.json") if em.out is not None else None})

    status = EXIT_OK
    if params["verify"]:
        if gt is None:
            raise UsageError("--verify needs a bundle with ground truth")
        res = flow_residuals(flow, K, poses[ref], gt["world"], gt["velocity"])
        tol = params["tol"]
        checks = {
            f"compensation_residual<{tol}": res["compensation_residual"] < tol,
            f"velocity_error<{tol}": res["velocity_error"] < tol,
        }
        status = EXIT_OK if all(checks.values()) else EXIT_THRESHOLD
        em.record({"record": "verify", **res, "checks": checks, "pass": all(checks.values())})
    if tmp is not None:
        import shutil

        shutil.rmtree(tmp, ignore_errors=True)
    return status


# -- score ----------------------------------------------------------------------


def cmd_score(params: dict, seed: int, em: Emitter) -> int:
    from .metrics import control_relevant_score, read_score_table

    if params["input"] is None:
        raise UsageError("score needs --input")
    src = sys.stdin if params["input"] == "-" else open(params["input"], newline="")
    with src:
        mat, models, dims = read_score_table(src)
    res = control_relevant_score(mat, models, dims)
    rows = [[m, repr(float(s))] for m, s in zip(res.models, res.scores)]
    path = em.path("scores.csv")
    if path is not None:
        _write_csv(path, ["model", "S"], rows)
    for m, s in zip(res.models, res.scores):
        em.record({"record": "score", "model": m, "S": float(s)})
    em.record({"record": "summary", "dimensions": res.included, "excluded_dimensions": res.excluded})
    return EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "demo": cmd_demo,
    "train": cmd_train,
    "flow": cmd_flow,
    "score": cmd_score,
}


# -- argument parsing -------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--seed", type=int, default=d, help="global RNG seed (default 0)")
    p.add_argument("--out", default=d, help="output directory for the manifest and artifacts")
    p.add_argument("--config", default=d, help="JSON config or emitted manifest")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simplexalign", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _common(p, suppress=True)
        return p

    p = add("eval", "volume, area, energy and cosines of a tuple of unit vectors")
    p.add_argument("--vectors", help='inline vectors, e.g. "1,0,0;0,1,0;0,0,1" or JSON')
    p.add_argument("--file", help="file with one vector per line, or a JSON list")
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--pair", choices=[x.value for x in Pair])
    p.add_argument("--normalize", action="store_true", default=None)

    p = add("gradcheck", "analytic vs finite-difference gradients")
    p.add_argument("--trials", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--tol", type=float)

    p = add("demo", "flat-triangle ambiguity descent or edge-pull conflict search")
    p.add_argument("kind", nargs="?", choices=["ambiguity", "conflict"])
    p.add_argument("--theta0", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--pair", choices=["xy", "xz", "yz"])
    p.add_argument("--free", help="which of x, y, z descend (default yz)")
    p.add_argument("--trials", type=int)
    p.add_argument("--dim", type=int)

    p = add("train", "train toy encoders on synthetic triplets")
    p.add_argument("--objective", choices=["FullContrastive", "VolumeOnlyDescent"])
    p.add_argument("--optimizer", choices=["SGD", "AdamWStyle"])
    p.add_argument("--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--embed-dim", dest="embed_dim", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--pair", choices=[x.value for x in Pair])
    p.add_argument("--noise-std", dest="noise_std", type=float)
    p.add_argument("--count", type=int)
    p.add_argument("--candidates", type=int)
    p.add_argument("--min-retrieval", dest="min_retrieval", type=float)

    p = add("flow", "build screen-aligned 3D flow from a bundle (or a synthetic scene)")
    p.add_argument("--bundle", help="input bundle manifest; omit to synthesize a scene")
    p.add_argument("--ref-idx", dest="ref_idx", type=int)
    p.add_argument("--window-frac", dest="window_frac", type=float)
    p.add_argument("--verify", action="store_true", default=None)
    p.add_argument("--tol", type=float)
    p.add_argument("--camera-path", dest="camera_path", choices=["static", "linear", "orbit"])
    p.add_argument("--motion", choices=["static", "constant-velocity"])
    p.add_argument("--frames", type=int)

    p = add("score", "control-relevant score from model,dimension,value rows")
    p.add_argument("--input", help="CSV path, or - for stdin")
    return parser


def _load_config(path: str) -> tuple[str | None, int | None, dict]:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    if "params" in cfg:
        return cfg.get("command"), cfg.get("seed"), dict(cfg["params"])
    cfg = dict(cfg)
    return cfg.pop("command", None), cfg.pop("seed", None), cfg


def resolve(args: argparse.Namespace) -> tuple[str, int, dict, Path | None]:
    """Merge defaults, the config file, and explicit flags (in that order)."""
    command = args.command
    cfg_seed = None
    cfg_params: dict = {}
    if getattr(args, "config", None):
        cfg_command, cfg_seed, cfg_params = _load_config(args.config)
        if command is None:
            command = cfg_command
        elif cfg_command is not None and cfg_command != command:
            raise UsageError(f"config is for {cfg_command!r}, not {command!r}")
    if command is None:
        raise UsageError("no command given")
    params = dict(DEFAULTS[command])
    unknown = set(cfg_params) - set(params)
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {sorted(unknown)}")
    params.update(cfg_params)
    for key in params:
        value = getattr(args, key, None)
        if value is not None:
            params[key] = value
    seed = args.seed if getattr(args, "seed", None) is not None else (cfg_seed if cfg_seed is not None else 0)
    out = Path(args.out) if getattr(args, "out", None) else None
    return command, seed, params, out


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        command, seed, params, out = resolve(args)
        em = Emitter(command, seed, params, out)
        return COMMANDS[command](params, seed, em)
    except UsageError as exc:
        print(f"simplexalign: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SimplexAlignError, ValueError, OSError, KeyError) as exc:
        print(f"simplexalign: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
