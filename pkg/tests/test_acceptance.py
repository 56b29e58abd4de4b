"""Acceptance criteria A1-A11.

Each test prints one ``A<n> PASS|FAIL`` line with the measured quantities
and its wall time, then asserts. Run standalone with
``python tests/test_acceptance.py`` for just the summary lines.
"""

import math
import time

import numpy as np
import pytest

from simplexalign.contrastive import NegativePolicy, TupleBatch, info_nce, loss_grad
from simplexalign.energy import EnergyParams, area_grad, energy, energy_grad
from simplexalign.fdcheck import relative_error, sphere_fd_grad
from simplexalign.flow.build import build_flow
from simplexalign.flow.camera import CameraIntrinsics, project, unproject
from simplexalign.flow.synth import SceneSpec, synth_scene
from simplexalign.flow.verify import flow_residuals
from simplexalign.metrics import control_relevant_score
from simplexalign.sphere import random_unit, simplex_volume, triangle_area
from simplexalign.toy.data import SyntheticTripletSpec, gen_triplets
from simplexalign.toy.demos import demo_ambiguity, demo_conflict
from simplexalign.toy.sampling import band_width, frame_sample, transition_pairs
from simplexalign.toy.train import TrainConfig, evaluate, train


@pytest.fixture
def report(capsys):
    def emit(name, ok, elapsed, limit, detail):
        ok = ok and elapsed < limit
        line = f"{name} {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s / {limit:g}s) {detail}"
        with capsys.disabled():
            print("\n" + line, flush=True)
        assert ok, line

    return emit


def test_A1_flat_triangle(report):
    t0 = time.perf_counter()
    worst = 0.0
    for theta in np.linspace(math.pi / 2 / 50, math.pi / 2, 50):
        z = np.array([math.cos(theta), math.sin(theta), 0.0])
        area = triangle_area(np.array([1.0, 0, 0]), np.array([-1.0, 0, 0]), z)
        worst = max(worst, abs(area - abs(math.sin(theta))))
    report("A1", worst < 1e-10, time.perf_counter() - t0, 1, f"max |A - |sin t|| = {worst:.2e}")


def test_A2_generalized_volume(report):
    t0 = time.perf_counter()
    v3 = abs(simplex_volume(np.eye(3)) - math.sqrt(3) / 2)
    v4 = abs(simplex_volume(np.eye(4)) - 1 / 3)
    rng = np.random.default_rng(2024)
    inv = 0.0
    for _ in range(200):
        m = int(rng.integers(2, 7))
        d = int(rng.integers(m, 12))
        pts = random_unit(rng, m, d)
        q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        v = simplex_volume(pts)
        inv = max(inv, abs(simplex_volume(pts[rng.permutation(m)]) - v), abs(simplex_volume(pts @ q.T) - v))
    ok = v3 < 1e-12 and v4 < 1e-12 and inv < 1e-9
    report("A2", ok, time.perf_counter() - t0, 5, f"|V3 err| = {v3:.1e}, |V4 err| = {v4:.1e}, invariance err = {inv:.1e}")


def _nondegenerate(rng, d):
    while True:
        pts = random_unit(rng, 3, d)
        if triangle_area(*pts) > 1e-3:
            return pts


def test_A3_gradient_oracles(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    p = EnergyParams(alpha=1.0, tau=0.07)
    worst = {"area": 0.0, "energy": 0.0, "loss": 0.0}
    shape = (3, 4, 8)
    for _ in range(100):
        pts = _nondegenerate(rng, 8)
        fd = sphere_fd_grad(lambda q: triangle_area(*q), pts)
        g = area_grad(*pts)
        worst["area"] = max(worst["area"], *(relative_error(g[i], fd[i]) for i in range(3)))
        fd = sphere_fd_grad(lambda q: energy(*q, p), pts)
        g = energy_grad(*pts, p)
        worst["energy"] = max(worst["energy"], *(relative_error(g[i], fd[i]) for i in range(3)))
        emb = random_unit(rng, shape[:2], 8)
        lg = loss_grad(TupleBatch(*emb), p)
        fd = sphere_fd_grad(lambda q: info_nce(TupleBatch(*q.reshape(shape)), p).loss, emb.reshape(-1, 8)).reshape(shape)
        worst["loss"] = max(worst["loss"], *(relative_error(lg.total[s, i], fd[s, i]) for s in range(3) for i in range(4)))
    ok = all(v < 1e-4 for v in worst.values())
    detail = ", ".join(f"{k} worst rel err = {v:.1e}" for k, v in worst.items())
    report("A3", ok, time.perf_counter() - t0, 30, detail)


def test_A4_gradient_decomposition(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    worst = 0.0
    for k in range(50):
        B = int(rng.integers(2, 9))
        d = int(rng.integers(3, 17))
        emb = random_unit(rng, (3, B), d)
        policy = NegativePolicy(mode=("SingleModality", "AllSingleAndDouble")[k % 2])
        lg = loss_grad(TupleBatch(*emb), EnergyParams(alpha=float(rng.uniform(0, 2))), policy, seed=k)
        worst = max(worst, float(np.abs(lg.alignment + lg.uniformity - lg.total).max()))
    report("A4", worst <= 1e-10, time.perf_counter() - t0, 10, f"max |align + unif - total| = {worst:.1e}")


def test_A5_ambiguity_demo(report):
    t0 = time.perf_counter()
    vol = demo_ambiguity(math.pi / 4, alpha=0.0)
    reg = demo_ambiguity(math.pi / 4, alpha=1.0, pair="xy")
    ok = vol.final_area < 1e-4 and vol.final_cos_xy < -0.95 and reg.final_cos_xy > 0.9
    detail = (
        f"alpha=0: A = {vol.final_area:.1e}, <x,y> = {vol.final_cos_xy:.4f}; "
        f"alpha=1: <x,y> = {reg.final_cos_xy:.4f}"
    )
    report("A5", ok, time.perf_counter() - t0, 10, detail)


def test_A6_conflict_demo(report):
    t0 = time.perf_counter()
    rep = demo_conflict(search_seed=0, trials=10_000, dim=3)
    ok = rep.min_ratio < 0.1 and rep.max_decomposition_error <= 1e-10 and rep.max_ascent_error <= 1e-12
    detail = (
        f"min ratio = {rep.min_ratio:.4f} over {rep.evaluated} configs, "
        f"decomposition err = {rep.max_decomposition_error:.1e}, ascent err = {rep.max_ascent_error:.1e}"
    )
    report("A6", ok, time.perf_counter() - t0, 30, detail)


def test_A7_collapse_separation(report):
    t0 = time.perf_counter()
    data = gen_triplets(SyntheticTripletSpec(noise_std=0.05, count=512, seed=0))
    base = dict(learning_rate=5e-3, steps=2000, seed=0)
    p = EnergyParams()
    vol = evaluate(train(TrainConfig(objective="VolumeOnlyDescent", **base), data).encoders, data, p, 64)
    full = evaluate(train(TrainConfig(objective="FullContrastive", **base), data).encoders, data, p, 64)
    ok = vol["spread"] < 0.05 and full["spread"] >= 0.2 and full["retrieval_top1"] >= 0.90
    detail = (
        f"volume-only spread = {vol['spread']:.4f}; "
        f"contrastive spread = {full['spread']:.3f}, top-1@64 = {full['retrieval_top1']:.3f}"
    )
    report("A7", ok, time.perf_counter() - t0, 300, detail)


def test_A8_flow_compensation(report):
    t0 = time.perf_counter()
    variance = 0.0
    vel = 0.0
    keypoints = set()
    for path in ("static", "linear", "orbit"):
        for motion in ("static", "constant-velocity"):
            scene = synth_scene(SceneSpec(frames=60, camera_path=path, motion=motion), seed=8)
            flow = build_flow(scene.tracks, scene.depths, scene.poses, scene.K, 0)
            res = flow_residuals(flow, scene.K, scene.poses[0], scene.world, scene.velocity)
            keypoints.add(res["keypoints"])
            variance = max(variance, res["static_variance"])
            vel = max(vel, res["velocity_error"])
    rng = np.random.default_rng(8)
    K = CameraIntrinsics(300.0, 300.0, 159.5, 119.5)
    uv = rng.uniform([0, 0], [320, 240], size=(10_000, 2))
    z = rng.uniform(0.5, 20.0, size=10_000)
    back = project(unproject(uv, z, K), K)
    rt = float(max(np.abs(back[:, :2] - uv).max(), np.abs(back[:, 2] - z).max()))
    ok = keypoints == {400} and variance < 1e-12 and vel < 1e-6 and rt < 1e-9
    detail = f"keypoints {sorted(keypoints)}, static variance = {variance:.1e}, velocity err = {vel:.1e}, round trip = {rt:.1e}"
    report("A8", ok, time.perf_counter() - t0, 30, detail)


def test_A9_frame_sampling(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(9)
    bad = 0
    for _ in range(10_000):
        T = int(rng.integers(5, 10_001))
        s = frame_sample(T, int(rng.integers(0, 2**31)))
        idx = s.indices
        band = band_width(T)
        pairs = transition_pairs(s)
        good = (
            len(idx) == 5
            and all(a < b for a, b in zip(idx, idx[1:]))
            and idx[0] < band
            and idx[4] >= T - band
            and len(pairs) == 4
            and all(b == a2 for (_, b), (a2, _) in zip(pairs, pairs[1:]))
        )
        bad += not good
    report("A9", bad == 0, time.perf_counter() - t0, 5, f"{bad} violations in 10000 trials")


def test_A10_score_aggregation(report):
    t0 = time.perf_counter()
    cases = [
        ([[-1.0, -4.0], [-2.0, -2.0]], [0.5, 0.5]),
        ([[-0.1, -0.2], [-0.4, -0.6], [-0.3, -1.0]], [1.0, (0.0 + 0.5) / 2, (1 / 3 + 0.0) / 2]),
        ([[-1.0, -5.0, -2.0], [-3.0, -5.0, -1.0]], [0.5, 0.5]),
    ]
    err = 0.0
    invariance = 0.0
    rng = np.random.default_rng(10)
    for raw, expected in cases:
        raw = np.asarray(raw)
        s = control_relevant_score(raw).scores
        err = max(err, float(np.abs(s - expected).max()))
        for _ in range(20):
            beta = rng.uniform(0.1, 10.0, raw.shape[1])
            gamma = rng.uniform(-5.0, 5.0, raw.shape[1])
            moved = control_relevant_score(raw * beta + gamma).scores
            invariance = max(invariance, float(np.abs(moved - s).max()))
    ok = err < 1e-12 and invariance < 1e-12
    report("A10", ok, time.perf_counter() - t0, 1, f"hand-value err = {err:.1e}, affine err = {invariance:.1e}")


def test_A11_infonce_closed_forms(report):
    t0 = time.perf_counter()
    v = np.array([0.6, 0.8, 0.0, 0.0])
    err = 0.0
    for B, cap, k in ((2, 1, 1), (2, None, 3), (4, 7, 7), (22, None, 63)):
        z = np.tile(v, (B, 1))
        rep = info_nce(TupleBatch(z, z.copy(), z.copy()), EnergyParams(), NegativePolicy(per_anchor_cap=cap))
        assert rep.p_minus.shape[1] == k
        err = max(err, abs(rep.loss - math.log(k + 1)))
    rng = np.random.default_rng(11)
    emb = random_unit(rng, (3, 8), 16)
    rep = info_nce(TupleBatch(*emb), EnergyParams(tau=0.07))
    psum = float(np.abs(rep.p_plus + rep.p_minus.sum(axis=1) - 1).max())
    emb[1] = emb[0]
    emb[2] = emb[0]
    p = EnergyParams(alpha=1.0, tau=1 / 500)
    rep = info_nce(TupleBatch(*emb), p)
    extreme = float(np.abs(rep.E_plus).max() / p.tau)
    finite = bool(np.isfinite(rep.loss) and np.all(np.isfinite(rep.p_minus)))
    ok = err < 1e-12 and psum < 1e-10 and finite and extreme >= 500 - 1e-9
    detail = f"ln(k+1) err = {err:.1e}, prob sum err = {psum:.1e}, loss at |E|/tau = {extreme:.0f} is {rep.loss:.3g}"
    report("A11", ok, time.perf_counter() - t0, 1, detail)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
