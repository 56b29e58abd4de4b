import math

import mpmath
import numpy as np
import pytest

from simplexalign.contrastive import (
    ModalityTuple,
    NegativeMode,
    NegativePolicy,
    TupleBatch,
    build_negatives,
    info_nce,
    loss_grad,
    negative_indices,
)
from simplexalign.energy import EnergyParams, energy, energy_grad
from simplexalign.errors import BatchTooSmallError
from simplexalign.fdcheck import relative_error, sphere_fd_grad
from simplexalign.sphere import normalize, random_unit


def random_batch(seed, B=4, d=8):
    return TupleBatch(*random_unit(np.random.default_rng(seed), (3, B), d))


def constant_batch(B, d=4):
    v = normalize(np.arange(1.0, d + 1))
    z = np.tile(v, (B, 1))
    return TupleBatch(z, z.copy(), z.copy())


def test_batch_validation():
    with pytest.raises(ValueError):
        TupleBatch(np.ones((2, 3)), np.ones((2, 3)), np.ones((3, 3)))
    z = random_unit(np.random.default_rng(0), 2, 3)
    tb = TupleBatch.from_tuples([ModalityTuple(z[0], z[1], z[0]), ModalityTuple(z[1], z[0], z[1])])
    assert tb.size == 2 and tb.dim == 3
    np.testing.assert_array_equal(tb.tuple(1).z_I, z[0])


def test_negative_counts_and_exclusion():
    assert len(build_negatives(random_batch(0, B=2), 0)) == 3
    idx = negative_indices(4, 2)
    assert idx.shape == (9, 3)
    assert not np.any(np.all(idx == 2, axis=1))
    # every negative differs from the anchor in exactly one slot
    assert np.all(np.sum(idx != 2, axis=1) == 1)
    double = negative_indices(4, 2, NegativePolicy(NegativeMode.ALL_SINGLE_AND_DOUBLE))
    assert double.shape == (18, 3)
    assert len({tuple(r) for r in double}) == 18


def test_negative_cap_deterministic():
    policy = NegativePolicy(per_anchor_cap=2)
    a = negative_indices(3, 0, policy, seed=11)
    b = negative_indices(3, 0, policy, seed=11)
    assert a.shape == (2, 3)
    np.testing.assert_array_equal(a, b)
    full = {tuple(r) for r in negative_indices(3, 0)}
    assert {tuple(r) for r in a} <= full


def test_batch_too_small():
    with pytest.raises(BatchTooSmallError):
        info_nce(random_batch(0, B=1), EnergyParams())


def test_two_way_softmax_is_ln2():
    rep = info_nce(constant_batch(2), EnergyParams(), NegativePolicy(per_anchor_cap=1))
    assert rep.loss == pytest.approx(math.log(2), abs=1e-12)


@pytest.mark.parametrize("B,cap,k", [(2, 1, 1), (2, None, 3), (4, 7, 7), (22, None, 63)])
def test_equal_energies_give_log_k_plus_one(B, cap, k):
    rep = info_nce(constant_batch(B), EnergyParams(), NegativePolicy(per_anchor_cap=cap))
    assert rep.p_minus.shape == (B, k)
    assert rep.loss == pytest.approx(math.log(k + 1), abs=1e-12)


def test_softmax_against_high_precision_oracle():
    tb = random_batch(3, B=8, d=16)
    p = EnergyParams(tau=0.07)
    rep = info_nce(tb, p)
    assert np.isfinite(rep.loss) and rep.loss > 0
    np.testing.assert_allclose(rep.p_plus + rep.p_minus.sum(axis=1), 1.0, atol=1e-10)
    mpmath.mp.dps = 50
    emb = tb.stacked()
    losses = []
    for i in range(tb.size):
        rows = [(i, i, i)] + [tuple(r) for r in rep.negatives[i]]
        # Energies recomputed tuple by tuple, then softmax in 50-digit arithmetic.
        es = [energy(emb[0, a], emb[1, b], emb[2, c], p) for a, b, c in rows]
        logits = [-mpmath.mpf(e) / mpmath.mpf(p.tau) for e in es]
        z = mpmath.fsum(mpmath.exp(l) for l in logits)
        probs = [mpmath.exp(l) / z for l in logits]
        assert float(probs[0]) == pytest.approx(rep.p_plus[i], abs=1e-10)
        np.testing.assert_allclose([float(q) for q in probs[1:]], rep.p_minus[i], atol=1e-10)
        losses.append(-mpmath.log(probs[0]))
    assert float(mpmath.fsum(losses) / len(losses)) == pytest.approx(rep.loss, abs=1e-10)


def test_loss_finite_at_extreme_logits():
    rng = np.random.default_rng(4)
    B, d = 4, 6
    z = random_unit(rng, (3, B), d)
    z[1] = z[0]
    z[2] = z[0]  # matched tuples collapse to E = -1
    p = EnergyParams(alpha=1.0, tau=1.0 / 500)
    rep = info_nce(TupleBatch(*z), p)
    assert np.max(np.abs(rep.E_plus)) / p.tau == pytest.approx(500)
    assert np.isfinite(rep.loss) and rep.loss >= 0
    assert np.all(np.isfinite(rep.p_minus))
    g = loss_grad(TupleBatch(*z), p)
    assert np.all(np.isfinite(g.total))


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("mode", list(NegativeMode))
def test_loss_grad_fd(seed, mode):
    tb = random_batch(seed, B=4, d=8)
    policy = NegativePolicy(mode)
    p = EnergyParams(alpha=1.0, tau=0.07)
    lg = loss_grad(tb, p, policy)
    shape = (3, 4, 8)
    fd = sphere_fd_grad(lambda q: info_nce(TupleBatch(*q.reshape(shape)), p, policy).loss, tb.stacked().reshape(-1, 8))
    fd = fd.reshape(shape)
    for s in range(3):
        for i in range(4):
            assert relative_error(lg.total[s, i], fd[s, i]) < 1e-4
    np.testing.assert_allclose(lg.alignment + lg.uniformity, lg.total, atol=1e-10)


def test_alignment_vanishes_when_matched_dominates():
    # Small matched triangles; every swap opens one edge to a far item.
    rng = np.random.default_rng(9)
    B, d = 3, 12
    u = random_unit(rng, B, d)
    z = np.stack([u, normalize(u + 0.1 * random_unit(rng, B, d)), normalize(u + 0.1 * random_unit(rng, B, d))])
    p = EnergyParams(alpha=0.0, tau=1e-3)
    lg = loss_grad(TupleBatch(*z), p)
    assert np.all(lg.report.p_plus > 1 - 1e-12)
    assert np.abs(lg.alignment).max() < 1e-8
    assert np.abs(loss_grad(TupleBatch(*z), EnergyParams(alpha=0.0, tau=1.0)).alignment).max() > 1e-3


def test_tau_scaling_recomputed():
    tb = random_batch(6)
    for tau in (0.07, 0.14):
        p = EnergyParams(tau=tau)
        lg = loss_grad(tb, p)
        rep = lg.report
        # alignment magnitude tracks (1 - p+)/tau for the matched tuples
        emb = tb.stacked()
        expected = np.zeros_like(lg.alignment)
        for i in range(tb.size):
            g = energy_grad(emb[0, i], emb[1, i], emb[2, i], p)
            for s in range(3):
                expected[s, i] += (1 - rep.p_plus[i]) / tau / tb.size * g[s]
        np.testing.assert_allclose(lg.alignment, expected, atol=1e-13)


def test_permutation_equivariance():
    tb = random_batch(8, B=5)
    order = np.array([3, 0, 4, 1, 2])
    a = info_nce(tb, EnergyParams())
    b = info_nce(tb.permuted(order), EnergyParams())
    assert b.loss == pytest.approx(a.loss, abs=1e-12)
    np.testing.assert_allclose(b.per_anchor, a.per_anchor[order], atol=1e-12)
