import math
from itertools import product

import numpy as np
import pytest

from pixelvq.autodiff import Tensor, gradcheck
from pixelvq.data import make_synthetic_corpus
from pixelvq.errors import CausalityViolation, CompatibilityError, ConfigError, RangeError
from pixelvq.prior import (
    ConditionVector,
    MaskedConv2d,
    PixelCNN,
    PriorConfig,
    PriorTrainConfig,
    break_center,
    causal_mask,
    causality_audit,
    fit_prior,
    gated_block,
    mask_census,
    masked_conv,
    prior_config_for,
    sample,
    softmax,
    train_prior,
)
from pixelvq.vqvae import HyperParams, PixelVQVAE


def small_prior(G=4, K=6, layers=2, filters=8, seed=0, **kw):
    return PixelCNN(PriorConfig(K=K, grid_side=G, condition_dims=(2, 3, 4), n_layers=layers,
                                n_filters=filters, **kw), seed)


def test_mask_a_census():
    m = causal_mask(3, "A")[0, 0]
    assert m.sum() == 4
    np.testing.assert_array_equal(m, [[1, 1, 1], [1, 0, 0], [0, 0, 0]])
    assert causal_mask(3, "B")[0, 0].sum() == 5
    assert causal_mask(5, "A")[0, 0].sum() == 12


def test_even_kernel_rejected():
    with pytest.raises(ValueError):
        causal_mask(4, "A")
    with pytest.raises(ConfigError):
        PriorConfig(kernel=2)


def test_type_a_output_ignores_present_and_future():
    rng = np.random.default_rng(0)
    w = Tensor(rng.standard_normal((1, 1, 3, 3)))
    x = rng.standard_normal((1, 1, 5, 5))
    base = masked_conv(Tensor(x), w, causal_mask(3, "A")).data.ravel()
    for q in range(25):
        y = x.copy()
        y.reshape(-1)[q] += 1.0
        out = masked_conv(Tensor(y), w, causal_mask(3, "A")).data.ravel()
        np.testing.assert_array_equal(out[: q + 1], base[: q + 1])


def test_type_b_depth_two_receptive_field():
    # one B step reaches offsets (-1,-1),(-1,0),(-1,1),(0,-1),(0,0); two steps is their Minkowski sum
    step = {(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0)}
    cone = {(a[0] + b[0], a[1] + b[1]) for a, b in product(step, step)}
    rng = np.random.default_rng(1)
    mask = causal_mask(3, "B")
    w1 = Tensor(np.abs(rng.standard_normal((1, 1, 3, 3))) + 0.1)
    w2 = Tensor(np.abs(rng.standard_normal((1, 1, 3, 3))) + 0.1)
    G = 7
    x = np.zeros((1, 1, G, G))
    f = lambda v: masked_conv(masked_conv(Tensor(v), w1, mask), w2, mask).data[0, 0]  # noqa: E731
    base = f(x)
    seen = set()
    for q in range(G * G):
        y = x.copy()
        y[0, 0].reshape(-1)[q] = 1.0
        qr, qc = divmod(q, G)
        for pr, pc in zip(*np.nonzero(f(y) != base)):
            seen.add((qr - pr, qc - pc))
    assert seen == cone


def test_gated_block_zero_input_zero_output():
    conv = MaskedConv2d(3, 8, 3, "B")
    out = gated_block(Tensor(np.zeros((2, 3, 4, 4))), conv, Tensor(np.zeros((2, 8))))
    assert not out.data.any()


def test_condition_changes_every_position():
    p = small_prior().eval()
    grid = np.zeros((1, 4, 4), np.int64)
    a = p.logits(grid, [[0, 0, 0]])
    b = p.logits(grid, [[1, 2, 3]])
    assert (np.abs(a - b).max(axis=1) > 0).all()


def test_condition_range_checked():
    p = small_prior()
    with pytest.raises(RangeError):
        p.logits(np.zeros((1, 4, 4), np.int64), [[2, 0, 0]])
    with pytest.raises(RangeError):
        ConditionVector(0, 3, 0).validate((2, 3, 4))


def test_one_block_gradcheck():
    p = small_prior(G=3, K=4, layers=1, filters=3, seed=2).astype(np.float64)
    rng = np.random.default_rng(3)
    grids = rng.integers(0, 4, size=(2, 3, 3))
    conds = [[0, 1, 2], [1, 0, 3]]
    report = gradcheck(lambda: p.loss(grids, conds), p.parameters(), max_entries=6)
    assert max(report.values()) < 1e-3, report


def test_head_width_is_K():
    p = small_prior(K=11)
    assert p.head2.weight.shape[0] == 11
    assert p.logits(np.zeros((2, 4, 4), np.int64), [[0, 0, 0]] * 2).shape == (2, 11, 4, 4)


def test_untrained_loss_near_uniform():
    p = PixelCNN(PriorConfig(K=256, grid_side=4, condition_dims=(2, 2, 2), n_layers=2, n_filters=32))
    grids = np.random.default_rng(0).integers(0, 256, size=(4, 4, 4))
    assert p.loss(grids, [[0, 0, 0]] * 4).item() == pytest.approx(math.log(256), abs=0.05)


def test_softmax_sums_to_one():
    p = small_prior().eval()
    probs = softmax(p.logits(np.zeros((1, 4, 4), np.int64), [[1, 1, 1]]), axis=1)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-5)


# -- audit -------------------------------------------------------------


def test_audit_fresh_prior_is_clean_and_covers_each_position_once():
    p = PixelCNN(PriorConfig(K=16, grid_side=8, condition_dims=(2, 2, 2), n_layers=3, n_filters=16))
    report = causality_audit(p)
    assert report.ok and report.violations == []
    assert (report.coverage == 1).all() and report.positions_checked == 64


def test_audit_catches_broken_center():
    p = break_center(PixelCNN(PriorConfig(K=16, grid_side=8, condition_dims=(2, 2, 2), n_layers=3,
                                          n_filters=16)), 0)
    report = causality_audit(p)
    assert not report.ok
    assert {v[0] for v in report.violations} == {divmod(q, 8) for q in range(64)}
    assert report.suspect_layers == ["layer0.conv"]
    with pytest.raises(CausalityViolation, match="layer0"):
        causality_audit(p, raise_on_violation=True)


def test_break_b_layer_is_caught():
    p = break_center(small_prior(G=5, layers=3), 1)
    assert mask_census(p) == ["layer1.conv"]
    assert causality_audit(p).violations


# -- sampling ----------------------------------------------------------


def test_greedy_sampling_deterministic():
    p = small_prior()
    a = sample(p, (1, 2, 3), temperature=0.0, seed=0)
    b = sample(p, (1, 2, 3), temperature=0.0, seed=99)
    assert np.array_equal(a, b) and a.shape == (1, 4, 4)


def test_sampling_support_and_seed():
    p = small_prior()
    g = sample(p, ConditionVector(0, 1, 2), temperature=1.0, seed=5, n=3)
    assert g.shape == (3, 4, 4) and g.min() >= 0 and g.max() < 6
    assert np.array_equal(g, sample(p, (0, 1, 2), 1.0, seed=5, n=3))


def test_sampling_argument_errors():
    p = small_prior()
    with pytest.raises(ValueError):
        sample(p, (0, 0, 0), temperature=-1.0)
    with pytest.raises(ValueError):
        sample(p, (0, 0, 0), n=0)


# -- training ----------------------------------------------------------


def test_fit_prior_deterministic_and_decreasing():
    rng = np.random.default_rng(0)
    grids = rng.integers(0, 6, size=(4, 4, 4))
    conds = np.array([[0, 0, 0], [1, 1, 1], [0, 2, 3], [1, 0, 2]])
    cfg = PriorTrainConfig(learning_rate=3e-3, batch_size=4, epochs=30)
    a = fit_prior(small_prior(), grids, conds, cfg, seed=1)
    b = fit_prior(small_prior(), grids, conds, cfg, seed=1)
    assert a.curve() == b.curve()
    assert a.curve()[-1] < a.curve()[0]


def test_fit_prior_rejects_out_of_vocab_grid():
    with pytest.raises(CompatibilityError):
        fit_prior(small_prior(), np.full((2, 4, 4), 6), np.zeros((2, 3), np.int64),
                  PriorTrainConfig(epochs=1))


def test_train_prior_checks_K():
    corpus = make_synthetic_corpus(4, 16, seed=0)
    vq = PixelVQVAE(HyperParams(I=16, L=1, K=8, D=4, F=8)).eval()
    bad = PriorConfig(K=9, grid_side=8, condition_dims=corpus.condition_dims, n_layers=1, n_filters=4)
    with pytest.raises(CompatibilityError, match="K"):
        train_prior(vq, corpus, bad, PriorTrainConfig(epochs=1))
    good = prior_config_for(vq, corpus, n_layers=1, n_filters=4)
    res = train_prior(vq, corpus, good, PriorTrainConfig(epochs=1, batch_size=4))
    assert res.steps >= 1 and good.K == 8 and good.grid_side == 8


def test_pixel_space_configuration_round_trip():
    from pixelvq.prior import grid_to_pixels, pixel_space_config, pixels_to_grid

    cfg = pixel_space_config(8, (2, 2, 2), levels=4, n_layers=1, n_filters=8)
    assert (cfg.K, cfg.grid_side) == (64, 8)
    levels = np.random.default_rng(0).integers(0, 4, (2, 3, 8, 8))
    grid = pixels_to_grid(levels / 3.0)
    assert grid.max() < 64
    np.testing.assert_array_equal(grid_to_pixels(grid), (levels / 3.0).astype(np.float32))
    prior = PixelCNN(cfg, seed=0)
    assert np.isfinite(prior.loss(grid, [[0, 1, 0], [1, 0, 1]]).item())
