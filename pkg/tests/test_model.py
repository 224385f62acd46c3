"""Encoders, context generators, latent draws, decoding, and forecasts."""

import numpy as np
import pytest

from nap.dataio.samples import normalize
from nap.errors import ConfigError, ShapeError
from nap.model import (EncodedState, NapConfig, NapModel, apply_variant,
                       forecast, prepare_batch)
from nap.numeric.gradcheck import grad_check
from nap.numeric.rng import substream
from nap.numeric.tensor import Tensor

from conftest import tiny_config, toy_grid, toy_sample


def zero_params(model):
    for t in model.store.params.values():
        t.data[...] = 0.0
    return model


def rand_obs(rng, t_obs=4):
    return rng.normal(0, 1, size=(t_obs, 2))


# ------------------------------------------------------------ encoders


def test_encode_trajectory_zero_params_is_zero():
    m = zero_params(NapModel(tiny_config(), seed=0))
    h = m.encode_trajectory(rand_obs(np.random.default_rng(0)))
    assert np.array_equal(h.numpy(), np.zeros(4))


def test_encode_trajectory_separates_paths():
    m = NapModel(tiny_config(), seed=3)
    rng = np.random.default_rng(1)
    h1 = m.encode_trajectory(rand_obs(rng)).numpy()
    h2 = m.encode_trajectory(rand_obs(rng)).numpy()
    assert not np.allclose(h1, h2)


def test_encode_trajectory_gradients():
    m = NapModel(tiny_config(), seed=5, dtype=np.float64)
    obs = rand_obs(np.random.default_rng(2))

    def f(store):
        return m.encode_trajectory(obs).sum()

    assert grad_check(f, m.store) < 1e-4


def test_encode_social_empty_is_zero():
    """Empty neighbor lists + zero biases (the init) -> exactly zero."""
    m = NapModel(tiny_config(), seed=4)
    empty = [np.zeros((0, 2)) for _ in range(4)]
    g = m.encode_social(empty).numpy()
    assert np.array_equal(g, np.zeros(4))


def test_encode_social_permutation_invariant():
    m = NapModel(tiny_config(), seed=4)
    rng = np.random.default_rng(3)
    nbr = [rng.normal(0, 1, size=(3, 2)) for _ in range(4)]
    flipped = [n[::-1].copy() for n in nbr]
    a = m.encode_social(nbr).numpy()
    b = m.encode_social(flipped).numpy()
    assert np.allclose(a, b, atol=1e-6)


def test_encode_social_duplicate_neighbor_is_mean():
    m = NapModel(tiny_config(), seed=4)
    one = [np.array([[1.0, -0.5]]) for _ in range(4)]
    two = [np.array([[1.0, -0.5], [1.0, -0.5]]) for _ in range(4)]
    assert np.array_equal(m.encode_social(one).numpy(), m.encode_social(two).numpy())


def test_encode_scene_zero_crop_is_zero():
    m = NapModel(tiny_config(), seed=6)
    s = m.encode_scene(np.zeros((1, 8, 8))).numpy()
    assert np.array_equal(s, np.zeros(4))


def test_encode_scene_sees_receptive_field():
    m = NapModel(tiny_config(), seed=6)
    a = np.zeros((1, 8, 8))
    b = a.copy()
    b[0, 4, 4] = 1.0
    assert not np.allclose(m.encode_scene(a).numpy(), m.encode_scene(b).numpy())


def test_encode_scene_locality():
    """Moving the obstacle by one cell changes the feature."""
    m = NapModel(tiny_config(), seed=6)
    a = np.zeros((1, 8, 8))
    a[0, 2:4, 2:4] = 1.0
    b = np.zeros((1, 8, 8))
    b[0, 2:4, 3:5] = 1.0
    assert not np.allclose(m.encode_scene(a).numpy(), m.encode_scene(b).numpy())


# ------------------------------------------------------------ contexts


def test_personal_context_zero():
    m = zero_params(NapModel(tiny_config(), seed=0))
    c = m.personal_context(Tensor(np.zeros(4, dtype=np.float32)))
    assert np.array_equal(c.numpy(), np.zeros(4))


def test_personal_context_identity_weights():
    m = NapModel(tiny_config(), seed=0)
    m.w_a.data[...] = np.eye(4)
    m.b_a.data[...] = 0.0
    h = Tensor(np.array([0.5, -1.0, 2.0, 0.25], dtype=np.float32))
    assert np.array_equal(m.personal_context(h).numpy(), h.numpy())


def test_personal_context_gradients():
    m = NapModel(tiny_config(), seed=7, dtype=np.float64)
    h = np.random.default_rng(0).normal(size=4)

    def f(store):
        return m.personal_context(Tensor(h)).sum()

    assert grad_check(f, m.store, sample_per_param=8) < 1e-4


def test_interaction_contexts_zero():
    m = zero_params(NapModel(tiny_config(), seed=0))
    state = EncodedState(h=Tensor(np.zeros(4, dtype=np.float32)),
                         g=Tensor(np.zeros(4, dtype=np.float32)),
                         s=Tensor(np.zeros(4, dtype=np.float32)))
    for c in m.interaction_contexts(state):
        assert np.array_equal(c.numpy(), np.zeros(4))


def test_interaction_contexts_default_shape():
    """Default config: exactly 12 step contexts of 32 values each."""
    m = NapModel(NapConfig(), seed=0)
    rng = np.random.default_rng(0)
    state = EncodedState(h=Tensor(rng.normal(size=32).astype(np.float32)),
                         g=Tensor(rng.normal(size=32).astype(np.float32)),
                         s=Tensor(rng.normal(size=32).astype(np.float32)))
    c_t = m.interaction_contexts(state)
    assert len(c_t) == 12
    assert all(c.shape == (32,) for c in c_t)


def test_interaction_contexts_sensitive_to_g():
    m = NapModel(tiny_config(), seed=8)
    rng = np.random.default_rng(5)
    h = Tensor(rng.normal(size=4).astype(np.float32))
    s = Tensor(rng.normal(size=4).astype(np.float32))
    g1 = Tensor(rng.normal(size=4).astype(np.float32))
    g2 = Tensor((g1.numpy() + 1.0).astype(np.float32))
    a = [c.numpy() for c in m.interaction_contexts(EncodedState(h, g1, s))]
    b = [c.numpy() for c in m.interaction_contexts(EncodedState(h, g2, s))]
    assert any(not np.allclose(x, y) for x, y in zip(a, b))


# ------------------------------------------------------------ latent


def rand_state(m, rng, batch=None):
    cfg = m.config
    shape = (cfg.d_h,) if batch is None else (batch, cfg.d_h)

    def t(d):
        sh = (d,) if batch is None else (batch, d)
        return Tensor(rng.normal(size=sh).astype(np.float32))

    return EncodedState(h=t(cfg.d_h), g=t(cfg.d_g), s=t(cfg.d_s))


def test_latent_eps_zero_is_mu():
    m = NapModel(tiny_config(), seed=9)
    state = rand_state(m, np.random.default_rng(0))
    draw = m.latent_draw(state, Tensor(np.zeros(3, dtype=np.float32)))
    assert np.array_equal(draw.z.numpy(), draw.mu.numpy())


def test_latent_zero_head_gives_unit_sigma():
    m = NapModel(tiny_config(), seed=9)
    m.w_sigma.data[...] = 0.0
    m.b_sigma.data[...] = 0.0
    state = rand_state(m, np.random.default_rng(1))
    draw = m.latent_draw(state, Tensor(np.ones(3, dtype=np.float32)))
    assert np.array_equal(draw.sigma.numpy(), np.ones(3))
    assert np.allclose(draw.z.numpy(), draw.mu.numpy() + 1.0, atol=1e-6)


def test_latent_sigma_positive_and_exact_identity():
    m = NapModel(tiny_config(), seed=10)
    rng = np.random.default_rng(2)
    state = rand_state(m, rng)
    eps = Tensor(rng.normal(size=3).astype(np.float32))
    draw = m.latent_draw(state, eps)
    assert np.all(draw.sigma.numpy() > 0)
    rebuilt = draw.mu.numpy() + draw.sigma.numpy() * eps.numpy()
    assert np.array_equal(draw.z.numpy(), rebuilt)


def test_latent_monte_carlo_mean():
    """Empirical mean of z over 10^4 draws matches mu within 3 standard errors."""
    m = NapModel(tiny_config(), seed=11)
    n = 10_000
    rng = np.random.default_rng(3)
    one = rand_state(m, np.random.default_rng(4))
    tile = EncodedState(
        h=Tensor(np.tile(one.h.numpy(), (n, 1))),
        g=Tensor(np.tile(one.g.numpy(), (n, 1))),
        s=Tensor(np.tile(one.s.numpy(), (n, 1))),
    )
    eps = Tensor(rng.standard_normal((n, 3)).astype(np.float32))
    draw = m.latent_batch(tile, eps)
    mu = draw.mu.numpy()[0]
    sigma = draw.sigma.numpy()[0]
    emp = draw.z.numpy().mean(axis=0)
    assert np.all(np.abs(emp - mu) <= 3.0 * sigma / np.sqrt(n))


# ------------------------------------------------------------ decoding


def test_decode_step_zero():
    m = zero_params(NapModel(tiny_config(), seed=0))
    zed = Tensor(np.zeros(3, dtype=np.float32))
    four = Tensor(np.zeros(4, dtype=np.float32))
    out = m.decode_step(four, four, zed)
    assert np.array_equal(out.numpy(), np.zeros(2))


def test_decode_step_pure():
    m = NapModel(tiny_config(), seed=12)
    rng = np.random.default_rng(0)
    c_t = Tensor(rng.normal(size=4).astype(np.float32))
    c_p = Tensor(rng.normal(size=4).astype(np.float32))
    z = Tensor(rng.normal(size=3).astype(np.float32))
    assert np.array_equal(m.decode_step(c_t, c_p, z).numpy(),
                          m.decode_step(c_t, c_p, z).numpy())


def test_decode_step_hand_affine():
    cfg = tiny_config(d_c=1, d_p=1, d_z=1)
    m = NapModel(cfg, seed=0)
    m.w_out.data[...] = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    m.b_out.data[...] = np.array([0.5, -0.5])
    out = m.decode_step(Tensor(np.array([0.1], dtype=np.float32)),
                        Tensor(np.array([0.2], dtype=np.float32)),
                        Tensor(np.array([0.3], dtype=np.float32)))
    # x = 0.1 + 0.4 + 0.9 + 0.5, y = 0.4 + 1.0 + 1.8 - 0.5
    assert np.allclose(out.numpy(), [1.9, 2.7], atol=1e-6)


# ------------------------------------------------------------ forecast


def norm_toy(seed=0):
    return normalize(toy_sample(np.random.default_rng(seed)))


def test_forward_step_order_is_unobservable():
    m = NapModel(tiny_config(), seed=13)
    s = norm_toy()
    batch = prepare_batch([s], {"toy": toy_grid()}, m.config)
    fwd, _ = m.forward(batch, steps=range(3))
    rev, _ = m.forward(batch, steps=reversed(range(3)))
    for t in range(3):
        assert np.array_equal(fwd[t].numpy(), rev[t].numpy())


def test_forecast_subset_equals_full_rows():
    m = NapModel(tiny_config(), seed=13)
    s = norm_toy()
    g = toy_grid()
    full = forecast(s, m, k=1, grid=g)
    last = forecast(s, m, k=1, grid=g, steps=(3,))
    assert np.array_equal(last.samples[0, 2], full.samples[0, 2])
    assert last.steps == (3,)
    assert np.array_equal(last.samples[0, :2], np.zeros((2, 2)))   # undecoded rows


def test_forecast_k20_reproducible():
    m = NapModel(tiny_config(), seed=14)
    s = norm_toy(1)
    g = toy_grid()
    a = forecast(s, m, k=20, rng=substream(7, "f"), grid=g)
    b = forecast(s, m, k=20, rng=substream(7, "f"), grid=g)
    c = forecast(s, m, k=20, rng=substream(8, "f"), grid=g)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)
    assert a.samples.shape == (20, 3, 2)
    assert len(a.latents) == 20


def test_forecast_sample_zero_is_mu_draw():
    m = NapModel(tiny_config(), seed=14)
    s = norm_toy(2)
    g = toy_grid()
    many = forecast(s, m, k=5, rng=substream(0, "f"), grid=g)
    single = forecast(s, m, k=1, grid=g)
    assert np.array_equal(many.samples[0], single.samples[0])
    assert np.array_equal(many.latents[0].eps.numpy(), np.zeros(3))


def test_forecast_requires_rng_for_multimodal():
    m = NapModel(tiny_config(), seed=14)
    with pytest.raises(ConfigError):
        forecast(norm_toy(), m, k=5, grid=toy_grid())


def test_forecast_requires_grid_for_scene_variants():
    m = NapModel(tiny_config(), seed=14)
    with pytest.raises(ConfigError):
        forecast(norm_toy(), m, k=1)


def test_forecast_bad_steps_rejected():
    m = NapModel(tiny_config(), seed=14)
    with pytest.raises(ConfigError):
        forecast(norm_toy(), m, k=1, grid=toy_grid(), steps=(0,))
    with pytest.raises(ConfigError):
        forecast(norm_toy(), m, k=1, grid=toy_grid(), steps=(4,))


# ------------------------------------------------------------ config/variants


def test_config_validation():
    with pytest.raises(ConfigError):
        NapConfig(variant="nope")
    with pytest.raises(ConfigError):
        NapConfig(decoder="gru")
    with pytest.raises(ConfigError):
        NapConfig(decoder="ar", variant="p")
    with pytest.raises(ConfigError):
        NapConfig(d_h=0)
    with pytest.raises(ConfigError):
        NapConfig(gcn_layers=2)
    with pytest.raises(ConfigError):
        NapConfig(k=0)


def test_apply_variant_rewires():
    m = NapModel(tiny_config(), seed=15)
    p = apply_variant(m, "p")
    assert p.config.variant == "p"
    assert p.seed == m.seed
    s = norm_toy(3)
    a = forecast(s, m, k=1, grid=toy_grid()).samples
    b = forecast(s, p, k=1, grid=toy_grid())   # 'p' drops the scene path
    assert not np.array_equal(a, b.samples)
    with pytest.raises(ConfigError):
        apply_variant(m, "bogus")


def test_prepare_batch_shape_check():
    m = NapModel(tiny_config(), seed=0)
    s = norm_toy()
    s.obs = s.obs[:2]
    with pytest.raises(ShapeError):
        prepare_batch([s], {"toy": toy_grid()}, m.config)


def test_end_to_end_gradients_tiny():
    """Joint check through every head at small dims.

    Zero-initialized biases put ReLU pre-activations exactly at the kink
    (zero crop patches, empty neighbor steps), where finite differences and
    the subgradient convention disagree; jitter all parameters to check at
    a generic point.
    """
    m = NapModel(tiny_config(), seed=16, dtype=np.float64)
    jit = np.random.default_rng(99)
    for t in m.store.params.values():
        t.data += jit.uniform(-0.05, 0.05, size=t.data.shape)
    s = norm_toy(4)
    batch = prepare_batch([s], {"toy": toy_grid()}, m.config, dtype=np.float64)
    target = np.asarray(s.fut, dtype=np.float64)
    eps = np.full((1, 3), 0.2)

    def f(store):
        preds, _ = m.forward(batch, eps=eps)
        loss = None
        for t, p in preds.items():
            d = p.reshape(-1) - Tensor(target[t])
            term = (d * d).sum()
            loss = term if loss is None else loss + term
        return loss

    assert grad_check(f, m.store, sample_per_param=3,
                      rng=np.random.default_rng(0)) < 1e-4
