"""Checkpoint round trips and corruption handling."""

import struct

import numpy as np
import pytest

from nap.checkpoint import MAGIC, load_checkpoint, save_checkpoint
from nap.dataio.samples import normalize
from nap.errors import CompatibilityError
from nap.model import NapModel, forecast

from conftest import tiny_config, toy_grid, toy_sample


@pytest.fixture()
def trained_like_model():
    m = NapModel(tiny_config(), seed=17)
    rng = np.random.default_rng(0)
    for t in m.store.params.values():
        t.data += rng.normal(0, 0.1, size=t.data.shape).astype(t.data.dtype)
    return m


def test_save_load_save_identical_bytes(tmp_path, trained_like_model):
    p1 = tmp_path / "a.ckpt"
    p2 = tmp_path / "b.ckpt"
    save_checkpoint(trained_like_model, p1)
    loaded = load_checkpoint(p1)
    save_checkpoint(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_restores_exact_params(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    save_checkpoint(trained_like_model, p)
    loaded = load_checkpoint(p)
    assert loaded.config == trained_like_model.config
    assert loaded.seed == trained_like_model.seed
    for name in trained_like_model.store.names():
        assert np.array_equal(loaded.store[name].data,
                              trained_like_model.store[name].data), name


def test_forecast_identical_after_roundtrip(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    save_checkpoint(trained_like_model, p)
    loaded = load_checkpoint(p)
    s = normalize(toy_sample(np.random.default_rng(1)))
    g = toy_grid()
    a = forecast(s, trained_like_model, k=1, grid=g)
    b = forecast(s, loaded, k=1, grid=g)
    assert np.array_equal(a.samples, b.samples)


def test_meta_roundtrip(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    meta = {"train_scenes": "a,b", "test_scene": "c"}
    save_checkpoint(trained_like_model, p, meta=meta)
    loaded = load_checkpoint(p)
    assert loaded.meta == meta
    # meta carried on the model survives a bare save
    p2 = tmp_path / "m2.ckpt"
    save_checkpoint(loaded, p2)
    assert load_checkpoint(p2).meta == meta


def test_truncated_file_rejected(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    save_checkpoint(trained_like_model, p)
    whole = p.read_bytes()
    for cut in (3, 9, len(whole) // 2, len(whole) - 2):
        (tmp_path / "cut.ckpt").write_bytes(whole[:cut])
        with pytest.raises(CompatibilityError):
            load_checkpoint(tmp_path / "cut.ckpt")


def test_bad_magic_rejected(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    save_checkpoint(trained_like_model, p)
    blob = bytearray(p.read_bytes())
    blob[:7] = b"NOTCKPT"
    p.write_bytes(bytes(blob))
    with pytest.raises(CompatibilityError, match="magic"):
        load_checkpoint(p)


def test_bad_version_rejected(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    save_checkpoint(trained_like_model, p)
    blob = bytearray(p.read_bytes())
    blob[len(MAGIC):len(MAGIC) + 4] = struct.pack("<I", 99)
    p.write_bytes(bytes(blob))
    with pytest.raises(CompatibilityError, match="version"):
        load_checkpoint(p)


def test_trailing_bytes_rejected(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    save_checkpoint(trained_like_model, p)
    p.write_bytes(p.read_bytes() + b"junk")
    with pytest.raises(CompatibilityError, match="trailing"):
        load_checkpoint(p)


def test_unknown_config_key_rejected(tmp_path, trained_like_model):
    p = tmp_path / "m.ckpt"
    save_checkpoint(trained_like_model, p)
    blob = p.read_bytes()
    head = len(MAGIC) + 4
    (cfg_len,) = struct.unpack("<Q", blob[head:head + 8])
    cfg = blob[head + 8:head + 8 + cfg_len] + b"mystery_field = 7\n"
    patched = blob[:head] + struct.pack("<Q", len(cfg)) + cfg + blob[head + 8 + cfg_len:]
    p.write_bytes(patched)
    with pytest.raises(CompatibilityError, match="unknown"):
        load_checkpoint(p)


def test_missing_file():
    with pytest.raises(CompatibilityError):
        load_checkpoint("/nonexistent/model.ckpt")


def test_variant_checkpoints_roundtrip(tmp_path):
    """Each variant saves a different tensor set; all must round trip."""
    for variant in ("full", "p", "iss", "isg", "isc"):
        m = NapModel(tiny_config(variant=variant), seed=3)
        p = tmp_path / f"{variant}.ckpt"
        save_checkpoint(m, p)
        loaded = load_checkpoint(p)
        assert loaded.config.variant == variant
        assert loaded.store.names() == m.store.names()


def test_tensor_set_mismatch_rejected(tmp_path):
    """A 'p' checkpoint body under a 'full' config header must not load."""
    full = NapModel(tiny_config(), seed=1)
    p_model = NapModel(tiny_config(variant="p"), seed=1)
    path = tmp_path / "mix.ckpt"
    save_checkpoint(p_model, path)
    blob = path.read_bytes()
    head = len(MAGIC) + 4
    (cfg_len,) = struct.unpack("<Q", blob[head:head + 8])
    full_cfg = blob[head + 8:head + 8 + cfg_len].replace(b"variant = p",
                                                         b"variant = full")
    patched = blob[:head] + struct.pack("<Q", len(full_cfg)) + full_cfg \
        + blob[head + 8 + cfg_len:]
    path.write_bytes(patched)
    with pytest.raises(CompatibilityError, match="tensor set"):
        load_checkpoint(path)
