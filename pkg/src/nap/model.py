"""The NAP network: encoders, context generators, latent heads, decoders.

Per-sample operations mirror the architecture one pedestrian at a time;
training and forecasting go through the batched `forward` path, which the
per-sample methods wrap with batch size 1 so there is a single source of
truth for the math.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, ShapeError
from .numeric.layers import (
    LstmState,
    graph_conv,
    init_conv_net,
    init_lstm,
    linear,
    lstm_zero_state,
    conv_net_batch,
    lstm_cell,
)
from .numeric.rng import gaussian_sample
from .numeric.tensor import Tensor, concat, no_grad
from .numeric.params import ParamStore

VARIANTS = ("full", "p", "iss", "isg", "isc")
DECODERS = ("nar", "ar")


@dataclass(frozen=True)
class NapConfig:
    d_emb: int = 32
    d_h: int = 32
    d_g: int = 32
    d_s: int = 32
    d_c: int = 32
    d_p: int = 32
    d_z: int = 16
    d_b: int = 128          # MLP_B hidden width
    t_obs: int = 8
    t_pred: int = 12
    gcn_layers: int = 1
    variant: str = "full"
    multimodal: bool = False
    k: int = 20
    decoder: str = "nar"
    grid_channels: int = 1
    crop_h: int = 16
    crop_w: int = 16

    def __post_init__(self):
        dims = (self.d_emb, self.d_h, self.d_g, self.d_s, self.d_c, self.d_p,
                self.d_z, self.d_b, self.t_obs, self.t_pred, self.grid_channels,
                self.crop_h, self.crop_w)
        if any(d <= 0 for d in dims):
            raise ConfigError("all model dimensions must be positive")
        if self.gcn_layers != 1:
            raise ConfigError("only gcn_layers=1 is supported (neighbor-of-neighbor "
                              "features are not available in SequenceSample)")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant '{self.variant}'; pick one of {VARIANTS}")
        if self.decoder not in DECODERS:
            raise ConfigError(f"unknown decoder '{self.decoder}'; pick one of {DECODERS}")
        if self.decoder == "ar" and self.variant != "full":
            raise ConfigError("the autoregressive reference decoder only runs as 'full'")
        if self.k < 1:
            raise ConfigError("k must be >= 1")

    @property
    def uses_latent(self):
        # ablation variants drop the latent variable entirely
        return self.variant == "full" and self.decoder == "nar"

    @property
    def uses_social(self):
        return self.variant in ("full", "iss", "isg")

    @property
    def uses_scene(self):
        return self.variant in ("full", "iss", "isc")

    @property
    def uses_personal(self):
        return self.variant in ("full", "p")

    @property
    def uses_interaction(self):
        return self.variant != "p" and self.decoder == "nar"

    @property
    def icg_in_dim(self):
        dim = self.d_h
        if self.uses_social:
            dim += self.d_g
        if self.uses_scene:
            dim += self.d_s
        return dim

    @property
    def decoder_in_dim(self):
        if self.variant == "p":
            return self.d_p
        dim = self.d_c
        if self.variant == "full":
            dim += self.d_p + (self.d_z if self.uses_latent else 0)
        return dim


@dataclass
class EncodedState:
    """Final encoder outputs; g and s are zero when the variant disables them."""

    h: Tensor
    g: Tensor
    s: Tensor


@dataclass
class ContextSet:
    c_p: Tensor          # or None when the variant drops the personal context
    c_t: list            # t_pred step contexts, or None for variant 'p'


@dataclass
class LatentDraw:
    mu: Tensor
    sigma: Tensor
    z: Tensor
    eps: Tensor
    logvar: Tensor = None  # pre-exp output of the sigma head (KL uses it)


@dataclass
class ForecastSet:
    samples: np.ndarray          # (K, t_pred, 2) normalized coordinates
    latents: list                # K LatentDraw entries, or empty when no latent path
    ped_id: int
    norm_offset: np.ndarray
    norm_rotation: float
    steps: tuple                 # 1-based predicted steps actually decoded


class NapModel:
    def __init__(self, config=None, seed=0, dtype=np.float32):
        self.config = config or NapConfig()
        self.seed = int(seed)
        self.store = ParamStore(seed=self.seed, dtype=dtype)
        self._build()

    def _build(self):
        cfg = self.config
        st = self.store
        self.w_emb = st.uniform("emb.w", (cfg.d_emb, 2))
        self.b_emb = st.zeros("emb.b", (cfg.d_emb,))
        self.lstm_enc = init_lstm(st, "enc", cfg.d_emb, cfg.d_h)
        if cfg.uses_social:
            self.w_gcn = st.uniform("gcn.w", (cfg.d_g, 2))
            self.b_gcn = st.zeros("gcn.b", (cfg.d_g,))
            self.lstm_sg = init_lstm(st, "sg", cfg.d_g, cfg.d_g)
        if cfg.uses_scene:
            self.cnn = init_conv_net(st, "cnn", cfg.grid_channels, cfg.d_s)
        if cfg.uses_personal:
            self.w_a = st.uniform("pcg.w", (cfg.d_p, cfg.d_h))
            self.b_a = st.zeros("pcg.b", (cfg.d_p,))
        if cfg.uses_interaction:
            self.w_b1 = st.uniform("icg.w1", (cfg.d_b, cfg.icg_in_dim))
            self.b_b1 = st.zeros("icg.b1", (cfg.d_b,))
            self.w_b2 = st.uniform("icg.w2", (cfg.d_b, cfg.d_b))
            self.b_b2 = st.zeros("icg.b2", (cfg.d_b,))
            self.w_b3 = st.uniform("icg.w3", (cfg.t_pred * cfg.d_c, cfg.d_b))
            self.b_b3 = st.zeros("icg.b3", (cfg.t_pred * cfg.d_c,))
        if cfg.uses_latent:
            lat_in = cfg.d_h + cfg.d_g + cfg.d_s
            self.w_mu = st.uniform("lat.w_mu", (cfg.d_z, lat_in))
            self.b_mu = st.zeros("lat.b_mu", (cfg.d_z,))
            self.w_sigma = st.uniform("lat.w_sigma", (cfg.d_z, lat_in))
            self.b_sigma = st.zeros("lat.b_sigma", (cfg.d_z,))
        if cfg.decoder == "nar":
            self.w_out = st.uniform("dec.w_out", (2, cfg.decoder_in_dim))
            self.b_out = st.zeros("dec.b_out", (2,))
        else:
            self.w_dec_init = st.uniform("ar.w_init", (cfg.d_c, cfg.d_h + cfg.d_g + cfg.d_s))
            self.b_dec_init = st.zeros("ar.b_init", (cfg.d_c,))
            self.w_dec_emb = st.uniform("ar.w_emb", (cfg.d_emb, 2))
            self.b_dec_emb = st.zeros("ar.b_emb", (cfg.d_emb,))
            self.lstm_dec = init_lstm(st, "ar.lstm", cfg.d_emb, cfg.d_c)
            self.w_dec_out = st.uniform("ar.w_out", (2, cfg.d_c))
            self.b_dec_out = st.zeros("ar.b_out", (2,))

    @property
    def dtype(self):
        return self.store.dtype

    def _const(self, arr):
        return Tensor(np.asarray(arr, dtype=self.dtype))

    # -- batched encoders -----------------------------------------------------

    def _encode_trajectory_batch(self, obs):
        """obs: (B, t_obs, 2) array -> hidden (B, d_h)."""
        cfg = self.config
        B = obs.shape[0]
        if obs.shape[1] != cfg.t_obs or obs.shape[2] != 2:
            raise ShapeError(f"observed window must be ({cfg.t_obs}, 2) per sample")
        state = lstm_zero_state(cfg.d_h, batch=B, dtype=self.dtype)
        for t in range(cfg.t_obs):
            e_t = linear(self._const(obs[:, t, :]), self.w_emb, self.b_emb)
            state = lstm_cell(state, e_t, self.lstm_enc)
        return state.hidden

    def _encode_social_batch(self, neighbors_per_sample):
        """neighbors_per_sample: per sample, t_obs lists of (N, 2) arrays."""
        cfg = self.config
        B = len(neighbors_per_sample)
        if not cfg.uses_social:
            return Tensor(np.zeros((B, cfg.d_g), dtype=self.dtype))
        state = lstm_zero_state(cfg.d_g, batch=B, dtype=self.dtype)
        for t in range(cfg.t_obs):
            rows = []
            for nb in neighbors_per_sample:
                feats = [self._const(p) for p in np.asarray(nb[t], dtype=self.dtype)]
                rows.append(graph_conv(None, feats, self.w_gcn, self.b_gcn).reshape(1, -1))
            a_t = concat(rows, axis=0)
            state = lstm_cell(state, a_t, self.lstm_sg)
        return state.hidden

    def _encode_scene_batch(self, crops):
        """crops: (B, C, crop_h, crop_w) array -> (B, d_s)."""
        cfg = self.config
        B = crops.shape[0]
        if not cfg.uses_scene:
            return Tensor(np.zeros((B, cfg.d_s), dtype=self.dtype))
        if crops.shape[1:] != (cfg.grid_channels, cfg.crop_h, cfg.crop_w):
            raise ShapeError(f"scene crop must be {(cfg.grid_channels, cfg.crop_h, cfg.crop_w)}")
        return conv_net_batch(self._const(crops), self.cnn)

    def encode_batch(self, batch):
        return EncodedState(
            h=self._encode_trajectory_batch(batch["obs"]),
            g=self._encode_social_batch(batch["neighbors"]),
            s=self._encode_scene_batch(batch["crops"]),
        )

    # -- context generators ---------------------------------------------------

    def _icg_input(self, state):
        cfg = self.config
        parts = [state.h]
        if cfg.uses_social:
            parts.append(state.g)
        if cfg.uses_scene:
            parts.append(state.s)
        axis = 1 if state.h.ndim == 2 else 0
        return concat(parts, axis=axis) if len(parts) > 1 else parts[0]

    def contexts_batch(self, state):
        cfg = self.config
        c_p = None
        if cfg.uses_personal:
            c_p = linear(state.h, self.w_a, self.b_a)
        c_t = None
        if cfg.uses_interaction:
            x = self._icg_input(state)
            y = linear(x, self.w_b1, self.b_b1).relu()
            y = linear(y, self.w_b2, self.b_b2).relu()
            flat = linear(y, self.w_b3, self.b_b3)   # (B, t_pred * d_c)
            axis = flat.ndim - 1
            c_t = [flat.narrow(axis, t * cfg.d_c, cfg.d_c) for t in range(cfg.t_pred)]
        return ContextSet(c_p=c_p, c_t=c_t)

    def latent_batch(self, state, eps):
        cfg = self.config
        if not cfg.uses_latent:
            return None
        x = concat([state.h, state.g, state.s], axis=1 if state.h.ndim == 2 else 0)
        mu = linear(x, self.w_mu, self.b_mu)
        logvar = linear(x, self.w_sigma, self.b_sigma)
        sigma = (logvar * 0.5).exp()
        eps_t = eps if isinstance(eps, Tensor) else self._const(eps)
        z = mu + sigma * eps_t
        return LatentDraw(mu=mu, sigma=sigma, z=z, eps=eps_t, logvar=logvar)

    def decode_batch(self, contexts, latent, t):
        """Decode predicted step t (0-based) for the whole batch -> (B, 2)."""
        cfg = self.config
        if cfg.variant == "p":
            x = contexts.c_p
        else:
            parts = [contexts.c_t[t]]
            if cfg.variant == "full":
                parts.append(contexts.c_p)
                if latent is not None:
                    parts.append(latent.z)
            axis = 1 if parts[0].ndim == 2 else 0
            x = concat(parts, axis=axis) if len(parts) > 1 else parts[0]
        return linear(x, self.w_out, self.b_out)

    def forward(self, batch, eps=None, steps=None):
        """Full batched forward pass.

        batch: dict with "obs" (B, t_obs, 2), "neighbors", "crops".
        eps: (B, d_z) noise for the latent draw, zeros when omitted.
        steps: 0-based predicted step indices to decode (default: all).
        Returns (preds, latent) where preds maps step index -> (B, 2) Tensor.
        """
        cfg = self.config
        if cfg.decoder == "ar":
            return self._forward_ar(batch)
        state = self.encode_batch(batch)
        contexts = self.contexts_batch(state)
        latent = None
        if cfg.uses_latent:
            B = batch["obs"].shape[0]
            eps_arr = np.zeros((B, cfg.d_z), dtype=self.dtype) if eps is None else eps
            latent = self.latent_batch(state, eps_arr)
        if steps is None:
            steps = range(cfg.t_pred)
        preds = {t: self.decode_batch(contexts, latent, t) for t in steps}
        return preds, latent

    def _forward_ar(self, batch):
        """Reference autoregressive decoder: LSTM fed with its own outputs."""
        cfg = self.config
        state = self.encode_batch(batch)
        x = self._icg_input(state)  # ar is always 'full': h + g + s
        h0 = linear(x, self.w_dec_init, self.b_dec_init)
        B = h0.shape[0]
        dec = LstmState(hidden=h0, cell=Tensor(np.zeros((B, cfg.d_c), dtype=self.dtype)))
        prev = self._const(np.zeros((B, 2), dtype=self.dtype))
        preds = {}
        for t in range(cfg.t_pred):
            e = linear(prev, self.w_dec_emb, self.b_dec_emb)
            dec = lstm_cell(dec, e, self.lstm_dec)
            pos = linear(dec.hidden, self.w_dec_out, self.b_dec_out)
            preds[t] = pos
            prev = pos
        return preds, None

    # -- per-sample operations (batch-of-1 wrappers) ---------------------------

    def encode_trajectory(self, obs):
        obs = np.asarray(obs, dtype=self.dtype)
        return self._encode_trajectory_batch(obs[None]).reshape(-1)

    def encode_social(self, neighbors):
        """neighbors: t_obs lists of (N, 2) neighbor positions."""
        if len(neighbors) != self.config.t_obs:
            raise ShapeError(f"need {self.config.t_obs} neighbor lists")
        return self._encode_social_batch([neighbors]).reshape(-1)

    def encode_scene(self, crop):
        crop = np.asarray(crop, dtype=self.dtype)
        if crop.ndim != 3:
            raise ShapeError("scene crop must be (C, H, W)")
        return self._encode_scene_batch(crop[None]).reshape(-1)

    def personal_context(self, h):
        if not self.config.uses_personal:
            raise ConfigError(f"variant '{self.config.variant}' has no personal context")
        return linear(h, self.w_a, self.b_a)

    def interaction_contexts(self, state):
        ctx = self.contexts_batch(state)
        if ctx.c_t is None:
            raise ConfigError(f"variant '{self.config.variant}' has no interaction contexts")
        return ctx.c_t

    def latent_draw(self, state, eps):
        if not self.config.uses_latent:
            raise ConfigError(f"variant '{self.config.variant}' has no latent path")
        draw = self.latent_batch(state, eps)
        return draw

    def decode_step(self, c_t, c_p, z):
        cfg = self.config
        if cfg.variant == "p":
            x = c_p
        elif cfg.variant == "full":
            parts = [c_t, c_p] + ([z] if cfg.uses_latent else [])
            axis = 1 if c_t.ndim == 2 else 0
            x = concat(parts, axis=axis)
        else:
            x = c_t
        return linear(x, self.w_out, self.b_out)


def apply_variant(model, variant):
    """Same seed and architecture dims, rewired for the requested variant."""
    variant = variant.lower()
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant '{variant}'; pick one of {VARIANTS}")
    cfg = replace(model.config, variant=variant)
    return NapModel(cfg, seed=model.seed, dtype=model.dtype)


def prepare_batch(samples, grids, config, dtype=np.float32):
    """Normalize samples and assemble model inputs.

    samples must already be normalized (last observed point at the origin);
    grids maps scene_id -> SceneGrid (or a per-sample list of grids when
    augmentation rotated them individually).
    """
    from .dataio.grids import crop_scene

    B = len(samples)
    obs = np.zeros((B, config.t_obs, 2), dtype=dtype)
    crops = np.zeros((B, config.grid_channels, config.crop_h, config.crop_w), dtype=dtype)
    neighbors = []
    for i, s in enumerate(samples):
        if s.obs.shape != (config.t_obs, 2):
            raise ShapeError(f"sample obs shape {s.obs.shape}, expected ({config.t_obs}, 2)")
        obs[i] = s.obs
        if config.uses_scene:
            grid = grids[i] if isinstance(grids, (list, tuple)) else grids[s.scene_id]
            crops[i] = crop_scene(grid, s.norm_offset, (config.crop_h, config.crop_w))
        neighbors.append([np.asarray(n, dtype=dtype).reshape(-1, 2) for n in s.neighbors])
    return {"obs": obs, "neighbors": neighbors, "crops": crops}


def forecast(sample, model, k=1, rng=None, grid=None, steps=None):
    """K forecasts for one normalized sample; non-autoregressive over steps.

    Sample 0 is always the deterministic mu-draw (eps = 0); samples 1..K-1
    use random eps from rng. Variants without a latent path produce K
    identical trajectories. steps takes 1-based predicted step indices.
    """
    cfg = model.config
    if k < 1:
        raise ConfigError("k must be >= 1")
    if k > 1 and cfg.uses_latent and rng is None:
        raise ConfigError("k > 1 needs an rng for the latent draws")
    if cfg.uses_scene and grid is None:
        raise ConfigError("this variant needs the sample's scene grid")
    batch = prepare_batch([sample], [grid], cfg, dtype=model.dtype)

    if steps is None:
        step_idx = tuple(range(cfg.t_pred))
    else:
        step_idx = tuple(sorted(int(s) - 1 for s in steps))
        if any(t < 0 or t >= cfg.t_pred for t in step_idx):
            raise ConfigError(f"steps must lie in 1..{cfg.t_pred}")

    out = np.zeros((k, cfg.t_pred, 2), dtype=np.float64)
    latents = []
    with no_grad():
        if cfg.decoder == "ar":
            preds, _ = model._forward_ar(batch)
            for ki in range(k):
                for t in step_idx:
                    out[ki, t] = preds[t].numpy()[0]
        else:
            state = model.encode_batch(batch)
            contexts = model.contexts_batch(state)
            for ki in range(k):
                latent = None
                if cfg.uses_latent:
                    if ki == 0:
                        eps = Tensor(np.zeros((1, cfg.d_z), dtype=model.dtype))
                    else:
                        eps = gaussian_sample(rng, cfg.d_z, dtype=model.dtype).reshape(1, -1)
                    latent = model.latent_batch(state, eps)
                    latents.append(LatentDraw(mu=latent.mu.reshape(-1).detach(),
                                              sigma=latent.sigma.reshape(-1).detach(),
                                              z=latent.z.reshape(-1).detach(),
                                              eps=latent.eps.reshape(-1).detach()))
                for t in step_idx:
                    out[ki, t] = model.decode_batch(contexts, latent, t).numpy()[0]
    return ForecastSet(
        samples=out,
        latents=latents,
        ped_id=sample.ped_id,
        norm_offset=sample.norm_offset.copy(),
        norm_rotation=sample.norm_rotation,
        steps=tuple(t + 1 for t in step_idx),
    )
