"""Non-autoregressive pedestrian trajectory forecasting.

The package is organised as a small stack:

* ``nap.numeric``: dense-tensor autodiff core (forward ops, reverse-mode
  gradients, Adam, seeded sampling, gradient checking).
* ``nap.dataio``: trajectory/scene-grid file formats, windowing,
  normalisation, augmentation and a synthetic crowd generator.
* ``nap.model``: the forecasting network itself (encoders, context
  generators, latent head, parallel decoder, ablation variants).
* ``nap.train``: losses, mini-batch training loop, checkpointing.
* ``nap.evaluation``: ADE/FDE metrics, best-of-K protocol, baselines,
  error-increment study, heatmap export.
* ``nap.cli``: command-line entry point (``nap synth/train/eval/...``).
"""

__version__ = "0.1.0"
