"""
Acquisition landscape and the search path
=========================================

Maps the information gain over the toy scenario space after the initial
design: the expected squared change of the exceedance estimate from one
more test. High ground hugs the critical line w1 + w2 = 2 where the
environment still has mass. A stochastic-approximation ascent path is
overlaid, from a random start to the returned candidate.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import krigseq as kq
from krigseq import SAConfig
from krigseq.rng import substream

config = kq.config_from_dict({
    "params": {"beta": 0.0, "tau2": 1.0, "theta": 1.0, "nugget": 1e-8},
    "gamma": 2.0,
    "env": {"kind": "iid-standard-gaussian", "dim": 2},
    "oracle": {"id": "toy"},
    "initial_design": {"count": 20, "bounds": [[-3.0, 3.0], [-3.0, 3.0]]},
    "sa": {"a0": 20.0, "iterations": 40, "grad_samples": 500},
    "steps": 0,
    "eval": {"samples": 2000, "resample": False},
    "seed": 5,
    "selection_mode": "sa-optimized",
})
state = kq.initialize(config)

grid = np.linspace(-3, 3, 41)
XX, YY = np.meshgrid(grid, grid)
gain = kq.information_gain_batch(
    np.column_stack([XX.ravel(), YY.ravel()]), state.design, config.params,
    config.gamma, config.env, outer=32, inner=1500,
    rng=substream(config.seed, "demo-landscape"))

result = kq.sa_search(state.design, config.params, config.gamma, config.env,
                      SAConfig(a0=20.0, iterations=40, grad_samples=500,
                               starts=[np.array([0.4, 0.2])],
                               bounds=config.initial_bounds),
                      substream(config.seed, "demo-sa"))
path = result.traces[0]

fig, ax = plt.subplots(figsize=(6.2, 5.2))
im = ax.pcolormesh(XX, YY, np.log10(gain + 1e-12).reshape(XX.shape),
                   cmap="magma", shading="auto")
fig.colorbar(im, ax=ax, label="log10 information gain")
ax.plot(grid, 2 - grid, "w--", lw=1, label="w1 + w2 = 2")
ax.scatter(*state.design.points.T, c="cyan", s=20, label="design")
ax.plot(path[:, 0], path[:, 1], "-o", c="lime", ms=3, lw=1.2,
        label="SA iterates")
ax.scatter(*result.point, c="red", s=90, marker="*", zorder=5,
           label="selected")
ax.set_xlim(-3, 3)
ax.set_ylim(-3, 3)
ax.legend(loc="lower left", fontsize=8)
ax.set_title("one-step information gain")
fig.tight_layout()
fig.savefig("demos/output_acquisition_landscape.png", dpi=110)
print(f"selected {result.point} with gain {result.score.info_gain:.3e}, "
      f"lpi {result.score.lpi:.3f}")
print("wrote demos/output_acquisition_landscape.png")
