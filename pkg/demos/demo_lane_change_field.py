"""
Lane-change exceedance field
============================

Builds the kriging model of the lane-change response max 1/R(t) from a
20-point design and renders the predicted conflict probability
P(f > 1/b) over the (TTC^-1, R^-1) box, with the design points marked by
outcome and an environment sample cloud overlaid.
"""

import json

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import krigseq as kq
from krigseq.estimator import exceedance_from_moments
from krigseq.rng import substream

with open("configs/lane_change_table1.json") as fh:
    config = kq.config_from_dict(json.load(fh))

state = kq.initialize(config)
design = state.design

grid = np.linspace(0.001, 0.5, 160)
XX, YY = np.meshgrid(grid, grid)
nodes = np.column_stack([XX.ravel(), YY.ravel()])
means, variances = kq.posterior_batch(nodes, design, config.params)
p = exceedance_from_moments(means, variances, config.gamma, config.params)

cloud = config.env.sample(600, substream(config.seed, "demo-cloud"))

fig, ax = plt.subplots(figsize=(6.4, 5.4))
im = ax.pcolormesh(XX, YY, p.reshape(XX.shape), cmap="viridis",
                   vmin=0.0, vmax=1.0, shading="auto")
fig.colorbar(im, ax=ax, label="P(f > 1/b)")
ax.scatter(*cloud.T, s=6, c="deepskyblue", alpha=0.5, label="env sample")
safe = design.responses <= config.gamma
ax.scatter(*design.points[safe].T, marker="o", facecolors="none",
           edgecolors="red", s=60, label="tested, no conflict")
ax.scatter(*design.points[~safe].T, marker="x", c="red", s=60,
           label="tested, conflict")
ax.set_xlim(0, 0.5)
ax.set_ylim(0, 0.6)
ax.set_xlabel("TTC$^{-1}$ (1/s)")
ax.set_ylabel("R$^{-1}$ (1/m)")
ax.legend(loc="upper right", fontsize=8)
ax.set_title("posterior conflict probability")
fig.tight_layout()
fig.savefig("demos/output_lane_change_field.png", dpi=110)

for name, pt in {"A": [0.05, 0.1], "B": [0.12, 0.55], "C": [0.05, 0.55],
                 "D": [0.45, 0.5]}.items():
    lpi = kq.local_prediction_impact(np.array(pt), design, config.params,
                                     config.gamma)
    gain = kq.information_gain(np.array(pt), design, config.params,
                               config.gamma, config.env, 128, 8000,
                               substream(config.seed, "demo", name))
    print(f"candidate {name} {pt}: lpi = {lpi:.3e}, info gain = {gain:.3e}")
print("wrote demos/output_lane_change_field.png")
