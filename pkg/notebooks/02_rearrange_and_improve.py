# %% [markdown]
# # Cutting, packing and dropping satellites

# %%
import numpy as np

from ptlab.constructions import admissible_epsilon, default_unit_scale, rearrange
from ptlab.fixtures import ball_with_satellite, multi_blob
from ptlab.reduction import total_T, truncation_scan, try_split_improvement
from ptlab.transport import wasserstein_functional

rng = np.random.default_rng(3)
E = multi_blob(rng, 1 / 40, 3, diameter_cells=12)
F = wasserstein_functional(E, 1.0).target_set
u = default_unit_scale(E)
eps = 0.5 * admissible_epsilon(E, u)

R = rearrange(E, F, 1.0, eps, unit_scale=u)
for c in R.certificates:
    print(f"{c.name:22s} {c.lhs:10.5f} <= {c.rhs:10.5f} + {c.slack_allowance:.5f}  {c.passed}")

# %%
print("points", R.cover.n_points, "slice radius", R.cover.slice_radius, "container", R.layout.container_radius)

# %% [markdown]
# A ball with a detached 2% satellite: dropping the satellite and inflating
# the rest lowers the energy.

# %%
G, G1, G2 = ball_with_satellite(1 / 50, 0.3, 0.02, 0.75)
out = try_split_improvement(G, G1, G2, 1.0)
print(out.summary())
print("recomputed", total_T(out.improved, 1.0))

# %%
scan = truncation_scan(G, 1.0)
print(scan.verdict)
print(scan.to_csv()[:400])
