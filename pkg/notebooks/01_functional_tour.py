# %% [markdown]
# # The self-transport functional on a lattice
# Cheap walk through `wasserstein_functional`: a disk, its optimal outside
# target, how the value scales, and how far mass travels.

# %%
import math

import numpy as np

from ptlab.fixtures import random_blob
from ptlab.gridio import to_pgm
from ptlab.lattice import ball_set, c0, rescale, volume
from ptlab.transport import wasserstein_functional

h = 1 / 40
disk = ball_set([0.5 * h, 0.5 * h], 0.3, h, 2)
res = wasserstein_functional(disk, p=2)
print("cells", disk.count, "W_2", res.value, "max move", res.max_displacement)

# %%
# the target hugs the disk as a shell; compare its radii with sqrt(2) r
r = math.sqrt(volume(disk) / math.pi)
radii = np.linalg.norm(res.target_set.centers() - disk.centroid(), axis=1)
print(f"inner {radii.min():.3f}  outer {radii.max():.3f}  sqrt(2) r = {math.sqrt(2) * r:.3f}")

# %%
# doubling the set: W_p grows like 2^(1 + d/p)
for p in (1.0, 2.0):
    w1 = wasserstein_functional(disk, p).value
    w2 = wasserstein_functional(rescale(disk, 2), p).value
    print(p, w2 / w1, 2 ** (1 + 2 / p))

# %%
rng = np.random.default_rng(1)
blob = random_blob(rng, 1 / 20, 20)
out = wasserstein_functional(blob, 1.0)
bound = c0(2) * volume(blob) ** 1.5
print("blob W_1", out.value, "bound", bound, "ratio", out.value / bound)

# %%
# PGM of the blob with its target, for any image viewer
both = blob | out.target_set
open("/tmp/blob_and_target.pgm", "w").write(to_pgm(both))
