# %% [markdown]
# # d = 1: how many intervals?
# Equal intervals give T_k = 2k + m^2/(2k) for p = 1, so the best k grows
# with m.  Annealing should land on the same count.

# %%
from ptlab.search import AnnealConfig, equal_intervals_oracle, sweep

for m in (0.5, 1, 2, 4, 8):
    rows, k = equal_intervals_oracle(m, 1.0, 8, 1 / 200)
    print(m, k, [round(r.T, 3) for r in rows[:4]])

# %%
cfg = AnnealConfig(p=1.0, d=1, h=1 / 200, moves_per_temp=10_000, temp_initial=0.5,
                   temp_decay=0.95, max_temps=80, w_recompute_period=10_000)
recs = sweep([1.0, 4.0], 1.0, 1, cfg, restarts=2)
for r in recs:
    print(r.m, r.init, round(r.best_T, 4), "components", r.components)
