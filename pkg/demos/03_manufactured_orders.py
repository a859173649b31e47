# %% [markdown]
# # Convergence orders on a smooth problem
#
# u = sin(pi x1) sin(pi x2) cos t on the uncracked square with Psi = 1.
# Spatial study: h halved and n quadrupled.  Temporal study: fixed mesh,
# n doubled, compared with a much finer run in time.

# %%
from pathlib import Path

from viscocrack import parse_config
from viscocrack.scenarios import manufactured_study

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
spec = parse_config(CONFIGS / "manufactured_smooth.ini")

# %%
sp = manufactured_study(spec, spatial=True)
for h, n, e in zip(sp["h"], sp["n"], sp["l2"]):
    print(f"h={h:<7g} n={n:<4d} L2 error={e:.3e}")
print("spatial rates:", [round(r, 2) for r in sp["rates"]])

# %%
tm = manufactured_study(spec, spatial=False)
for n, e in zip(tm["n"], tm["l2"]):
    print(f"n={n:<4d} distance to reference={e:.3e}")
print("temporal rates:", [round(r, 2) for r in tm["rates"]])
