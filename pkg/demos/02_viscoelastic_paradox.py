# %% [markdown]
# # Full Kelvin-Voigt damping versus a viscosity that vanishes at the tip
#
# With Psi = 1 everywhere the viscous balance closes without any crack term,
# so adding the crack energy c*t overshoots.  With the tip-vanishing profile
# the Griffith balance is the one that closes.

# %%
from pathlib import Path

from viscocrack import parse_config
from viscocrack.timestepper import run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
spec = parse_config(CONFIGS / "paradox.ini")
spec.h, spec.n = 0.1, 100
mesh = spec.build_mesh()
ct = spec.c * spec.T

# %%
for profile in ("tip_vanishing", "constant"):
    led = run(spec.sim_config(mesh, profile=profile)).ledger
    print(f"{profile:14s} residual_kv/E0 = {led.residual_kv[-1] / led.E0:+.4f}   "
          f"residual_griffith/(cT) = {led.residual_griffith[-1] / ct:+.4f}")

# %% [markdown]
# Expected picture: for Psi = 1 the second ratio is close to 1 (the crack
# energy is unaccounted for).  For the tip-vanishing profile the second ratio
# shrinks under refinement (about 0.27 here, 0.05 at h = 0.025) and the first
# one moves toward -cT/E0.
