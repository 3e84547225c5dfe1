"""
From a floating-point scan to an orbit proof
============================================

The explorer finds approximate orthogonal crossings of the x axis; the
validated half map then turns one of them into an existence proof.  The
scan takes a few seconds, the proof a few more.

Run with ``python3 notebooks/02_orbit_probe.py``.
"""

# %%
import numpy as np

from pcr3bp.explorer import f_scan, orbit_trace
from pcr3bp.orbits import OrbitClaim, prove

h = 0.3
xs, ys, changes = f_scan(h, n=200)
print(f"f(x) on {len(xs)} samples at h={h}")
for c in changes:
    print(f"  {c.kind:<5} near x = {c.x:+.5f}")

# %%
# Pick the crossing left of the small primary, round it the way a table
# would and put a probe of half width 5e-4 around it.
root = min(changes, key=lambda c: abs(c.x + 0.43))
centre = f"{root.x:.4f}"
claim = OrbitClaim("S2", ".3", centre)
print("probe", claim.endpoints)

# %%
rep = prove(claim)
print(rep.line())

# %%
# A float trace of the orbit: after two half transits it is back where it
# started, up to the rounding of the probe centre.
tr = orbit_trace(root.x, h)
print("start", tr[0, 1:3], "end", tr[-1, 1:3])
print("max distance from the origin", np.hypot(tr[:, 1], tr[:, 3]).max())
