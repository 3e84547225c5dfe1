"""
Checking a covering relation
============================

First a toy: two unit squares and an affine map, where the answer is
obvious.  Then the real thing, ``K0 ->H1 L3`` at energy 0.3, with the
validated half map (about two minutes on one core).

Run with ``python3 notebooks/03_covering_relation.py``.
"""

# %%
import math

from pcr3bp.tsets import AffineMaps, CoveringClaim, CoveringPolicy, TSet, ValidatedMaps, check_relation, load_catalog
from pcr3bp.orbits import default_options

squares = {
    "A": TSet("A", (0.0, 0.0), (1.0, 1.0), (0.0, math.pi / 2), 1, "u"),
    "B": TSet("B", (0.0, 0.0), (1.0, 1.0), (0.0, math.pi / 2), -1, "u"),
}
toy = CoveringPolicy(segments=8, max_segments=64)

# stretch along the exit direction, squeeze across it
v = check_relation(CoveringClaim("A", "B", "H1"), AffineMaps([[3, 0], [0, 0.5]], [0, 0]), squares, toy)
print(v.line())
# the other way round: the image is too thin to reach the side edges
v = check_relation(CoveringClaim("A", "B", "H1"), AffineMaps([[0.5, 0], [0, 3]], [0, 0]), squares, toy)
print(v.line())

# %%
# The catalog entries are parallelograms on the section y = 0.
cat = load_catalog()
for name in ("K0", "L3"):
    t = cat[name]
    print(name, "centre", t.center, "exit along", t.exit_axis, "branch", t.branch)

# %%
maps = ValidatedMaps("0.3", default_options())
v = check_relation(CoveringClaim.parse("K0:H1:L3"), maps, cat, CoveringPolicy(segments=200),
                   log=print)
print(v.line())
