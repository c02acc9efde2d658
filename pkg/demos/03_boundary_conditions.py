"""Where the consistent coupling is imposed decides whether a size effect appears.

Run:  python3 demos/03_boundary_conditions.py

With the coupling P.tau = grad(u).tau on both beam ends the curvature
energy is activated and the beam stiffens with Lc.  Imposing it on one end
only, or nowhere, lets P relax to a curl-free field and the response stays
at the macro value whatever Lc is.  Both exact elimination and the penalty
form are shown for the both-ends case.
"""

import numpy as np

from relaxmm.experiments import CELL_L, bending_rmm, d_macro, rmm_material
from relaxmm.identify import default_parameters

p = default_parameters()
ref = d_macro(p.C_macro, 2 * CELL_L)
lcs = np.array([1e-2, 1.0, 1e2]) * CELL_L

print(f"{'coupling':<16}" + "".join(f"{f'Lc={lc / CELL_L:g} l':>14}" for lc in lcs))
for bc in ("cc-both-ends", "cc-left-only", "cc-none"):
    vals = [bending_rmm(rmm_material(p, "beta-scaled", lc), bc=bc).D / ref for lc in lcs]
    print(f"{bc:<16}" + "".join(f"{v:14.5f}" for v in vals))
vals = [bending_rmm(rmm_material(p, "beta-scaled", lc), kappa1="auto").D / ref for lc in lcs]
print(f"{'both (penalty)':<16}" + "".join(f"{v:14.5f}" for v in vals))
