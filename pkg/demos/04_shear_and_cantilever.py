"""Two validation loads: simple shear of a stripe and an end-loaded cantilever.

Run:  python3 demos/04_shear_and_cantilever.py

Both are normalized by closed-form macro answers, so 1 means "behaves like
the homogenized medium".  The resolved rows show the real structure; the
relaxed micromorphic rows show how Lc moves between the macro and micro
limits.  For the cantilever, coupling on the whole free boundary builds a
thin layer near the edges, and the default mesh grades its rows there.
"""

from relaxmm.experiments import (
    CELL_L,
    SLENDERNESS,
    cantilever_resolved,
    cantilever_rmm,
    rmm_material,
    shear_resolved,
    shear_rmm,
    t_macro,
    w_macro,
)
from relaxmm.identify import default_parameters

p = default_parameters()
c = p.C_macro
H = 2 * CELL_L
L = SLENDERNESS * H

print("shear force T / T_macro")
for n in (1, 2):
    T, Ln = shear_resolved(n)
    print(f"  resolved n = {n}: {T / t_macro(c, 1e-3, Ln):.4f}")
for f in (1e-3, 1.0, 1e2, 1e3):
    T = shear_rmm(rmm_material(p, "beta-scaled", f * CELL_L))
    print(f"  RMM Lc = {f:g} l: {T / t_macro(c, 1e-3, L):.4f}")

print("\ncantilever w_macro(0) / w(0)")
for n in (1, 2):
    w = cantilever_resolved(n)
    print(f"  resolved n = {n}: {w_macro(c, 1e9, n * CELL_L, SLENDERNESS * n * CELL_L) / w:.4f}")
for f in (1e-3, 1.0, 1e2):
    mat = rmm_material(p, "beta-scaled", f * CELL_L)
    whole = w_macro(c, 1e9, H, L) / cantilever_rmm(mat)[0]
    part = w_macro(c, 1e9, H, L) / cantilever_rmm(mat, "cc-partial-y")[0]
    print(f"  RMM Lc = {f:g} l: whole boundary {whole:.4f}, y-component only {part:.4f}")
