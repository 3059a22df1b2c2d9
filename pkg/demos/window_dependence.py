"""Fitted decay orders depend on the window at desk scale.

The Gabor matrix of a metaplectic operator decays faster than any polynomial
for every Schwartz window, but the *fitted* order over a finite annulus does
not.  The Hermite-4 window's envelope carries a degree-8 Laguerre factor whose
zeros fall inside the fit range, so its log-log slope is far shallower than
the Gaussian one even though both windows define the same class.
"""

import numpy as np

from mpk.fio import decay_profile, gabor_matrix, metaplectic
from mpk.lattice import gaussian_window, hermite_window, make_grid
from mpk.symplectic import admissible_symplectic, validate_symplectic

grid = make_grid(1, 128, lattice_stride=(4, 4))
mats = [validate_symplectic(np.eye(2))] + admissible_symplectic(np.random.default_rng(4), 4)
windows = {"gaussian": gaussian_window(grid), "hermite4": hermite_window(grid, 4)}

print(f"{'matrix':>30}  " + "  ".join(f"{k:>9}" for k in windows))
for S in mats:
    U = metaplectic(grid, S)
    orders = [decay_profile(gabor_matrix(U, g, grid, name), S.matrix).n_fit for name, g in windows.items()]
    print(f"{np.array2string(S.matrix.ravel(), precision=2):>30}  " + "  ".join(f"{n:9.2f}" for n in orders))

# envelope of the identity along the x axis: zeros of the Laguerre factor
K = gabor_matrix(np.eye(grid.N), windows["hermite4"], grid, "hermite4").values
zero = np.flatnonzero(np.all(grid.points == 0, axis=1))[0]
ax = [i for i, p in enumerate(grid.points) if p[1] == 0 and p[0] >= 0]
print("Hermite-4 |K| along u = (x, 0):", np.array2string(np.abs(K[ax, zero])[:8], precision=3))
