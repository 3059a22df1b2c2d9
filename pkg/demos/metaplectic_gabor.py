"""A metaplectic operator seen through its Gabor matrix.

Builds mu(S) for a shear, shows that its Gabor matrix concentrates on the
graph w = S z, fits the off-graph decay and reads the symplectic map back
off the matrix.  Writes a log-magnitude heatmap next to this script.
"""

from pathlib import Path

import numpy as np

from mpk.fio import decay_profile, gabor_matrix, metaplectic, recover_flow
from mpk.io import write_pgm
from mpk.lattice import make_grid
from mpk.symplectic import generator_factorization, validate_symplectic

grid = make_grid(1, 64, lattice_stride=(2, 2))
S = validate_symplectic(np.array([[1.0, 0.5], [0.0, 1.0]]))

word = generator_factorization(S)
print("generator word:", " ".join(f"{a.kind}({np.round(a.param, 3)})" for a in word.atoms))

U = metaplectic(grid, S).matrix
print("unitarity defect:", np.abs(U.conj().T @ U - np.eye(grid.N)).max())

K = gabor_matrix(U, None, grid)
rep = decay_profile(K, S.matrix)
print(f"decay order off the graph: {rep.n_fit:.2f}")
print("energy within r cells of w = S z:", {r: round(v, 4) for r, v in rep.graph_mass.items()})

M, res = recover_flow(K)
print("recovered map:\n", np.round(M, 6))
print("symplectic residual of the estimate:", res)

out = write_pgm(Path(__file__).with_name("shear_gabor.pgm"), K.values)
print("heatmap:", out)
