"""A tour of the basis on the ordered simplex.

Checks, for d = 3, that each coordinate family is orthonormal against its
marginal measure, that families of different coordinates correlate only at
equal degree, and that the degree-k correlation matrix has the predicted
smallest eigenvalue.
"""
import numpy as np

from aese.basis import basis_family, correlation_matrix, mixed_scalar_product
from aese.quadrature import MarginalMeasure, default_grid

d = 3
grid = default_grid()

for i in range(1, d + 1):
    q = MarginalMeasure(d, i).density(grid.nodes)
    tab = basis_family(d, i, 6).table(grid.nodes)
    gram = tab.T @ ((grid.weights * q)[:, None] * tab)
    print(f"coordinate {i}: max |Gram - I| = {np.max(np.abs(gram - np.eye(7))):.1e}")

print("\nmixed products <phi_1k, phi_3l> (zero off the diagonal):")
for k in range(4):
    print("  ", "  ".join(f"{mixed_scalar_product(d, 1, 3, k, l):.4f}" for l in range(4)))

print("\nsmallest eigenvalue of R_k against k/(k+d-1):")
for k in (1, 2, 5, 20):
    r = correlation_matrix(d, k)
    print(f"  k={k:2d}  {r.min_eigenvalue:.12f}  {k / (k + d - 1):.12f}")
