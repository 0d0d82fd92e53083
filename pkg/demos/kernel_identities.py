"""Numerical sanity of the fractional kernel calculus.

Walks through the identities the solver rests on: positivity and the
telescoping sum of the quadrature weights, the kernel semigroup property
checked by adaptive quadrature, and the discrete composition identities
(convolving the L1 derivative recovers u - u0; differentiating the
convolution recovers u).

Run:  python demos/kernel_identities.py
"""

import math

import numpy as np

from fracfisher.fractime import (caputo_l1_apply, check_sonine, conv_weights,
                                 discrete_convolution, graded_grid)

grid = graded_grid(N=256, gamma=2.0, T=5.0)

print("telescoping weight sums, graded grid (N=256, gamma=2, T=5):")
for alpha in (0.25, 0.5, 0.75):
    b = conv_weights(grid, alpha, grid.N)
    target = grid.T ** (1 - alpha) / math.gamma(2 - alpha)
    print(f"  alpha={alpha:4}: min weight {b.min():.3e}, "
          f"|sum - t_N^(1-a)/Gamma(2-a)| = {abs(b.sum() - target):.2e}")

print("\nkernel semigroup checks (quadrature vs closed form):")
for a, b_ in ((0.5, 0.5), (0.3, 0.4), (0.25, 0.5)):
    ok = check_sonine(a, b_, 2.0, tol=1e-8)
    print(f"  orders ({a}, {b_}) at t=2: {'pass' if ok else 'FAIL'}")
print(f"  negative control (wrong target 1.1): "
      f"{'rejected' if not check_sonine(0.5, 0.5, 1.0, 1e-6, target=1.1) else 'BUG'}")

print("\ndiscrete composition identities on u(t) = t^2, uniform N=2048:")
g = graded_grid(2048, 1.0, 1.0)
u = g.points ** 2
for alpha in (0.3, 0.5, 0.7):
    deriv = np.zeros(g.N)
    for k in range(1, g.N):
        deriv[k] = caputo_l1_apply(g, alpha, u[:k + 1])
    forward = discrete_convolution(g, 1.0 - alpha, deriv)
    conv = np.zeros(g.N + 1)
    for k in range(1, g.N + 1):
        conv[k] = discrete_convolution(g, 1.0 - alpha, u[:k])
    backward = caputo_l1_apply(g, alpha, conv)
    print(f"  alpha={alpha}: |conv(L1 u) - (u-u0)| = {abs(forward - 1.0):.2e},  "
          f"|L1(conv u) - u| = {abs(backward - 1.0):.2e}")
