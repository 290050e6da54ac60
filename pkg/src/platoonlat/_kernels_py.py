"""Pure-Python twin of the compiled integrator loop."""

import numpy as np


def affine_recursion(phi, g, x0, guard, watch=0):
    phi_rows = [list(map(float, row)) for row in np.asarray(phi)]
    g_rows = np.asarray(g, dtype=float).tolist()
    n = len(x0)
    out = np.zeros((len(g_rows) + 1, n))
    x = [float(v) for v in x0]
    out[0] = x
    if abs(x[watch]) > guard:
        return out, 0
    for k, gk in enumerate(g_rows):
        x = [gk[i] + sum(p * xj for p, xj in zip(phi_rows[i], x)) for i in range(n)]
        out[k + 1] = x
        if abs(x[watch]) > guard:
            return out, k + 1
    return out, -1
