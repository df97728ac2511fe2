"""Pure-Python fallback for the dual coordinate descent sweep.

Same update rule and visit order as the compiled kernel in _dcd.pyx; used
when the extension is unavailable or SUMAUG_PURE_PYTHON is set.
"""

import numpy as np

BACKEND = "python"


def sweep(values, col_idx, indptr, y, diag, inv_2c, alpha, w, perm):
    """One pass over coordinates in `perm`; returns the max |projected gradient|.

    Updates alpha and w in place, maintaining w = sum_i alpha_i y_i x_i.
    """
    max_viol = 0.0
    for i in perm:
        lo = indptr[i]
        hi = indptr[i + 1]
        idx = col_idx[lo:hi]
        vals = values[lo:hi]
        g = y[i] * float(np.dot(w[idx], vals)) - 1.0 + alpha[i] * inv_2c
        if alpha[i] == 0.0 and g > 0.0:
            pg = 0.0
        else:
            pg = g
        if -pg > max_viol:
            max_viol = -pg
        elif pg > max_viol:
            max_viol = pg
        if pg != 0.0:
            new_alpha = alpha[i] - g / diag[i]
            if new_alpha < 0.0:
                new_alpha = 0.0
            delta = (new_alpha - alpha[i]) * y[i]
            if delta != 0.0:
                w[idx] += delta * vals
            alpha[i] = new_alpha
    return max_viol
