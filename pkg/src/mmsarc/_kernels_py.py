"""Pure-Python versions of the compiled kernels in ``_kernels.pyx``.

Same operation order as the Cython code, so both backends produce
bit-identical doubles.
"""


def dcd_epoch(indptr, indices, data, y, alpha, w, sqnorm, order, C):
    """One pass of dual coordinate descent over ``order``; updates alpha, w in place.

    Returns the largest absolute change of any dual variable.
    """
    ptr = indptr.tolist()
    idx = indices.tolist()
    val = data.tolist()
    ys = y.tolist()
    al = alpha.tolist()
    ww = w.tolist()
    qs = sqnorm.tolist()
    max_change = 0.0
    for i in order.tolist():
        lo, hi = ptr[i], ptr[i + 1]
        g = 0.0
        for k in range(lo, hi):
            g = g + ww[idx[k]] * val[k]
        G = ys[i] * g - 1.0
        a = al[i]
        if a == 0.0:
            pg = G if G < 0.0 else 0.0
        elif a == C:
            pg = G if G > 0.0 else 0.0
        else:
            pg = G
        if abs(pg) > 1e-12:
            new = a - G / qs[i]
            if new < 0.0:
                new = 0.0
            elif new > C:
                new = C
            d = (new - a) * ys[i]
            al[i] = new
            for k in range(lo, hi):
                j = idx[k]
                ww[j] = ww[j] + d * val[k]
            change = abs(new - a)
            if change > max_change:
                max_change = change
    alpha[:] = al
    w[:] = ww
    return max_change


def csr_dot(indptr, indices, data, w, out):
    ptr = indptr.tolist()
    idx = indices.tolist()
    val = data.tolist()
    ww = w.tolist()
    for i in range(len(out)):
        s = 0.0
        for k in range(ptr[i], ptr[i + 1]):
            s = s + ww[idx[k]] * val[k]
        out[i] = s
