"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both functions index the output by the lattice offset ``k`` between the
prior node ``i`` and the estimate node ``j``:

* periodic: ``k = (j - i) mod n``
* open line: ``k = j - i + (nx - 1)``
"""

import numpy as np


def band_sum(q, resp, periodic):
    q = np.ascontiguousarray(q, dtype=np.float64)
    resp = np.ascontiguousarray(resp, dtype=np.float64)
    nx, nz = resp.shape
    if q.shape[0] != nx:
        raise ValueError("q and response rows differ in length")
    if periodic:
        if nx != nz:
            raise ValueError("periodic band sum needs a square response")
        out = np.zeros(nx)
        for i in np.flatnonzero(q):
            out += q[i] * np.roll(resp[i], -i)
        return out
    out = np.zeros(nx + nz - 1)
    for i in np.flatnonzero(q):
        off = nx - 1 - i
        out[off:off + nz] += q[i] * resp[i]
    return out


def correlate(q, prof, periodic):
    q = np.ascontiguousarray(q, dtype=np.float64)
    prof = np.ascontiguousarray(prof, dtype=np.float64)
    nx = q.shape[0]
    nz = prof.shape[0]
    if periodic:
        if nx != nz:
            raise ValueError("periodic correlation needs equal lengths")
        out = np.zeros_like(prof)
        for i in np.flatnonzero(q):
            out += q[i] * np.roll(prof, -i, axis=0)
        return out
    out = np.zeros((nx + nz - 1, prof.shape[1]))
    for i in np.flatnonzero(q):
        off = nx - 1 - i
        out[off:off + nz] += q[i] * prof
    return out
