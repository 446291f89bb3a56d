"""Pure-numpy fallback kernels (same signatures as the compiled module).

All arrays use the flat block layout from ``core._Layout``: x has length
sum(n_i), y has length sum(m_e), restriction data is concatenated row-major
per edge with offset tables rtoff/rhoff.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def _views(e, x, tails, heads, voff, vdims, rt, rh, rtoff, rhoff, edims):
    t, h = tails[e], heads[e]
    nt, nh, me = vdims[t], vdims[h], edims[e]
    Ft = rt[rtoff[e] : rtoff[e + 1]].reshape(me, nt)
    Fh = rh[rhoff[e] : rhoff[e + 1]].reshape(me, nh)
    xt = x[voff[t] : voff[t] + nt]
    xh = x[voff[h] : voff[h] + nh]
    return Ft, Fh, xt, xh


def cob_apply(x, y, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff):
    for e in range(len(tails)):
        Ft, Fh, xt, xh = _views(e, x, tails, heads, voff, vdims, rt, rh, rtoff, rhoff, edims)
        y[eoff[e] : eoff[e + 1]] = Ft @ xt - Fh @ xh


def cobt_apply(y, out, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff):
    out[:] = 0.0
    for e in range(len(tails)):
        t, h = tails[e], heads[e]
        nt, nh, me = vdims[t], vdims[h], edims[e]
        Ft = rt[rtoff[e] : rtoff[e + 1]].reshape(me, nt)
        Fh = rh[rhoff[e] : rhoff[e + 1]].reshape(me, nh)
        ye = y[eoff[e] : eoff[e + 1]]
        out[voff[t] : voff[t] + nt] += Ft.T @ ye
        out[voff[h] : voff[h] + nh] -= Fh.T @ ye


def lap_apply(x, scratch, out, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff):
    cob_apply(x, scratch, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)
    cobt_apply(scratch, out, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)


def _dense_cob(tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff, N, M):
    B = np.zeros((M, N))
    for e in range(len(tails)):
        t, h = tails[e], heads[e]
        nt, nh, me = vdims[t], vdims[h], edims[e]
        r0 = eoff[e]
        B[r0 : r0 + me, voff[t] : voff[t] + nt] += rt[rtoff[e] : rtoff[e + 1]].reshape(me, nt)
        B[r0 : r0 + me, voff[h] : voff[h] + nh] -= rh[rhoff[e] : rhoff[e + 1]].reshape(me, nh)
    return B


def euler_chunk(x, scratch, grad, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff, eta, steps, tol):
    """Run up to `steps` explicit-Euler steps x <- x - eta * (B^T B x) in place.

    Stops early once the inf-norm of an applied step falls below tol (tol <= 0
    disables early stopping).  Returns (steps_done, last_delta).
    """
    N, M = len(x), len(scratch)
    B = _dense_cob(tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff, N, M)
    done, delta = 0, 0.0
    for _ in range(steps):
        step = eta * (B.T @ (B @ x))
        x -= step
        delta = float(np.max(np.abs(step))) if N else 0.0
        done += 1
        if 0.0 < tol and delta < tol:
            break
    return done, delta
