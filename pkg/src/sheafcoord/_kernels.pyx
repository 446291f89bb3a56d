# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels over the flat block layout (see core._Layout).

Hot loops only: coboundary apply, transpose apply, Laplacian apply, and a
chunked explicit-Euler driver for the linear heat flow.  The pure-python
module _kernels_py mirrors these signatures exactly.
"""

from libc.math cimport fabs

NAME = "compiled"


cdef inline void _cob(const double[::1] x, double[::1] y,
                      const long[::1] tails, const long[::1] heads,
                      const long[::1] voff, const long[::1] eoff,
                      const long[::1] vdims, const long[::1] edims,
                      const double[::1] rt, const double[::1] rh,
                      const long[::1] rtoff, const long[::1] rhoff) noexcept nogil:
    cdef Py_ssize_t e, r, c, t, h, nt, nh, me, xot, xoh, yo, rot, roh
    cdef double acc
    for e in range(tails.shape[0]):
        t = tails[e]; h = heads[e]
        nt = vdims[t]; nh = vdims[h]; me = edims[e]
        xot = voff[t]; xoh = voff[h]; yo = eoff[e]
        rot = rtoff[e]; roh = rhoff[e]
        for r in range(me):
            acc = 0.0
            for c in range(nt):
                acc += rt[rot + r * nt + c] * x[xot + c]
            for c in range(nh):
                acc -= rh[roh + r * nh + c] * x[xoh + c]
            y[yo + r] = acc


cdef inline void _cobt(const double[::1] y, double[::1] out,
                       const long[::1] tails, const long[::1] heads,
                       const long[::1] voff, const long[::1] eoff,
                       const long[::1] vdims, const long[::1] edims,
                       const double[::1] rt, const double[::1] rh,
                       const long[::1] rtoff, const long[::1] rhoff) noexcept nogil:
    cdef Py_ssize_t e, r, c, t, h, nt, nh, me, xot, xoh, yo, rot, roh
    cdef double ye
    for c in range(out.shape[0]):
        out[c] = 0.0
    for e in range(tails.shape[0]):
        t = tails[e]; h = heads[e]
        nt = vdims[t]; nh = vdims[h]; me = edims[e]
        xot = voff[t]; xoh = voff[h]; yo = eoff[e]
        rot = rtoff[e]; roh = rhoff[e]
        for r in range(me):
            ye = y[yo + r]
            for c in range(nt):
                out[xot + c] += rt[rot + r * nt + c] * ye
            for c in range(nh):
                out[xoh + c] -= rh[roh + r * nh + c] * ye


def cob_apply(double[::1] x, double[::1] y,
              long[::1] tails, long[::1] heads,
              long[::1] voff, long[::1] eoff,
              long[::1] vdims, long[::1] edims,
              double[::1] rt, double[::1] rh,
              long[::1] rtoff, long[::1] rhoff):
    with nogil:
        _cob(x, y, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)


def cobt_apply(double[::1] y, double[::1] out,
               long[::1] tails, long[::1] heads,
               long[::1] voff, long[::1] eoff,
               long[::1] vdims, long[::1] edims,
               double[::1] rt, double[::1] rh,
               long[::1] rtoff, long[::1] rhoff):
    with nogil:
        _cobt(y, out, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)


def lap_apply(double[::1] x, double[::1] scratch, double[::1] out,
              long[::1] tails, long[::1] heads,
              long[::1] voff, long[::1] eoff,
              long[::1] vdims, long[::1] edims,
              double[::1] rt, double[::1] rh,
              long[::1] rtoff, long[::1] rhoff):
    with nogil:
        _cob(x, scratch, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)
        _cobt(scratch, out, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)


def euler_chunk(double[::1] x, double[::1] scratch, double[::1] grad,
                long[::1] tails, long[::1] heads,
                long[::1] voff, long[::1] eoff,
                long[::1] vdims, long[::1] edims,
                double[::1] rt, double[::1] rh,
                long[::1] rtoff, long[::1] rhoff,
                double eta, long steps, double tol):
    """Run up to `steps` Euler steps x <- x - eta*L x in place.

    Stops early when the inf-norm of an applied step drops below tol
    (tol <= 0 disables early stopping).  Returns (steps_done, last_delta).
    """
    cdef Py_ssize_t s, i, done = 0
    cdef double delta = 0.0, a, st
    with nogil:
        for s in range(steps):
            _cob(x, scratch, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)
            _cobt(scratch, grad, tails, heads, voff, eoff, vdims, edims, rt, rh, rtoff, rhoff)
            delta = 0.0
            for i in range(x.shape[0]):
                st = eta * grad[i]
                x[i] -= st
                a = fabs(st)
                if a > delta:
                    delta = a
            done += 1
            if tol > 0.0 and delta < tol:
                break
    return done, delta
