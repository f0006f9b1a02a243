# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: explicit stencil steps, batched tridiagonal solves, RK4 shooting.

Signatures mirror frontlab._pykernels exactly; frontlab._backend picks one at import.
Boundary kinds: 0 Dirichlet (ghost = value), 1 zero-Neumann (mirror ghost),
2 symmetry axis r = 0 (regularized radial stencil).
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, floor, isnan

cnp.import_array()


cdef inline double react(int kind, const double* par, const double* tab, Py_ssize_t ntab,
                         double s) noexcept nogil:
    cdef double x, w, amp
    cdef Py_ssize_t i
    if s < 0.0 or s > 1.0:
        return 0.0
    if kind == 0:
        return par[0] * (s * (1.0 - s))
    elif kind == 1:
        return par[0] * (pow(s, par[1]) * (1.0 - s))
    elif kind == 2:
        if s > par[1]:
            return par[0] * ((s - par[1]) * (1.0 - s))
        return 0.0
    elif kind == 3:
        return par[0] * (s * (1.0 - s) * (s - par[1]))
    elif kind == 4:
        amp = par[4] if s < par[2] else par[5]
        return par[0] * (amp * s * (s - par[1]) * (s - par[2]) * (s - par[3]) * (1.0 - s))
    else:
        x = s * (ntab - 1)
        i = <Py_ssize_t>floor(x)
        if i >= ntab - 1:
            i = ntab - 2
        w = x - i
        return par[0] * (tab[i] * (1.0 - w) + tab[i + 1] * w)


cdef inline double logistic(double scale, double s) noexcept nogil:
    cdef double v = scale * (s * (1.0 - s))
    return v if (s >= 0.0) & (s <= 1.0) else 0.0


def react_array(int kind, double[::1] par, double[::1] tab, double[::1] s):
    cdef Py_ssize_t n = s.shape[0], i
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = react(kind, &par[0], &tab[0], tab.shape[0], s[i])
    return out


cdef inline void row_update(const double* a, double* b, Py_ssize_t n, double dt, double inv_h2,
                            double gl, double gr, const double* wm, const double* wp,
                            bint metric, int kind, const double* pp, const double* tp,
                            Py_ssize_t nt) noexcept nogil:
    # one forward-Euler update of a line; gl/gr are the ghost values beyond each end
    cdef Py_ssize_t j
    cdef double lap
    if n == 1:
        b[0] = a[0] + dt * (((gl + gr) - 2.0 * a[0]) * inv_h2 + react(kind, pp, tp, nt, a[0]))
        return
    if metric:
        lap = (wm[0] * gl + wp[0] * a[1]) - 2.0 * a[0]
        b[0] = a[0] + dt * (lap * inv_h2 + react(kind, pp, tp, nt, a[0]))
        for j in range(1, n - 1):
            lap = (wm[j] * a[j - 1] + wp[j] * a[j + 1]) - 2.0 * a[j]
            b[j] = a[j] + dt * (lap * inv_h2 + react(kind, pp, tp, nt, a[j]))
        lap = (wm[n - 1] * a[n - 2] + wp[n - 1] * gr) - 2.0 * a[n - 1]
    else:
        lap = (gl + a[1]) - 2.0 * a[0]
        b[0] = a[0] + dt * (lap * inv_h2 + react(kind, pp, tp, nt, a[0]))
        for j in range(1, n - 1):
            lap = (a[j - 1] + a[j + 1]) - 2.0 * a[j]
            b[j] = a[j] + dt * (lap * inv_h2 + react(kind, pp, tp, nt, a[j]))
        lap = (a[n - 2] + gr) - 2.0 * a[n - 1]
    b[n - 1] = a[n - 1] + dt * (lap * inv_h2 + react(kind, pp, tp, nt, a[n - 1]))


def metric_weights(Py_ssize_t n, double metric, long offset):
    """Weights (1 - m/2k, 1 + m/2k) of the radial stencil at absolute node k = offset + j."""
    wm = np.ones(n)
    wp = np.ones(n)
    cdef Py_ssize_t j
    cdef double rr
    if metric != 0.0:
        for j in range(n):
            rr = <double>(offset + j)
            if rr > 0:
                wm[j] = 1.0 - metric / (2.0 * rr)
                wp[j] = 1.0 + metric / (2.0 * rr)
    return wm, wp


def explicit_steps_1d(double[::1] u, long nsteps, double dt, double h, double metric,
                      long offset, int lo_kind, double lo_val, int hi_kind, double hi_val,
                      int kind, double[::1] par, double[::1] tab):
    """Advance u in place by nsteps forward-Euler steps. Returns 0, or 1 on NaN."""
    cdef Py_ssize_t n = u.shape[0], j
    cdef long k
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double gl, gr, u0
    cdef const double* pp = &par[0]
    cdef const double* tp = &tab[0]
    cdef Py_ssize_t nt = tab.shape[0]
    cdef int bad = 0
    cdef bint axis = lo_kind == 2
    cdef bint has_metric = metric != 0.0
    buf = np.empty(n)
    cdef double[::1] v = buf
    cdef double* a = &u[0]
    cdef double* b = &v[0]
    cdef double* tmp
    wm_arr, wp_arr = metric_weights(n, metric, offset)
    cdef double[::1] wm = wm_arr
    cdef double[::1] wp = wp_arr
    with nogil:
        for k in range(nsteps):
            u0 = a[0]
            gl = lo_val if lo_kind == 0 else a[1]
            gr = hi_val if hi_kind == 0 else a[n - 2]
            row_update(a, b, n, dt, inv_h2, gl, gr, &wm[0], &wp[0], has_metric,
                       kind, pp, tp, nt)
            if axis:
                b[0] = u0 + dt * (2.0 * (metric + 1.0) * (a[1] - u0) * inv_h2
                                  + react(kind, pp, tp, nt, u0))
            tmp = a
            a = b
            b = tmp
        if nsteps % 2 == 1:
            for j in range(n):
                u[j] = v[j]
        for j in range(n):
            if isnan(u[j]):
                bad = 1
    return bad


cdef inline void row2d(const double* ac, const double* am, const double* ap, double* bc,
                       Py_ssize_t n1, double dt, double i0, double i1, double wmi, double wpi,
                       double cpre, double gl, double gr, int kind, const double* pp,
                       const double* tp, Py_ssize_t nt) noexcept nogil:
    cdef Py_ssize_t j
    cdef double uc, l0, l1
    if n1 == 1:
        uc = ac[0]
        l1 = (gl + gr) - 2.0 * uc
        l0 = (wmi * am[0] + wpi * ap[0]) - cpre * uc
        bc[0] = uc + dt * ((l0 * i0 + l1 * i1) + react(kind, pp, tp, nt, uc))
        return
    uc = ac[0]
    l1 = (gl + ac[1]) - 2.0 * uc
    l0 = (wmi * am[0] + wpi * ap[0]) - cpre * uc
    bc[0] = uc + dt * ((l0 * i0 + l1 * i1) + react(kind, pp, tp, nt, uc))
    if kind == 0:
        # logistic fast path, same arithmetic as react()
        for j in range(1, n1 - 1):
            uc = ac[j]
            l1 = (ac[j - 1] + ac[j + 1]) - 2.0 * uc
            l0 = (wmi * am[j] + wpi * ap[j]) - cpre * uc
            bc[j] = uc + dt * ((l0 * i0 + l1 * i1) + logistic(pp[0], uc))
    else:
        for j in range(1, n1 - 1):
            uc = ac[j]
            l1 = (ac[j - 1] + ac[j + 1]) - 2.0 * uc
            l0 = (wmi * am[j] + wpi * ap[j]) - cpre * uc
            bc[j] = uc + dt * ((l0 * i0 + l1 * i1) + react(kind, pp, tp, nt, uc))
    j = n1 - 1
    uc = ac[j]
    l1 = (ac[j - 1] + gr) - 2.0 * uc
    l0 = (wmi * am[j] + wpi * ap[j]) - cpre * uc
    bc[j] = uc + dt * ((l0 * i0 + l1 * i1) + react(kind, pp, tp, nt, uc))


def explicit_steps_2d(double[:, ::1] u, long nsteps, double dt, double h0, double h1,
                      double metric0, long offset0, int[::1] bkind, double[::1] bval,
                      int kind, double[::1] par, double[::1] tab):
    """Forward-Euler steps on a 2D grid; axis 0 is x' (or r), axis 1 is x_N.

    bkind/bval are ordered (axis0 lo, axis0 hi, axis1 lo, axis1 hi).
    """
    cdef Py_ssize_t n0 = u.shape[0], n1 = u.shape[1], i, j
    cdef long k
    cdef double i0 = 1.0 / (h0 * h0), i1 = 1.0 / (h1 * h1)
    cdef double gl, gr, wmi, wpi, cpre
    cdef const double* pp = &par[0]
    cdef const double* tp = &tab[0]
    cdef Py_ssize_t nt = tab.shape[0]
    cdef int k0l = bkind[0], k0h = bkind[1], k1l = bkind[2], k1h = bkind[3]
    cdef double v1l = bval[2], v1h = bval[3]
    cdef int bad = 0
    buf = np.empty((n0, n1))
    lo_arr = np.full(n1, bval[0])
    hi_arr = np.full(n1, bval[1])
    cdef double[::1] lo_row = lo_arr
    cdef double[::1] hi_row = hi_arr
    cdef double[:, ::1] vb = buf
    cdef double* a = &u[0, 0]
    cdef double* b = &vb[0, 0]
    cdef double* tmp
    cdef const double* am
    cdef const double* ap
    cdef const double* ac
    wm_arr, wp_arr = metric_weights(n0, metric0, offset0)
    cdef double[::1] wm = wm_arr
    cdef double[::1] wp = wp_arr
    if n0 < 2:
        raise ValueError("explicit_steps_2d needs at least two rows")
    with nogil:
        for k in range(nsteps):
            for i in range(n0):
                ac = a + i * n1
                wmi = wm[i]
                wpi = wp[i]
                cpre = 2.0
                if i == 0:
                    if k0l == 2:
                        # symmetry axis: mirror ghost weighted so l0 = 2(m+1)(u1 - u0)
                        wmi = metric0 + 1.0
                        wpi = metric0 + 1.0
                        cpre = 2.0 * (metric0 + 1.0)
                        am = a + n1
                    elif k0l == 1:
                        am = a + n1
                    else:
                        am = &lo_row[0]
                else:
                    am = ac - n1
                if i == n0 - 1:
                    ap = ac - n1 if k0h == 1 else &hi_row[0]
                else:
                    ap = ac + n1
                gl = v1l if k1l == 0 else ac[1]
                gr = v1h if k1h == 0 else ac[n1 - 2]
                row2d(ac, am, ap, b + i * n1, n1, dt, i0, i1, wmi, wpi, cpre, gl, gr,
                      kind, pp, tp, nt)
            tmp = a
            a = b
            b = tmp
        if nsteps % 2 == 1:
            for i in range(n0):
                for j in range(n1):
                    u[i, j] = vb[i, j]
        for i in range(n0):
            for j in range(n1):
                if isnan(u[i, j]):
                    bad = 1
    return bad


def tridiag_solve_lines(double[:, ::1] u, double[::1] sub, double[::1] cprime,
                        double[::1] denom, double[::1] rhs_lo, double[::1] rhs_hi):
    """Solve the same pre-factored tridiagonal system along each row of u, in place.

    ``sub`` is the sub-diagonal, ``cprime``/``denom`` come from the Thomas forward sweep
    of the matrix; rhs_lo/rhs_hi are added to the first/last entry of each row.
    """
    cdef Py_ssize_t m = u.shape[0], n = u.shape[1], i, j
    cdef double prev
    with nogil:
        for i in range(m):
            u[i, 0] = (u[i, 0] + rhs_lo[i]) / denom[0]
            u[i, n - 1] = u[i, n - 1] + rhs_hi[i]
            prev = u[i, 0]
            for j in range(1, n):
                prev = (u[i, j] - sub[j] * prev) / denom[j]
                u[i, j] = prev
            for j in range(n - 2, -1, -1):
                u[i, j] = u[i, j] - cprime[j] * u[i, j + 1]
    return 0


def shoot_rk4(int kind, double[::1] par, double[::1] tab, double lo, double width,
              double c, double phi0, double psi0, double dz, long nmax,
              double[::1] rec_phi, double[::1] rec_psi):
    """RK4 for phi' = psi, psi' = -c psi - g(phi), g(s) = f(lo + width s)/width.

    Stops when phi < 0 (code -1) or psi >= 0 with phi > 0 (code +1); code 0 when nmax
    steps pass without event. Records states if rec arrays are nonempty.
    Returns (code, steps, phi, psi).
    """
    cdef const double* pp = &par[0]
    cdef const double* tp = &tab[0]
    cdef Py_ssize_t nt = tab.shape[0]
    cdef double p = phi0, q = psi0
    cdef double k1p, k1q, k2p, k2q, k3p, k3q, k4p, k4q, iw = 1.0 / width
    cdef long n
    cdef int code = 0
    cdef bint record = rec_phi.shape[0] > 0
    if record:
        rec_phi[0] = p
        rec_psi[0] = q
    with nogil:
        for n in range(1, nmax + 1):
            k1p = q
            k1q = -c * q - react(kind, pp, tp, nt, lo + width * p) * iw
            k2p = q + 0.5 * dz * k1q
            k2q = -c * k2p - react(kind, pp, tp, nt, lo + width * (p + 0.5 * dz * k1p)) * iw
            k3p = q + 0.5 * dz * k2q
            k3q = -c * k3p - react(kind, pp, tp, nt, lo + width * (p + 0.5 * dz * k2p)) * iw
            k4p = q + dz * k3q
            k4q = -c * k4p - react(kind, pp, tp, nt, lo + width * (p + dz * k3p)) * iw
            p = p + dz / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
            q = q + dz / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
            if record:
                rec_phi[n] = p
                rec_psi[n] = q
            if p < 0.0:
                code = -1
                break
            if q >= 0.0:
                code = 1
                break
    if code == 0:
        n = nmax
    return code, n, p, q
