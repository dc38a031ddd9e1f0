# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled thinning kernels.

Both kernels draw uniforms from the numpy ``bitgen_t`` interface and follow
the operation order of :mod:`critical_hawkes.engine._pure` exactly, so the
two backends produce bit-identical paths for the same generator state.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport exp, expm1, floor, log1p, isfinite, INFINITY
from libc.stdlib cimport malloc, free
from numpy.random cimport bitgen_t

cdef enum:
    STATUS_OK = 0
    STATUS_BUDGET = 1
    STATUS_NONFINITE = 2


cdef inline double f_eval(int kind, double p, double s, double x) noexcept nogil:
    if not (x > 0.0):
        return 0.0
    if kind == 0:
        return p * s * (-expm1(-x / s))
    return p * x


cdef inline double dmax(double a, double b) noexcept nogil:
    return a if a >= b else b


cdef bitgen_t* _bitgen(object bit_generator) except NULL:
    capsule = bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


def run_grouped(object bit_generator, int kind, double p, double s,
                double[::1] c_pp, double[::1] c_pm, double[::1] c_mp, double[::1] c_mm,
                double[::1] counts, long long[::1] offsets,
                double alpha, double inv_n, double m_plus0, double m_minus0,
                double b_plus, double b_minus, double t_end, double window,
                double[::1] grid, double[::1] out_mp, double[::1] out_mm,
                long long[::1] out_cp, long long[::1] out_cm,
                double[::1] ev_t, unsigned int[::1] ev_agent, unsigned char[::1] ev_sign,
                long long budget):
    """Thinning loop for populations made of groups of identical agents.

    Returns ``(status, n_events, n_proposals, n_candidates, t_stop)``.
    """
    cdef bitgen_t* rng = _bitgen(bit_generator)
    cdef Py_ssize_t n_groups = counts.shape[0]
    cdef Py_ssize_t n_grid = grid.shape[0]
    cdef Py_ssize_t ev_cap = ev_t.shape[0]
    cdef Py_ssize_t gi = 0, k
    cdef double qp = b_plus / alpha
    cdef double qm = b_minus / alpha
    cdef double t = 0.0, mp = m_plus0, mm = m_minus0
    cdef double w_end, up, um, lam_bar, u, cand, decay, x, cum, w = 0.0, frac
    cdef double fp, fm
    cdef long long cp = 0, cm = 0, n_events = 0, n_cand = 0, n_prop = 0
    cdef long long agent, cnt
    cdef int status = STATUS_OK, sign = 0, found

    with bit_generator.lock, nogil:
        while True:
            w_end = t + window
            if w_end > t_end:
                w_end = t_end
            up = dmax(mp, qp)
            um = dmax(mm, qm)
            lam_bar = 0.0
            for k in range(n_groups):
                lam_bar += counts[k] * f_eval(kind, p, s, c_pp[k] * up + c_pm[k] * um)
                lam_bar += counts[k] * f_eval(kind, p, s, c_mp[k] * up + c_mm[k] * um)
            if not isfinite(lam_bar):
                status = STATUS_NONFINITE
                break
            n_prop += 1
            if lam_bar > 0.0:
                u = rng.next_double(rng.state)
                cand = t + (-log1p(-u) / lam_bar)
            else:
                cand = INFINITY
            if cand >= w_end:
                while gi < n_grid and grid[gi] <= w_end:
                    decay = exp(-alpha * (grid[gi] - t))
                    out_mp[gi] = (mp - qp) * decay + qp
                    out_mm[gi] = (mm - qm) * decay + qm
                    out_cp[gi] = cp
                    out_cm[gi] = cm
                    gi += 1
                decay = exp(-alpha * (w_end - t))
                mp = (mp - qp) * decay + qp
                mm = (mm - qm) * decay + qm
                t = w_end
                if t >= t_end:
                    break
                continue
            while gi < n_grid and grid[gi] <= cand:
                decay = exp(-alpha * (grid[gi] - t))
                out_mp[gi] = (mp - qp) * decay + qp
                out_mm[gi] = (mm - qm) * decay + qm
                out_cp[gi] = cp
                out_cm[gi] = cm
                gi += 1
            decay = exp(-alpha * (cand - t))
            mp = (mp - qp) * decay + qp
            mm = (mm - qm) * decay + qm
            t = cand
            n_cand += 1
            x = rng.next_double(rng.state) * lam_bar
            cum = 0.0
            found = 0
            for k in range(n_groups):
                fp = counts[k] * f_eval(kind, p, s, c_pp[k] * mp + c_pm[k] * mm)
                if x < cum + fp:
                    found = 1
                    sign = 0
                    w = fp
                    break
                cum = cum + fp
                fm = counts[k] * f_eval(kind, p, s, c_mp[k] * mp + c_mm[k] * mm)
                if x < cum + fm:
                    found = 1
                    sign = 1
                    w = fm
                    break
                cum = cum + fm
            if not found:
                continue
            frac = (x - cum) / w
            cnt = <long long> counts[k]
            agent = <long long> floor(frac * counts[k])
            if agent >= cnt:
                agent = cnt - 1
            agent = agent + offsets[k]
            if sign == 0:
                mp = mp + inv_n
                cp += 1
            else:
                mm = mm + inv_n
                cm += 1
            if n_events < ev_cap:
                ev_t[n_events] = t
                ev_agent[n_events] = <unsigned int> agent
                ev_sign[n_events] = <unsigned char> sign
            n_events += 1
            if n_events > budget:
                status = STATUS_BUDGET
                break
    return status, n_events, n_prop, n_cand, t


cdef inline void fen_add(double* tree, Py_ssize_t n, Py_ssize_t i, double v) noexcept nogil:
    i += 1
    while i <= n:
        tree[i] += v
        i += i & (-i)


cdef inline void fen_build(double* tree, double* vals, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j
    tree[0] = 0.0
    for i in range(1, n + 1):
        tree[i] = vals[i - 1]
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


cdef inline Py_ssize_t fen_search(double* tree, Py_ssize_t n, Py_ssize_t top, double r) noexcept nogil:
    # Smallest index whose prefix sum exceeds r, clamped to n - 1.
    cdef Py_ssize_t pos = 0, step = top
    while step > 0:
        if pos + step <= n and tree[pos + step] <= r:
            pos += step
            r -= tree[pos]
        step >>= 1
    if pos >= n:
        pos = n - 1
    return pos


def run_self_exciting(object bit_generator, int kind, double p, double s,
                      double beta, double gamma, double kappa_eff,
                      double alpha, long long n_agents,
                      double a_plus, double a_minus, double b_plus, double b_minus,
                      double t_end, double window, double renorm_exponent,
                      double[::1] grid, double[::1] out_mp, double[::1] out_mm,
                      long long[::1] out_cp, long long[::1] out_cm,
                      double[::1] ev_t, unsigned int[::1] ev_agent, unsigned char[::1] ev_sign,
                      long long budget, double[::1] j_plus, double[::1] j_minus):
    """Thinning loop with per-agent memory and self-excitation.

    ``X_i(t) = xdet(t) + exp(-alpha (t - t_ref)) J_i`` where ``xdet`` is the
    jump-free flow shared by all agents; Fenwick trees over ``J`` give
    ``O(log N)`` agent selection.  ``j_plus``/``j_minus`` receive the final
    ``J`` values and ``t_ref`` is returned so callers can rebuild ``X``.

    Returns ``(status, n_events, n_proposals, n_candidates, t_stop, t_ref)``.
    """
    cdef bitgen_t* rng = _bitgen(bit_generator)
    cdef Py_ssize_t n = n_agents
    cdef Py_ssize_t n_grid = grid.shape[0]
    cdef Py_ssize_t ev_cap = ev_t.shape[0]
    cdef Py_ssize_t gi = 0, i, top = 1, comp
    cdef double nd = <double> n_agents
    cdef double inv_n = 1.0 / nd
    cdef double qp = b_plus / alpha
    cdef double qm = b_minus / alpha
    cdef double bg = beta * gamma
    cdef double cmm = 1.0 + (beta - 1.0) * gamma
    cdef double lip = p * kappa_eff
    cdef double t = 0.0, t_ref = 0.0, sp = 0.0, sm = 0.0
    cdef double e0, e, xdp, xdm, xhp, xhm, mp, mm, ubp, ubm, fbp, fbm
    cdef double w1, w2, w3, w4, w5, w6, lam_bar, u, cand, w_end, x, r, bnd, lam, xp, xm, arg, inc
    cdef long long cp = 0, cm = 0, n_events = 0, n_cand = 0, n_prop = 0
    cdef int status = STATUS_OK, sign
    cdef double* tp = <double*> malloc((n + 1) * sizeof(double))
    cdef double* tm = <double*> malloc((n + 1) * sizeof(double))
    cdef double* jp = &j_plus[0]
    cdef double* jm = &j_minus[0]
    if tp == NULL or tm == NULL:
        free(tp)
        free(tm)
        raise MemoryError()
    while top * 2 <= n:
        top *= 2
    for i in range(n):
        jp[i] = 0.0
        jm[i] = 0.0
    fen_build(tp, jp, n)
    fen_build(tm, jm, n)

    try:
        with bit_generator.lock, nogil:
            while True:
                if alpha * (t - t_ref) > renorm_exponent:
                    e = exp(-alpha * (t - t_ref))
                    for i in range(n):
                        jp[i] = jp[i] * e
                        jm[i] = jm[i] * e
                    sp = sp * e
                    sm = sm * e
                    fen_build(tp, jp, n)
                    fen_build(tm, jm, n)
                    t_ref = t
                w_end = t + window
                if w_end > t_end:
                    w_end = t_end
                e0 = exp(-alpha * (t - t_ref))
                e = exp(-alpha * t)
                xdp = (a_plus - qp) * e + qp
                xdm = (a_minus - qm) * e + qm
                xhp = dmax(xdp, qp)
                xhm = dmax(xdm, qm)
                mp = xdp + e0 * sp * inv_n
                mm = xdm + e0 * sm * inv_n
                ubp = dmax(mp, qp)
                ubm = dmax(mm, qm)
                fbp = f_eval(kind, p, s, ubp + bg * ubm)
                fbm = f_eval(kind, p, s, gamma * ubp + cmm * ubm)
                w1 = nd * (fbp + lip * (xhp + bg * xhm))
                w2 = lip * e0 * sp
                w3 = lip * bg * e0 * sm
                w4 = nd * (fbm + lip * (gamma * xhp + cmm * xhm))
                w5 = lip * gamma * e0 * sp
                w6 = lip * cmm * e0 * sm
                lam_bar = w1 + w2 + w3 + w4 + w5 + w6
                if not isfinite(lam_bar):
                    status = STATUS_NONFINITE
                    break
                n_prop += 1
                if lam_bar > 0.0:
                    u = rng.next_double(rng.state)
                    cand = t + (-log1p(-u) / lam_bar)
                else:
                    cand = INFINITY
                if cand >= w_end:
                    while gi < n_grid and grid[gi] <= w_end:
                        e = exp(-alpha * grid[gi])
                        out_mp[gi] = (a_plus - qp) * e + qp + exp(-alpha * (grid[gi] - t_ref)) * sp * inv_n
                        out_mm[gi] = (a_minus - qm) * e + qm + exp(-alpha * (grid[gi] - t_ref)) * sm * inv_n
                        out_cp[gi] = cp
                        out_cm[gi] = cm
                        gi += 1
                    t = w_end
                    if t >= t_end:
                        break
                    continue
                while gi < n_grid and grid[gi] <= cand:
                    e = exp(-alpha * grid[gi])
                    out_mp[gi] = (a_plus - qp) * e + qp + exp(-alpha * (grid[gi] - t_ref)) * sp * inv_n
                    out_mm[gi] = (a_minus - qm) * e + qm + exp(-alpha * (grid[gi] - t_ref)) * sm * inv_n
                    out_cp[gi] = cp
                    out_cm[gi] = cm
                    gi += 1
                t = cand
                n_cand += 1
                x = rng.next_double(rng.state) * lam_bar
                # Mixture component: uniform / J+ / J- part of the buy and sell majorants.
                if x < w1:
                    comp = 0
                    r = x / w1
                elif x < w1 + w2:
                    comp = 1
                    r = (x - w1) / w2
                elif x < w1 + w2 + w3:
                    comp = 2
                    r = (x - (w1 + w2)) / w3
                elif x < w1 + w2 + w3 + w4:
                    comp = 3
                    r = (x - (w1 + w2 + w3)) / w4
                elif x < w1 + w2 + w3 + w4 + w5:
                    comp = 4
                    r = (x - (w1 + w2 + w3 + w4)) / w5
                elif w6 > 0.0:
                    comp = 5
                    r = (x - (w1 + w2 + w3 + w4 + w5)) / w6
                    if r >= 1.0:
                        r = 0.9999999999999999
                else:
                    continue
                if comp == 0 or comp == 3:
                    i = <Py_ssize_t> floor(r * nd)
                    if i >= n:
                        i = n - 1
                elif comp == 1 or comp == 4:
                    i = fen_search(tp, n, top, r * sp)
                else:
                    i = fen_search(tm, n, top, r * sm)
                sign = 0 if comp < 3 else 1
                if sign == 0:
                    bnd = fbp + lip * ((xhp + bg * xhm) + e0 * (jp[i] + bg * jm[i]))
                else:
                    bnd = fbm + lip * ((gamma * xhp + cmm * xhm) + e0 * (gamma * jp[i] + cmm * jm[i]))
                e0 = exp(-alpha * (t - t_ref))
                e = exp(-alpha * t)
                xdp = (a_plus - qp) * e + qp
                xdm = (a_minus - qm) * e + qm
                mp = xdp + e0 * sp * inv_n
                mm = xdm + e0 * sm * inv_n
                xp = xdp + e0 * jp[i]
                xm = xdm + e0 * jm[i]
                if sign == 0:
                    arg = (mp + kappa_eff * xp) + bg * (mm + kappa_eff * xm)
                else:
                    arg = gamma * (mp + kappa_eff * xp) + cmm * (mm + kappa_eff * xm)
                lam = f_eval(kind, p, s, arg)
                u = rng.next_double(rng.state)
                if not (u * bnd < lam):
                    continue
                inc = 1.0 / e0
                if sign == 0:
                    jp[i] = jp[i] + inc
                    sp = sp + inc
                    fen_add(tp, n, i, inc)
                    cp += 1
                else:
                    jm[i] = jm[i] + inc
                    sm = sm + inc
                    fen_add(tm, n, i, inc)
                    cm += 1
                if n_events < ev_cap:
                    ev_t[n_events] = t
                    ev_agent[n_events] = <unsigned int> i
                    ev_sign[n_events] = <unsigned char> sign
                n_events += 1
                if n_events > budget:
                    status = STATUS_BUDGET
                    break
    finally:
        free(tp)
        free(tm)
    return status, n_events, n_prop, n_cand, t, t_ref
