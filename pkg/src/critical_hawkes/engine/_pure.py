"""Pure-Python thinning kernels.

Line-by-line mirror of the compiled kernels: same uniform stream, same
floating-point operation order, hence bit-identical output.  Used when the
extension is unavailable and as the reference in backend-equivalence tests.
"""

from __future__ import annotations

import math

import numpy as np

STATUS_OK = 0
STATUS_BUDGET = 1
STATUS_NONFINITE = 2

_BLOCK = 4096


class _Uniforms:
    """Buffered ``next_double`` stream of a numpy bit generator."""

    __slots__ = ("_gen", "_buf", "_pos")

    def __init__(self, bit_generator):
        self._gen = np.random.Generator(bit_generator)
        self._buf = []
        self._pos = 0

    def __call__(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(_BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def _f(kind, p, s, x):
    if not (x > 0.0):
        return 0.0
    if kind == 0:
        return p * s * -math.expm1(-x / s)
    return p * x


def run_grouped(bit_generator, kind, p, s, c_pp, c_pm, c_mp, c_mm, counts, offsets,
                alpha, inv_n, m_plus0, m_minus0, b_plus, b_minus, t_end, window,
                grid, out_mp, out_mm, out_cp, out_cm, ev_t, ev_agent, ev_sign, budget):
    uniform = _Uniforms(bit_generator)
    exp, log1p, floor, isfinite = math.exp, math.log1p, math.floor, math.isfinite
    c_pp, c_pm, c_mp, c_mm = list(map(float, c_pp)), list(map(float, c_pm)), list(map(float, c_mp)), list(map(float, c_mm))
    counts = list(map(float, counts))
    offsets = list(map(int, offsets))
    grid = list(map(float, grid))
    groups = range(len(counts))
    n_grid = len(grid)
    ev_cap = len(ev_t)
    gi = 0
    qp = b_plus / alpha
    qm = b_minus / alpha
    t, mp, mm = 0.0, m_plus0, m_minus0
    cp = cm = n_events = n_cand = n_prop = 0
    status = STATUS_OK
    times, agents, signs = [], [], []

    while True:
        w_end = t + window
        if w_end > t_end:
            w_end = t_end
        up = mp if mp >= qp else qp
        um = mm if mm >= qm else qm
        lam_bar = 0.0
        for k in groups:
            lam_bar += counts[k] * _f(kind, p, s, c_pp[k] * up + c_pm[k] * um)
            lam_bar += counts[k] * _f(kind, p, s, c_mp[k] * up + c_mm[k] * um)
        if not isfinite(lam_bar):
            status = STATUS_NONFINITE
            break
        n_prop += 1
        if lam_bar > 0.0:
            u = uniform()
            cand = t + (-log1p(-u) / lam_bar)
        else:
            cand = math.inf
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
        x = uniform() * lam_bar
        cum = 0.0
        found = False
        for k in groups:
            fp = counts[k] * _f(kind, p, s, c_pp[k] * mp + c_pm[k] * mm)
            if x < cum + fp:
                found, sign, w = True, 0, fp
                break
            cum = cum + fp
            fm = counts[k] * _f(kind, p, s, c_mp[k] * mp + c_mm[k] * mm)
            if x < cum + fm:
                found, sign, w = True, 1, fm
                break
            cum = cum + fm
        if not found:
            continue
        frac = (x - cum) / w
        cnt = int(counts[k])
        agent = int(floor(frac * counts[k]))
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
            times.append(t)
            agents.append(agent)
            signs.append(sign)
        n_events += 1
        if n_events > budget:
            status = STATUS_BUDGET
            break
    _store_events(ev_t, ev_agent, ev_sign, times, agents, signs)
    return status, n_events, n_prop, n_cand, t


def _store_events(ev_t, ev_agent, ev_sign, times, agents, signs):
    n = len(times)
    if n:
        ev_t[:n] = times
        ev_agent[:n] = agents
        ev_sign[:n] = signs


def _fen_add(tree, n, i, v):
    i += 1
    while i <= n:
        tree[i] += v
        i += i & (-i)


def _fen_build(tree, vals, n):
    tree[0] = 0.0
    for i in range(1, n + 1):
        tree[i] = vals[i - 1]
    for i in range(1, n + 1):
        j = i + (i & (-i))
        if j <= n:
            tree[j] += tree[i]


def _fen_search(tree, n, top, r):
    pos, step = 0, top
    while step > 0:
        if pos + step <= n and tree[pos + step] <= r:
            pos += step
            r -= tree[pos]
        step >>= 1
    if pos >= n:
        pos = n - 1
    return pos


def run_self_exciting(bit_generator, kind, p, s, beta, gamma, kappa_eff, alpha, n_agents,
                      a_plus, a_minus, b_plus, b_minus, t_end, window, renorm_exponent,
                      grid, out_mp, out_mm, out_cp, out_cm, ev_t, ev_agent, ev_sign,
                      budget, j_plus, j_minus):
    uniform = _Uniforms(bit_generator)
    exp, log1p, floor, isfinite = math.exp, math.log1p, math.floor, math.isfinite
    n = int(n_agents)
    nd = float(n)
    inv_n = 1.0 / nd
    grid = list(map(float, grid))
    n_grid = len(grid)
    ev_cap = len(ev_t)
    gi = 0
    qp = b_plus / alpha
    qm = b_minus / alpha
    bg = beta * gamma
    cmm = 1.0 + (beta - 1.0) * gamma
    lip = p * kappa_eff
    t = t_ref = sp = sm = 0.0
    cp = cm = n_events = n_cand = n_prop = 0
    status = STATUS_OK
    times, agents, signs = [], [], []
    top = 1
    while top * 2 <= n:
        top *= 2
    jp = [0.0] * n
    jm = [0.0] * n
    tp = [0.0] * (n + 1)
    tm = [0.0] * (n + 1)
    _fen_build(tp, jp, n)
    _fen_build(tm, jm, n)

    def record(limit):
        nonlocal gi
        while gi < n_grid and grid[gi] <= limit:
            e = exp(-alpha * grid[gi])
            out_mp[gi] = (a_plus - qp) * e + qp + exp(-alpha * (grid[gi] - t_ref)) * sp * inv_n
            out_mm[gi] = (a_minus - qm) * e + qm + exp(-alpha * (grid[gi] - t_ref)) * sm * inv_n
            out_cp[gi] = cp
            out_cm[gi] = cm
            gi += 1

    while True:
        if alpha * (t - t_ref) > renorm_exponent:
            e = exp(-alpha * (t - t_ref))
            for i in range(n):
                jp[i] = jp[i] * e
                jm[i] = jm[i] * e
            sp = sp * e
            sm = sm * e
            _fen_build(tp, jp, n)
            _fen_build(tm, jm, n)
            t_ref = t
        w_end = t + window
        if w_end > t_end:
            w_end = t_end
        e0 = exp(-alpha * (t - t_ref))
        e = exp(-alpha * t)
        xdp = (a_plus - qp) * e + qp
        xdm = (a_minus - qm) * e + qm
        xhp = xdp if xdp >= qp else qp
        xhm = xdm if xdm >= qm else qm
        mp = xdp + e0 * sp * inv_n
        mm = xdm + e0 * sm * inv_n
        ubp = mp if mp >= qp else qp
        ubm = mm if mm >= qm else qm
        fbp = _f(kind, p, s, ubp + bg * ubm)
        fbm = _f(kind, p, s, gamma * ubp + cmm * ubm)
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
            u = uniform()
            cand = t + (-log1p(-u) / lam_bar)
        else:
            cand = math.inf
        if cand >= w_end:
            record(w_end)
            t = w_end
            if t >= t_end:
                break
            continue
        record(cand)
        t = cand
        n_cand += 1
        x = uniform() * lam_bar
        if x < w1:
            comp, r = 0, x / w1
        elif x < w1 + w2:
            comp, r = 1, (x - w1) / w2
        elif x < w1 + w2 + w3:
            comp, r = 2, (x - (w1 + w2)) / w3
        elif x < w1 + w2 + w3 + w4:
            comp, r = 3, (x - (w1 + w2 + w3)) / w4
        elif x < w1 + w2 + w3 + w4 + w5:
            comp, r = 4, (x - (w1 + w2 + w3 + w4)) / w5
        elif w6 > 0.0:
            comp, r = 5, (x - (w1 + w2 + w3 + w4 + w5)) / w6
            if r >= 1.0:
                r = 0.9999999999999999
        else:
            continue
        if comp == 0 or comp == 3:
            i = int(floor(r * nd))
            if i >= n:
                i = n - 1
        elif comp == 1 or comp == 4:
            i = _fen_search(tp, n, top, r * sp)
        else:
            i = _fen_search(tm, n, top, r * sm)
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
        lam = _f(kind, p, s, arg)
        u = uniform()
        if not (u * bnd < lam):
            continue
        inc = 1.0 / e0
        if sign == 0:
            jp[i] = jp[i] + inc
            sp = sp + inc
            _fen_add(tp, n, i, inc)
            cp += 1
        else:
            jm[i] = jm[i] + inc
            sm = sm + inc
            _fen_add(tm, n, i, inc)
            cm += 1
        if n_events < ev_cap:
            times.append(t)
            agents.append(i)
            signs.append(sign)
        n_events += 1
        if n_events > budget:
            status = STATUS_BUDGET
            break
    _store_events(ev_t, ev_agent, ev_sign, times, agents, signs)
    j_plus[:] = jp
    j_minus[:] = jm
    return status, n_events, n_prop, n_cand, t, t_ref
