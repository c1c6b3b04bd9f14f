"""Compiled stepping loops for flattened circuit descriptions.

A network is flattened into arrays (see ``circuits.compile_network``):

* nodes: capacitance, leak conductance, leak reversal
* filter states: first-order states ``tau(V) ds/dt = target(V) - s`` whose
  target is either a logistic of a node voltage (gates, synapses) or a linear
  gain times a node voltage (LTI branches)
* current terms: outward currents into a node, of five kinds (below)

The semi-implicit scheme integrates the passive leak exactly: with
``h = g_leak dt / C`` the voltage step is ``V += phi * (I - I_out)`` where
``phi = (1 - exp(-h)) / g_leak`` (``dt / C`` without leak).

Row ``n`` of the output holds ``V_n`` and the states after their update with
``V_n``, i.e. the values that produced the currents at step ``n``.
"""
import math

import numpy as np
from numba import njit

# filter target kinds
TARGET_SIGMOID = 0
TARGET_LINEAR = 1

# current term kinds
TERM_CONDUCTANCE = 0
TERM_STATIC = 1
TERM_LTI = 2
TERM_SYNAPSE = 3
TERM_GAP = 4

# static function codes
F_LINEAR = 0
F_CUBIC = 1
F_CUBIC_MINUS_LINEAR = 2
F_SATURATION = 3
F_SIGMOID = 4
F_PWL = 5

OK = 0
BLOWUP = 1

BLOWUP_LEVEL = 1e6


@njit(cache=True, nogil=True)
def _logistic(x):
    return 0.5 * (1.0 + math.tanh(0.5 * x))


@njit(cache=True, nogil=True)
def _static(code, fp, start, count, v):
    if code == F_LINEAR:
        return fp[start] * v
    if code == F_CUBIC:
        return fp[start] * v * v * v
    if code == F_CUBIC_MINUS_LINEAR:
        return fp[start] * v * v * v - fp[start + 1] * v
    if code == F_SATURATION:
        y = fp[start] * v
        if y < 0.0:
            return 0.0
        if y > 1.0:
            return 1.0
        return y
    if code == F_SIGMOID:
        return _logistic(fp[start] * (v - fp[start + 1]))
    # piecewise linear: fp = [x0..xm-1, y0..ym-1]
    m = count // 2
    j = 0
    while j < m - 2 and v >= fp[start + j + 1]:
        j += 1
    x0 = fp[start + j]
    x1 = fp[start + j + 1]
    y0 = fp[start + m + j]
    y1 = fp[start + m + j + 1]
    return y0 + (y1 - y0) / (x1 - x0) * (v - x0)


@njit(cache=True, nogil=True)
def _targets(V, s_node, s_kind, s_p1, s_p2, out):
    for j in range(s_node.size):
        v = V[s_node[j]]
        if s_kind[j] == TARGET_SIGMOID:
            out[j] = _logistic(s_p1[j] * (v - s_p2[j]))
        else:
            out[j] = s_p1[j] * v


@njit(cache=True, nogil=True)
def _taus(V, s_node, s_tau, s_tamp, s_tslope, s_tcenter, out):
    for j in range(s_node.size):
        if s_tamp[j] == 0.0:
            out[j] = s_tau[j]
        else:
            out[j] = s_tau[j] + s_tamp[j] / math.cosh(
                s_tslope[j] * (V[s_node[j]] - s_tcenter[j]))


@njit(cache=True, nogil=True)
def _currents(V, S, node_g, node_E, t_kind, t_node, t_a, t_g, t_E, t_start, t_count,
              g_idx, g_exp, fp, out):
    for i in range(V.size):
        out[i] = node_g[i] * (V[i] - node_E[i])
    for k in range(t_kind.size):
        i = t_node[k]
        kind = t_kind[k]
        if kind == TERM_CONDUCTANCE:
            prod = t_g[k]
            for q in range(t_start[k], t_start[k] + t_count[k]):
                prod *= S[g_idx[q]] ** g_exp[q]
            out[i] += prod * (V[i] - t_E[k])
        elif kind == TERM_STATIC:
            out[i] += _static(t_a[k], fp, t_start[k], t_count[k], V[i])
        elif kind == TERM_LTI:
            out[i] += S[t_a[k]] + t_g[k] * V[i]
        elif kind == TERM_SYNAPSE:
            out[i] += t_g[k] * S[t_a[k]] * (V[i] - t_E[k])
        else:
            out[i] += t_g[k] * (V[i] - V[t_a[k]])


@njit(cache=True, nogil=True)
def _deriv(V, S, I, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau, s_tamp,
           s_tslope, s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start, t_count, g_idx,
           g_exp, fp, dV, dS, tmp_t, tmp_tau, tmp_i):
    _targets(V, s_node, s_kind, s_p1, s_p2, tmp_t)
    _taus(V, s_node, s_tau, s_tamp, s_tslope, s_tcenter, tmp_tau)
    for j in range(S.size):
        dS[j] = (tmp_t[j] - S[j]) / tmp_tau[j]
    _currents(V, S, node_g, node_E, t_kind, t_node, t_a, t_g, t_E, t_start, t_count,
              g_idx, g_exp, fp, tmp_i)
    for i in range(V.size):
        dV[i] = (I[i] - tmp_i[i]) / node_C[i]


@njit(cache=True, nogil=True)
def step_factor(dt, C, g):
    """``phi`` of the exact leak update; tends to ``dt / C`` as ``g -> 0``."""
    h = g * dt / C
    if h < 1e-12:
        return dt / C
    return -math.expm1(-h) / g


@njit(cache=True, nogil=True)
def run(Iext, dt, method, V0, S0, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2,
        s_tau, s_tamp, s_tslope, s_tcenter, s_clamp, t_kind, t_node, t_a, t_g, t_E,
        t_start, t_count, g_idx, g_exp, fp):
    """Integrate over ``Iext.shape[0]`` samples.

    method 0: semi-implicit Euler (exponential state update with V_n, then
    explicit voltage step).  method 1: classical RK4 on the full state.
    Returns (V, S, status, fail_index).
    """
    N = Iext.shape[0]
    n = V0.size
    m = S0.size
    Vout = np.empty((N, n))
    Sout = np.empty((N, m))
    V = V0.copy()
    S = S0.copy()
    tmp_t = np.empty(m)
    tmp_tau = np.empty(m)
    tmp_i = np.empty(n)
    if method == 0:
        phi = np.empty(n)
        for i in range(n):
            phi[i] = step_factor(dt, node_C[i], node_g[i])
        for k in range(N):
            _targets(V, s_node, s_kind, s_p1, s_p2, tmp_t)
            _taus(V, s_node, s_tau, s_tamp, s_tslope, s_tcenter, tmp_tau)
            for j in range(m):
                a = math.exp(-dt / tmp_tau[j])
                S[j] = tmp_t[j] + (S[j] - tmp_t[j]) * a
            _currents(V, S, node_g, node_E, t_kind, t_node, t_a, t_g, t_E, t_start,
                      t_count, g_idx, g_exp, fp, tmp_i)
            for i in range(n):
                Vout[k, i] = V[i]
            for j in range(m):
                Sout[k, j] = S[j]
            for i in range(n):
                V[i] = V[i] + phi[i] * (Iext[k, i] - tmp_i[i])
                if not (abs(V[i]) < BLOWUP_LEVEL):
                    return Vout, Sout, BLOWUP, k + 1
        return Vout, Sout, OK, N
    k1v = np.empty(n)
    k2v = np.empty(n)
    k3v = np.empty(n)
    k4v = np.empty(n)
    k1s = np.empty(m)
    k2s = np.empty(m)
    k3s = np.empty(m)
    k4s = np.empty(m)
    Vt = np.empty(n)
    St = np.empty(m)
    for k in range(N):
        for i in range(n):
            Vout[k, i] = V[i]
        for j in range(m):
            Sout[k, j] = S[j]
        I = Iext[k]
        _deriv(V, S, I, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau, s_tamp,
               s_tslope, s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start, t_count, g_idx,
               g_exp, fp, k1v, k1s, tmp_t, tmp_tau, tmp_i)
        for i in range(n):
            Vt[i] = V[i] + 0.5 * dt * k1v[i]
        for j in range(m):
            St[j] = S[j] + 0.5 * dt * k1s[j]
        _deriv(Vt, St, I, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau, s_tamp,
               s_tslope, s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start, t_count, g_idx,
               g_exp, fp, k2v, k2s, tmp_t, tmp_tau, tmp_i)
        for i in range(n):
            Vt[i] = V[i] + 0.5 * dt * k2v[i]
        for j in range(m):
            St[j] = S[j] + 0.5 * dt * k2s[j]
        _deriv(Vt, St, I, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau, s_tamp,
               s_tslope, s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start, t_count, g_idx,
               g_exp, fp, k3v, k3s, tmp_t, tmp_tau, tmp_i)
        for i in range(n):
            Vt[i] = V[i] + dt * k3v[i]
        for j in range(m):
            St[j] = S[j] + dt * k3s[j]
        _deriv(Vt, St, I, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau, s_tamp,
               s_tslope, s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start, t_count, g_idx,
               g_exp, fp, k4v, k4s, tmp_t, tmp_tau, tmp_i)
        for i in range(n):
            V[i] = V[i] + dt / 6.0 * (k1v[i] + 2 * k2v[i] + 2 * k3v[i] + k4v[i])
            if not (abs(V[i]) < BLOWUP_LEVEL):
                return Vout, Sout, BLOWUP, k + 1
        for j in range(m):
            S[j] = S[j] + dt / 6.0 * (k1s[j] + 2 * k2s[j] + 2 * k3s[j] + k4s[j])
            if s_clamp[j]:
                S[j] = min(max(S[j], 0.0), 1.0)
    return Vout, Sout, OK, N


@njit(cache=True, nogil=True)
def currents_along(V, S, node_g, node_E, t_kind, t_node, t_a, t_g, t_E, t_start, t_count,
                   g_idx, g_exp, fp):
    """Total outward current per node for every recorded row."""
    N = V.shape[0]
    out = np.empty_like(V)
    tmp = np.empty(V.shape[1])
    for k in range(N):
        _currents(V[k], S[k], node_g, node_E, t_kind, t_node, t_a, t_g, t_E, t_start,
                  t_count, g_idx, g_exp, fp, tmp)
        out[k] = tmp
    return out


@njit(cache=True, nogil=True)
def step_once(V, S, I, dt, node_C, node_g, node_E, s_node, s_kind, s_p1, s_p2, s_tau,
              s_tamp, s_tslope, s_tcenter, t_kind, t_node, t_a, t_g, t_E, t_start, t_count,
              g_idx, g_exp, fp):
    """One semi-implicit Euler step in place; used by closed-loop drivers."""
    m = S.size
    n = V.size
    tmp_t = np.empty(m)
    tmp_tau = np.empty(m)
    tmp_i = np.empty(n)
    _targets(V, s_node, s_kind, s_p1, s_p2, tmp_t)
    _taus(V, s_node, s_tau, s_tamp, s_tslope, s_tcenter, tmp_tau)
    for j in range(m):
        a = math.exp(-dt / tmp_tau[j])
        S[j] = tmp_t[j] + (S[j] - tmp_t[j]) * a
    _currents(V, S, node_g, node_E, t_kind, t_node, t_a, t_g, t_E, t_start, t_count,
              g_idx, g_exp, fp, tmp_i)
    for i in range(n):
        V[i] = V[i] + step_factor(dt, node_C[i], node_g[i]) * (I[i] - tmp_i[i])
