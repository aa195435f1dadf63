# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trajectory kernels.

Mirrors ``_kernel_py`` operation for operation so both backends produce
bit-identical floats. Keep the two files in sync.
"""
from libc.math cimport log, exp, pow, M_PI

# dyn layout: rho, kappa, beta_c, alpha_r, beta_r
# pol layout: gamma_c, gamma_r, d_max, death_volume, recovery_volume,
#             chemo_dose, radio_dose, force_p_chemo, force_p_radio


cdef inline double _diameter(double v) nogil:
    return 2.0 * pow(3.0 * v / (4.0 * M_PI), 1.0 / 3.0)


cdef inline double _step(double v, double c, double d, double e, const double[:] dyn) nogil:
    cdef double factor = (1.0 + dyn[0] * log(dyn[1] / v)
                          - dyn[2] * c
                          - (dyn[3] * d + dyn[4] * d * d)
                          + e)
    cdef double out = factor * v
    if out < 0.0:
        return 0.0
    return out


cdef inline double _conc(double c_prev, bint applied, bint literal, double dose) nogil:
    if literal or applied:
        return c_prev / 2.0 + dose
    return c_prev / 2.0


def simulate_patient(double V0, const double[:] dyn, const double[:] pol,
                     const double[:] noise, const double[:] u_chemo, const double[:] u_radio,
                     int horizon, int window, bint literal,
                     double[:] volumes, double[:] conc, signed char[:] chemo, signed char[:] radio):
    """Run one factual trajectory. Returns ``(T, reason)``; reason 0 horizon, 1 death, 2 recovery."""
    cdef int t, s, start
    cdef double total, d_bar, delta, p_c, p_r, c_prev, c_t, d_t, v_next
    cdef bint a_c, a_r
    cdef double gamma_c = pol[0], gamma_r = pol[1], d_max = pol[2]
    cdef double death = pol[3], recovery = pol[4], chemo_dose = pol[5], radio_dose = pol[6]
    cdef double force_c = pol[7], force_r = pol[8]
    delta = d_max / 2.0
    volumes[0] = V0
    c_prev = 0.0
    for t in range(horizon):
        start = t - window + 1
        if start < 0:
            start = 0
        total = 0.0
        for s in range(start, t + 1):
            total = total + _diameter(volumes[s])
        d_bar = total / (t + 1 - start)
        if force_c >= 0.0:
            p_c = force_c
        else:
            p_c = 1.0 / (1.0 + exp(-(gamma_c / d_max * (d_bar - delta))))
        if force_r >= 0.0:
            p_r = force_r
        else:
            p_r = 1.0 / (1.0 + exp(-(gamma_r / d_max * (d_bar - delta))))
        a_c = u_chemo[t] < p_c
        a_r = u_radio[t] < p_r
        c_t = _conc(c_prev, a_c, literal, chemo_dose)
        d_t = radio_dose if a_r else 0.0
        v_next = _step(volumes[t], c_t, d_t, noise[t], dyn)
        chemo[t] = a_c
        radio[t] = a_r
        conc[t] = c_t
        c_prev = c_t
        if v_next >= death:
            volumes[t + 1] = death
            return t + 1, 1
        volumes[t + 1] = v_next
        if v_next <= recovery:
            return t + 1, 2
    return horizon, 0


def rollout(double v, double c_prev, const signed char[:] chemo, const signed char[:] radio,
            const double[:] noise, const double[:] dyn, const double[:] pol, bint literal,
            double[:] out):
    """Forward-simulate a fixed treatment plan from ``(v, c_prev)``; no termination."""
    cdef int m, n = out.shape[0]
    cdef double c_t, d_t, v_next
    cdef double death = pol[3], chemo_dose = pol[5], radio_dose = pol[6]
    for m in range(n):
        if v <= 0.0:
            v_next = 0.0
            c_t = _conc(c_prev, chemo[m], literal, chemo_dose)
        else:
            c_t = _conc(c_prev, chemo[m], literal, chemo_dose)
            d_t = radio_dose if radio[m] else 0.0
            v_next = _step(v, c_t, d_t, noise[m], dyn)
            if v_next >= death:
                v_next = death
        out[m] = v_next
        v = v_next
        c_prev = c_t


def one_step_all_options(const double[:] volumes, const double[:] conc, int T,
                         const double[:] noise, const double[:] dyn, const double[:] pol,
                         bint literal, double[:, :] out):
    """Next-day volume under each of the four options at every factual day."""
    cdef int t, k
    cdef double c_prev, c_t, d_t, v_next
    cdef double death = pol[3], chemo_dose = pol[5], radio_dose = pol[6]
    for t in range(T):
        c_prev = conc[t - 1] if t > 0 else 0.0
        for k in range(4):
            c_t = _conc(c_prev, k & 1, literal, chemo_dose)
            d_t = radio_dose if k & 2 else 0.0
            v_next = _step(volumes[t], c_t, d_t, noise[t], dyn)
            if v_next >= death:
                v_next = death
            out[t, k] = v_next


def plan_rollouts(const double[:] volumes, const double[:] conc, int n_starts,
                  const double[:] noise, const signed char[:, :] chemo, const signed char[:, :] radio,
                  const double[:] dyn, const double[:] pol, bint literal, double[:, :, :] out):
    """Every plan from every start day ``t < n_starts``: ``out[t, j, m]``."""
    cdef int t, j, m, n_plans = chemo.shape[0], tau = chemo.shape[1]
    cdef double v, c_prev, c_t, d_t, v_next
    cdef double death = pol[3], chemo_dose = pol[5], radio_dose = pol[6]
    for t in range(n_starts):
        for j in range(n_plans):
            v = volumes[t]
            c_prev = conc[t - 1] if t > 0 else 0.0
            for m in range(tau):
                c_t = _conc(c_prev, chemo[j, m], literal, chemo_dose)
                if v <= 0.0:
                    v_next = 0.0
                else:
                    d_t = radio_dose if radio[j, m] else 0.0
                    v_next = _step(v, c_t, d_t, noise[t + m], dyn)
                    if v_next >= death:
                        v_next = death
                out[t, j, m] = v_next
                v = v_next
                c_prev = c_t
