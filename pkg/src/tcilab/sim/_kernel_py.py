"""Pure-Python trajectory kernels, used when the compiled extension is absent.

Mirrors ``_kernel.pyx`` operation for operation so both backends produce
bit-identical floats.
"""
from math import exp, log, pi, pow

# dyn layout: rho, kappa, beta_c, alpha_r, beta_r
# pol layout: gamma_c, gamma_r, d_max, death_volume, recovery_volume,
#             chemo_dose, radio_dose, force_p_chemo, force_p_radio


def _diameter(v):
    return 2.0 * pow(3.0 * v / (4.0 * pi), 1.0 / 3.0)


def _step(v, c, d, e, dyn):
    factor = (1.0 + dyn[0] * log(dyn[1] / v)
              - dyn[2] * c
              - (dyn[3] * d + dyn[4] * d * d)
              + e)
    out = factor * v
    if out < 0.0:
        return 0.0
    return out


def _conc(c_prev, applied, literal, dose):
    if literal or applied:
        return c_prev / 2.0 + dose
    return c_prev / 2.0


def simulate_patient(V0, dyn, pol, noise, u_chemo, u_radio, horizon, window, literal,
                     volumes, conc, chemo, radio):
    dyn = [float(x) for x in dyn]
    gamma_c, gamma_r, d_max, death, recovery, chemo_dose, radio_dose, force_c, force_r = (
        float(x) for x in pol)
    delta = d_max / 2.0
    vols = [0.0] * (horizon + 1)
    vols[0] = float(V0)
    volumes[0] = vols[0]
    c_prev = 0.0
    for t in range(horizon):
        start = max(t - window + 1, 0)
        total = 0.0
        for s in range(start, t + 1):
            total = total + _diameter(vols[s])
        d_bar = total / (t + 1 - start)
        if force_c >= 0.0:
            p_c = force_c
        else:
            p_c = 1.0 / (1.0 + exp(-(gamma_c / d_max * (d_bar - delta))))
        if force_r >= 0.0:
            p_r = force_r
        else:
            p_r = 1.0 / (1.0 + exp(-(gamma_r / d_max * (d_bar - delta))))
        a_c = float(u_chemo[t]) < p_c
        a_r = float(u_radio[t]) < p_r
        c_t = _conc(c_prev, a_c, literal, chemo_dose)
        d_t = radio_dose if a_r else 0.0
        v_next = _step(vols[t], c_t, d_t, float(noise[t]), dyn)
        chemo[t] = a_c
        radio[t] = a_r
        conc[t] = c_t
        c_prev = c_t
        if v_next >= death:
            vols[t + 1] = volumes[t + 1] = death
            return t + 1, 1
        vols[t + 1] = volumes[t + 1] = v_next
        if v_next <= recovery:
            return t + 1, 2
    return horizon, 0


def rollout(v, c_prev, chemo, radio, noise, dyn, pol, literal, out):
    dyn = [float(x) for x in dyn]
    death, chemo_dose, radio_dose = float(pol[3]), float(pol[5]), float(pol[6])
    v, c_prev = float(v), float(c_prev)
    for m in range(len(out)):
        if v <= 0.0:
            v_next = 0.0
            c_t = _conc(c_prev, chemo[m], literal, chemo_dose)
        else:
            c_t = _conc(c_prev, chemo[m], literal, chemo_dose)
            d_t = radio_dose if radio[m] else 0.0
            v_next = _step(v, c_t, d_t, float(noise[m]), dyn)
            if v_next >= death:
                v_next = death
        out[m] = v_next
        v = v_next
        c_prev = c_t


def one_step_all_options(volumes, conc, T, noise, dyn, pol, literal, out):
    dyn = [float(x) for x in dyn]
    death, chemo_dose, radio_dose = float(pol[3]), float(pol[5]), float(pol[6])
    for t in range(T):
        c_prev = float(conc[t - 1]) if t > 0 else 0.0
        v_t = float(volumes[t])
        e_t = float(noise[t])
        for k in range(4):
            c_t = _conc(c_prev, k & 1, literal, chemo_dose)
            d_t = radio_dose if k & 2 else 0.0
            v_next = _step(v_t, c_t, d_t, e_t, dyn)
            if v_next >= death:
                v_next = death
            out[t, k] = v_next


def plan_rollouts(volumes, conc, n_starts, noise, chemo, radio, dyn, pol, literal, out):
    tau = chemo.shape[1]
    buf = [0.0] * tau
    for t in range(n_starts):
        c_prev = float(conc[t - 1]) if t > 0 else 0.0
        nz = [float(x) for x in noise[t:t + tau]]
        for j in range(chemo.shape[0]):
            rollout(volumes[t], c_prev, chemo[j], radio[j], nz, dyn, pol, literal, buf)
            out[t, j, :] = buf
