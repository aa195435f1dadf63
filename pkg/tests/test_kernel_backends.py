"""The compiled and pure-Python kernels must agree bit for bit."""
import numpy as np
import pytest

from tcilab.sim import _kernel_py, kernel
from tcilab.sim.priors import default_priors, sample_patient_params
from tcilab.sim.simulate import SimConfig, decoder_plans, policy_array

cy = pytest.importorskip("tcilab.sim._kernel")


def _run(mod, params, pol, rng_seed, horizon=60, literal=False):
    rng = np.random.default_rng(rng_seed)
    noise = rng.standard_normal(horizon) * params.noise_sd
    uc, ur = rng.random(horizon), rng.random(horizon)
    vols, conc = np.zeros(horizon + 1), np.zeros(horizon)
    ch, ra = np.zeros(horizon, np.int8), np.zeros(horizon, np.int8)
    T, reason = mod.simulate_patient(params.V0, params.dyn_array(), pol, noise, uc, ur, horizon, 15, literal,
                                     vols, conc, ch, ra)
    out = np.zeros((T, 4))
    if T:
        mod.one_step_all_options(vols, conc, T, noise, params.dyn_array(), pol, literal, out)
    roll = np.zeros(5)
    mod.rollout(vols[0], 0.0, np.array([0, 1, 0, 0, 1], np.int8), np.array([1, 0, 0, 1, 0], np.int8),
                noise[:5].copy(), params.dyn_array(), pol, literal, roll)
    plans = decoder_plans(4)
    n = max(T - 4, 0)
    rolls = np.zeros((n, 8, 4))
    mod.plan_rollouts(vols, conc, n, noise, (plans & 1).astype(np.int8), ((plans & 2) >> 1).astype(np.int8),
                      params.dyn_array(), pol, literal, rolls)
    return T, reason, vols[:T + 1], conc[:T], ch[:T], ra[:T], out, roll, rolls


def test_backend_selected():
    assert kernel.BACKEND in ("cython", "python")


@pytest.mark.parametrize("gamma", [0.0, 5.0, 10.0])
@pytest.mark.parametrize("literal", [False, True])
def test_bit_identical(gamma, literal):
    rng = np.random.default_rng(int(gamma) + 7 * literal)
    cfg = SimConfig(gamma_c=gamma, gamma_r=gamma)
    pol = policy_array(cfg)
    for i in range(25):
        p = sample_patient_params(rng, default_priors())
        a = _run(cy, p, pol, i, literal=literal)
        b = _run(_kernel_py, p, pol, i, literal=literal)
        assert a[0] == b[0] and a[1] == b[1]
        for x, y in zip(a[2:], b[2:]):
            assert np.array_equal(x, y)
