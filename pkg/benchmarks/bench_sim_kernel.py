"""Compare the compiled and pure-Python trajectory kernels.

    python3 benchmarks/bench_sim_kernel.py [--patients 500] [--repeat 3]

Times three workloads on identical inputs: factual simulation, the
all-option one-step annotation, and the 2*tau plan rollouts from every
eligible day. Also
confirms that both backends return identical arrays.
"""
import argparse
import time

import numpy as np

from tcilab.sim import _kernel_py
from tcilab.sim.priors import default_priors, sample_patient_params
from tcilab.sim.simulate import SimConfig, decoder_plans, policy_array

try:
    from tcilab.sim import _kernel as _kernel_cy
except ImportError:  # pragma: no cover
    _kernel_cy = None


def make_inputs(n, horizon, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        p = sample_patient_params(rng, default_priors())
        out.append((p, rng.standard_normal(horizon) * p.noise_sd, rng.random(horizon), rng.random(horizon)))
    return out


def workload(mod, inputs, pol, horizon, tau):
    plans = decoder_plans(tau)
    chemo_p, radio_p = (plans & 1).astype(np.int8), ((plans & 2) >> 1).astype(np.int8)
    results = []
    t_sim = t_one = t_roll = 0.0
    for p, noise, uc, ur in inputs:
        dyn = p.dyn_array()
        vols, conc = np.zeros(horizon + 1), np.zeros(horizon)
        ch, ra = np.zeros(horizon, np.int8), np.zeros(horizon, np.int8)
        t0 = time.perf_counter()
        T, _ = mod.simulate_patient(p.V0, dyn, pol, noise, uc, ur, horizon, 15, False, vols, conc, ch, ra)
        t1 = time.perf_counter()
        cf = np.zeros((T, 4))
        mod.one_step_all_options(vols, conc, T, noise, dyn, pol, False, cf)
        t2 = time.perf_counter()
        n = max(T - tau, 0)
        rolls = np.zeros((n, 2 * tau, tau))
        mod.plan_rollouts(vols, conc, n, noise, chemo_p, radio_p, dyn, pol, False, rolls)
        t3 = time.perf_counter()
        t_sim, t_one, t_roll = t_sim + t1 - t0, t_one + t2 - t1, t_roll + t3 - t2
        results.append((vols[:T + 1].copy(), cf, rolls))
    return {"simulate": t_sim, "one_step": t_one, "rollouts": t_roll}, results


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--patients", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--gamma", type=float, default=10.0)
    ap.add_argument("--tau", type=int, default=5)
    args = ap.parse_args()
    horizon = 60
    inputs = make_inputs(args.patients, horizon)
    pol = policy_array(SimConfig(gamma_c=args.gamma, gamma_r=args.gamma))
    backends = {"python": _kernel_py}
    if _kernel_cy is not None:
        backends["cython"] = _kernel_cy
    best, outputs = {}, {}
    for name, mod in backends.items():
        runs = [workload(mod, inputs, pol, horizon, args.tau) for _ in range(args.repeat)]
        best[name] = {k: min(r[0][k] for r in runs) for k in runs[0][0]}
        outputs[name] = runs[0][1]
    print(f"{args.patients} patients, gamma={args.gamma:g}, tau={args.tau}, best of {args.repeat}")
    print(f"{'stage':<10}" + "".join(f"{n:>12}" for n in best) + ("     speedup" if len(best) == 2 else ""))
    for stage in ("simulate", "one_step", "rollouts"):
        row = f"{stage:<10}" + "".join(f"{best[n][stage] * 1e3:>10.1f}ms" for n in best)
        if len(best) == 2:
            row += f"{best['python'][stage] / best['cython'][stage]:>11.1f}x"
        print(row)
    if len(outputs) == 2:
        same = all(np.array_equal(a, b) for pa, pb in zip(outputs["python"], outputs["cython"])
                   for a, b in zip(pa, pb))
        print("outputs identical:", same)
    else:
        print("compiled extension not built; only the Python kernel was timed")


if __name__ == "__main__":
    main()
