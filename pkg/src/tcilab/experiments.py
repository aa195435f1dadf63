"""End-to-end experiment drivers: one seed of simulate/train/evaluate, ablations, sweeps, table layouts."""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .evaluation import (
    MetricsReport,
    early_prediction_mean,
    evaluate_decoder,
    evaluate_encoder,
    history_sweep,
    treatment_accuracy,
)
from .model.networks import get_variant
from .sim.priors import ConfigError
from .sim.simulate import SimConfig, generate_dataset
from .training import (
    DecoderBundle,
    EncoderBundle,
    HyperParams,
    build_decoder_dataset,
    train_decoder,
    train_encoder,
)

log = logging.getLogger(__name__)

# Table 1 confounding settings as (gamma_c, gamma_r)
TABLE1_SETTINGS = {"a": (5.0, 5.0), "b": (0.0, 5.0), "c": (5.0, 0.0)}
TABLE1_TAUS = (3, 4, 5, 6, 7)
TABLE2_GAMMAS = (6, 7, 8, 9, 10)
TABLE2_TAUS = (1, 3, 5)
TABLE6_GAMMAS = (0, 5, 10)
ABLATION_VARIANTS = ("full", "Y_only", "Y+D", "Y+G")


def records_of(split) -> list[dict]:
    return [t if isinstance(t, dict) else t.to_record() for t in split]


@dataclass
class TrainedPair:
    encoder: EncoderBundle
    decoder: DecoderBundle | None


def train_pair(train, val, hp: HyperParams, seed: int, tau: int, encoder_only: bool = False) -> TrainedPair:
    """Encoder, then (for tau > 1) a decoder on top of the frozen encoder."""
    train, val = records_of(train), records_of(val)
    enc = train_encoder(train, val, hp, seed)
    if encoder_only or tau < 2:
        return TrainedPair(enc, None)
    tr = build_decoder_dataset(enc, train, tau)
    va = build_decoder_dataset(enc, val, tau)
    dec = train_decoder(enc, tr, va, hp, seed)
    return TrainedPair(enc, dec)


def evaluate_pair(pair: TrainedPair, test, tau: int) -> float:
    """Counterfactual NRMSE% at offset tau (the encoder's all-option error when tau is 1)."""
    test = records_of(test)
    if tau == 1:
        return evaluate_encoder(pair.encoder, test).rows[0]["nrmse_pct"]
    return evaluate_decoder(pair.encoder, pair.decoder, test, tau).rows[0]["nrmse_pct"]


def _sim(gamma_c, gamma_r, tau, base: SimConfig, seed: int) -> SimConfig:
    return replace(base, gamma_c=float(gamma_c), gamma_r=float(gamma_r), tau=int(tau), seed=int(seed))


def run_ablation(variant: str, sim: SimConfig, hp: HyperParams, seeds=(0,), dataset=None) -> MetricsReport:
    """Train and evaluate one ablation variant on each seed.

    The dataset seed follows the training seed unless ``dataset`` is given,
    in which case every seed shares it (matched comparisons).
    """
    v = get_variant(variant)
    hp = replace(hp, variant=v.label)
    rows = []
    for seed in seeds:
        ds = dataset if dataset is not None else generate_dataset(replace(sim, seed=int(seed)))
        pair = train_pair(ds.train, ds.val, hp, seed, sim.tau)
        rows.append({"variant": v.label, "gamma_c": sim.gamma_c, "gamma_r": sim.gamma_r, "tau": sim.tau,
                     "seed": int(seed), "nrmse_pct": evaluate_pair(pair, ds.test, sim.tau)})
    return MetricsReport(label=f"ablation_{v.label}", rows=rows)


def ablation_table(sim: SimConfig, hp: HyperParams, seeds=(0,), variants=ABLATION_VARIANTS) -> MetricsReport:
    """Table-3 layout: one row per variant with the seed-mean NRMSE%."""
    per_seed, rows = [], []
    datasets = {int(s): generate_dataset(replace(sim, seed=int(s))) for s in seeds}
    for variant in variants:
        label = get_variant(variant).label
        vals = []
        for s in seeds:
            r = run_ablation(variant, sim, hp, seeds=(s,), dataset=datasets[int(s)]).rows[0]
            per_seed.append(r)
            vals.append(r["nrmse_pct"])
        rows.append({"variant": label, "gamma_c": sim.gamma_c, "gamma_r": sim.gamma_r, "tau": sim.tau,
                     "nrmse_pct": float(np.mean(vals)), "n_seeds": len(vals)})
    return MetricsReport(label="table3", rows=rows, extra={"per_seed": per_seed})


def table1(base: SimConfig, hp: HyperParams, seed: int = 0, settings=TABLE1_SETTINGS, taus=TABLE1_TAUS,
           methods=("full", "Y_only")) -> MetricsReport:
    """Setting (a/b/c) x method rows with one NRMSE% column per tau."""
    rows = []
    for name, (gc, gr) in settings.items():
        for method in methods:
            row = {"setting": name, "gamma_c": gc, "gamma_r": gr, "method": get_variant(method).label}
            for tau in taus:
                ds = generate_dataset(_sim(gc, gr, tau, base, seed))
                pair = train_pair(ds.train, ds.val, replace(hp, variant=method), seed, tau)
                row[f"tau{tau}"] = evaluate_pair(pair, ds.test, tau)
            rows.append(row)
    return MetricsReport(label="table1", rows=rows)


def table2(base: SimConfig, hp: HyperParams, seed: int = 0, gammas=TABLE2_GAMMAS, taus=TABLE2_TAUS,
           methods=("full", "Y_only")) -> MetricsReport:
    """Gamma rows with a (tau, method) column grid, plus a mean row."""
    rows = []
    for g in gammas:
        row = {"gamma": g}
        for tau in taus:
            ds = generate_dataset(_sim(g, g, tau, base, seed))
            for method in methods:
                pair = train_pair(ds.train, ds.val, replace(hp, variant=method), seed, tau)
                row[f"tau{tau}_{get_variant(method).label}"] = evaluate_pair(pair, ds.test, tau)
        rows.append(row)
    mean = {"gamma": "mean"}
    for key in rows[0]:
        if key != "gamma":
            mean[key] = float(np.mean([r[key] for r in rows]))
    rows.append(mean)
    return MetricsReport(label="table2", rows=rows)


def table6(base: SimConfig, hp: HyperParams, seed: int = 0, gammas=TABLE6_GAMMAS,
           n_eval: int | None = None) -> MetricsReport:
    """Treatment-sequence accuracy of p2 samples per gamma (exact and one-hot element-wise)."""
    rows = []
    for g in gammas:
        ds = generate_dataset(_sim(g, g, 1, base, seed))
        enc = train_encoder(records_of(ds.train), records_of(ds.val), replace(hp, variant="full"), seed)
        test = records_of(ds.test)[:n_eval]
        acc = treatment_accuracy(enc, test, seed=seed)
        rows.append({"gamma": g, "accuracy_elementwise": acc.elementwise, "accuracy_exact": acc.exact, "n": acc.n})
    return MetricsReport(label="table6", rows=rows)


def history_experiment(base: SimConfig, hp: HyperParams, gamma: float, tau: int, seed: int = 0,
                       methods=("full", "Y_only")) -> dict[str, MetricsReport]:
    """One history-length curve per method on a shared dataset."""
    ds = generate_dataset(_sim(gamma, gamma, tau, base, seed))
    test = records_of(ds.test)
    curves = {}
    for method in methods:
        pair = train_pair(ds.train, ds.val, replace(hp, variant=method), seed, tau)
        dec = pair.decoder.model if pair.decoder is not None else None
        curves[get_variant(method).label] = history_sweep(pair.encoder, dec, test, tau,
                                                          label=f"history_{get_variant(method).label}")
    return curves


def early_prediction_curve(base: SimConfig, hp: HyperParams, gammas, tau: int, seed: int = 0,
                           method: str = "full", max_history: int | None = None) -> MetricsReport:
    """Mean over gamma of the history curves for one method."""
    curves = [history_experiment(base, hp, g, tau, seed, methods=(method,))[get_variant(method).label]
              for g in gammas]
    return early_prediction_mean(curves, max_history)


def run_table(number: int, base: SimConfig, hp: HyperParams, seed: int = 0, **kw) -> MetricsReport:
    if number == 1:
        return table1(base, hp, seed, **kw)
    if number == 2:
        return table2(base, hp, seed, **kw)
    if number == 3:
        return ablation_table(base, hp, seeds=kw.get("seeds", (seed,)))
    if number == 6:
        return table6(base, hp, seed)
    raise ConfigError(f"no layout for table {number}; choose 1, 2, 3 or 6")
