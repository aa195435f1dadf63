"""Counterfactual evaluation, treatment accuracy and history-length breakdowns."""
from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import torch
from torch.nn import functional as F

from .metrics import V_MAX, nrmse
from .model.data import to_arrays
from .sim.dynamics import K_OPTIONS
from .sim.priors import ConfigError
from .sim.simulate import decoder_plans
from .training import DecoderExamples, EncoderBundle, decoder_predictions, encoder_factors, split_psi

log = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    """Flat rows (one per grid cell or bucket) plus free-form extras."""

    label: str
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        if not self.rows:
            return ""
        keys = list(self.rows[0])
        for r in self.rows[1:]:
            keys += [k for k in r if k not in keys]
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        writer.writeheader()
        for r in self.rows:
            writer.writerow({k: _fmt(r.get(k)) for k in keys})
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"label": self.label, "rows": self.rows, "extra": self.extra}, indent=2, sort_keys=True)


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6f}"
    return v


def _require(records, key: str, what: str):
    for r in records:
        if r.get(key) is None:
            raise ConfigError(f"test records lack {what} annotations ({key!r}); regenerate the test split")


# --------------------------------------------------------------------------- encoder


@torch.no_grad()
def encoder_counterfactual_predictions(bundle: EncoderBundle, records) -> list[np.ndarray]:
    """Next-day predictions under every option, (T, K) per patient, raw units."""
    patients = to_arrays(records)
    enc = bundle.model
    out = []
    for f in encoder_factors(bundle, patients):
        T = next(iter(f.values())).shape[0]
        preds = np.zeros((T, K_OPTIONS))
        for k in range(K_OPTIONS):
            a = F.one_hot(torch.full((T,), k), K_OPTIONS)
            preds[:, k] = bundle.scaler.unvol(enc.predict_outcome(f, a).numpy())
        out.append(preds)
    return out


def evaluate_encoder(model, records, label: str = "encoder") -> MetricsReport:
    """One-step NRMSE% over all days, patients and options.

    ``model`` is an :class:`EncoderBundle` or a callable ``records -> [(T, K) arrays]``.
    """
    _require(records, "cf_encoder", "encoder counterfactual")
    preds = model(records) if callable(model) else encoder_counterfactual_predictions(model, records)
    truth = [np.asarray(r["cf_encoder"]) for r in records]
    p, y = np.concatenate(preds), np.concatenate(truth)
    per_option = {f"nrmse_opt{k}": nrmse(p[:, k], y[:, k]) for k in range(K_OPTIONS)}
    row = {"tau": 1, "nrmse_pct": nrmse(p, y), **per_option, "n": int(y.size)}
    return MetricsReport(label=label, rows=[row])


# --------------------------------------------------------------------------- decoder


def counterfactual_windows(bundle: EncoderBundle, records, tau: int) -> tuple[DecoderExamples, np.ndarray]:
    """One example per (patient, annotated day, plan) with its simulated truth."""
    _require(records, "cf_decoder", "decoder counterfactual")
    patients = to_arrays(records)
    factors = encoder_factors(bundle, patients)
    plans = decoder_plans(tau)
    psi, static, plan, truth, pid, start = [], [], [], [], [], []
    for i, (rec, p, f) in enumerate(zip(records, patients, factors)):
        ann = rec["cf_decoder"]
        if ann["tau"] != tau:
            raise ConfigError(f"test annotations are for tau={ann['tau']}, asked for tau={tau}")
        u = bundle.model.unify(f)
        for step in ann["timesteps"]:
            t = step["t"]
            psi.append(u[t].expand(len(plans), -1))
            static.append(np.repeat(p.static[None], len(plans), axis=0))
            plan.append(plans)
            truth.append(np.asarray(step["outcomes"]))
            pid.append(np.full(len(plans), i))
            start.append(np.full(len(plans), t))
    if not psi:
        raise ConfigError("no annotated counterfactual windows in the test split")
    ex = DecoderExamples(
        psi=torch.cat(psi).float(),
        static=torch.as_tensor(np.concatenate(static), dtype=torch.float32),
        plan=torch.as_tensor(np.concatenate(plan)),
        truth=torch.as_tensor(np.concatenate(truth)),
        patient=np.concatenate(pid), start=np.concatenate(start), tau=tau, scaler=bundle.scaler)
    return ex, np.concatenate(start)


def evaluate_decoder(encoder, decoder, records, tau: int, label: str = "decoder",
                     rollout_fn=None) -> MetricsReport:
    """NRMSE% of the offset-tau prediction over every counterfactual sequence.

    For ``tau == 1`` this is the encoder one-step error restricted to the
    single-application options (chemo only, radio only). ``rollout_fn``
    replaces the model: it receives the windows and returns (N, tau) raw
    predictions.
    """
    if tau < 1:
        raise ValueError("tau must be >= 1")
    if tau == 1:
        _require(records, "cf_encoder", "encoder counterfactual")
        truth = np.concatenate([np.asarray(r["cf_encoder"])[:, [1, 2]] for r in records])
        if rollout_fn is not None:
            pred = rollout_fn(records)
        else:
            pred = np.concatenate([p[:, [1, 2]] for p in encoder_counterfactual_predictions(encoder, records)])
        row = {"tau": 1, "nrmse_pct": nrmse(pred, truth), "nrmse_offset1": nrmse(pred, truth), "n": int(truth.size)}
        return MetricsReport(label=label, rows=[row])
    ex, _ = counterfactual_windows(encoder, records, tau)
    dec_model = getattr(decoder, "model", decoder)
    pred = rollout_fn(ex) if rollout_fn is not None else decoder_predictions(encoder, dec_model, ex)
    truth = ex.truth.numpy()
    row = {"tau": tau, "nrmse_pct": nrmse(pred[:, -1], truth[:, -1])}
    for m in range(tau):
        row[f"nrmse_offset{m + 1}"] = nrmse(pred[:, m], truth[:, m])
    row["n"] = int(len(ex))
    return MetricsReport(label=label, rows=[row], extra={"predictions": None})


# --------------------------------------------------------------------------- treatment accuracy


@dataclass
class TreatmentAccuracy:
    exact: float  # fraction of days where the sampled option equals the factual one
    elementwise: float  # mean agreement over the K one-hot entries
    n: int


@torch.no_grad()
def treatment_accuracy(bundle: EncoderBundle, records, seed: int = 0) -> TreatmentAccuracy:
    """Sample one option per day from p2 and compare with the factual option."""
    if not bundle.model.variant.treatment_loss:
        raise ConfigError(f"variant {bundle.model.variant.label!r} has no treatment head")
    patients = to_arrays(records)
    probs = []
    for f in encoder_factors(bundle, patients):
        probs.append(bundle.model.propensities(f)["p2"].double().numpy())
    p = np.concatenate(probs)
    a = np.concatenate([pt.treatments for pt in patients])
    rng = np.random.default_rng(seed)
    u = rng.random(len(p))[:, None]
    sampled = (u > np.cumsum(p, axis=1)).sum(axis=1).clip(0, K_OPTIONS - 1)
    exact = float(np.mean(sampled == a))
    # a mismatch between one-hot vectors disagrees in exactly two entries
    elementwise = float(1.0 - 2.0 * (1.0 - exact) / K_OPTIONS)
    return TreatmentAccuracy(exact=exact, elementwise=elementwise, n=int(len(a)))


# --------------------------------------------------------------------------- history sweep


def history_sweep(encoder, decoder, records, tau: int, label: str = "history",
                  min_count: int = 1) -> MetricsReport:
    """NRMSE% of the offset-tau prediction grouped by history length (days observed, t + 1)."""
    if tau == 1:
        _require(records, "cf_encoder", "encoder counterfactual")
        preds = encoder_counterfactual_predictions(encoder, records)
        by_len: dict[int, tuple[list, list]] = {}
        for rec, pr in zip(records, preds):
            truth = np.asarray(rec["cf_encoder"])
            for t in range(len(truth)):
                ps, ys = by_len.setdefault(t + 1, ([], []))
                ps.append(pr[t])
                ys.append(truth[t])
        buckets = {h: (np.concatenate(ps), np.concatenate(ys)) for h, (ps, ys) in by_len.items()}
    else:
        ex, start = counterfactual_windows(encoder, records, tau)
        pred = decoder_predictions(encoder, getattr(decoder, "model", decoder), ex)[:, -1]
        truth = ex.truth.numpy()[:, -1]
        buckets = {int(h) + 1: (pred[start == h], truth[start == h]) for h in np.unique(start)}
    rows = []
    for h in range(1, max(buckets, default=0) + 1):
        if h not in buckets or len(buckets[h][0]) < min_count:
            warnings.warn(f"history bucket {h} is empty; omitted", stacklevel=2)
            continue
        p, y = buckets[h]
        rows.append({"history": h, "tau": tau, "nrmse_pct": nrmse(p, y), "n": int(len(y))})
    return MetricsReport(label=label, rows=rows)


def early_prediction_mean(curves: list[MetricsReport], max_history: int | None = None) -> MetricsReport:
    """Mean NRMSE% across several sweep curves (e.g. one per gamma), per history length."""
    acc: dict[int, list[float]] = {}
    for c in curves:
        for r in c.rows:
            if max_history is None or r["history"] <= max_history:
                acc.setdefault(r["history"], []).append(r["nrmse_pct"])
    rows = [{"history": h, "nrmse_pct": float(np.mean(v)), "n_curves": len(v)} for h, v in sorted(acc.items())]
    return MetricsReport(label="early_prediction_mean", rows=rows)


__all__ = [
    "MetricsReport", "V_MAX", "evaluate_encoder", "evaluate_decoder", "treatment_accuracy", "TreatmentAccuracy",
    "history_sweep", "early_prediction_mean", "encoder_counterfactual_predictions", "counterfactual_windows",
    "split_psi",
]
