"""Two-stage training (encoder, then decoder), decoder dataset construction, grid search."""
from __future__ import annotations

import copy
import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np
import torch

from .metrics import nrmse
from .model.checkpoint import module_hash
from .model.data import PatientArrays, Scaler, encoder_batch, to_arrays, treatment_marginals
from .model.decoder import Decoder, rollout
from .model.encoder import Encoder
from .model.losses import OMEGA_MAX, OMEGA_MIN, ClipCounter
from .model.networks import FACTORS
from .sim.priors import ConfigError

log = logging.getLogger(__name__)

TABLE5_GRID = {
    "mlp_hidden": [50, 100],
    "recurrent_hidden_enc": [50, 100, 150],
    "beta_enc": [0.1, 0.4, 0.7, 1.0],
    "beta_dec": [0.1, 0.4, 0.7, 1.0],
}


@dataclass
class HyperParams:
    epochs_enc: int = 100
    epochs_dec: int = 50
    batch_enc: int = 256
    batch_dec: int = 1024
    learning_rate: float = 0.001
    mlp_hidden: int = 50
    recurrent_hidden_enc: int = 50
    dropout: float = 0.1
    beta_enc: float = 0.4
    beta_dec: float = 0.4
    variant: str = "full"
    grad_clip: float = 1.0
    omega_min: float = OMEGA_MIN
    omega_max: float = OMEGA_MAX
    imbalance: str = "ce"

    def validate(self) -> None:
        if self.epochs_enc < 0 or self.epochs_dec < 0:
            raise ConfigError("epochs must be >= 0")
        if self.batch_enc < 1 or self.batch_dec < 1:
            raise ConfigError("batch sizes must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if not 0 <= self.dropout < 1:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.imbalance not in ("ce", "entropy"):
            raise ConfigError(f"imbalance must be 'ce' or 'entropy', got {self.imbalance!r}")
        if not 0 < self.omega_min < self.omega_max:
            raise ConfigError("need 0 < omega_min < omega_max")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {sorted(unknown)}")
        return cls(**d)


class TrainingDivergedError(RuntimeError):
    pass


@dataclass
class TrainReport:
    seed: int
    epochs: list = field(default_factory=list)
    selected_epoch: int | None = None
    checkpoint_hash: str | None = None
    wallclock: float = 0.0
    clip_events: int = 0
    clip_total: int = 0

    @property
    def val_series(self) -> list[float]:
        return [e["val_nrmse"] for e in self.epochs]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class EncoderBundle:
    """A trained encoder plus the data statistics it was trained with."""

    model: Encoder
    scaler: Scaler
    marginals: np.ndarray
    hp: HyperParams
    report: TrainReport

    def manifest(self) -> dict:
        return {"architecture": self.model.architecture(), "seed": self.report.seed,
                "beta": self.hp.beta_enc, "training_step": self.report.selected_epoch,
                "scaler": self.scaler.to_dict(), "marginals": self.marginals.tolist(),
                "hp": self.hp.to_dict()}


@dataclass
class DecoderBundle:
    model: Decoder
    encoder_hash: str
    tau: int
    hp: HyperParams
    report: TrainReport

    def manifest(self) -> dict:
        return {"architecture": self.model.architecture(), "seed": self.report.seed,
                "beta": self.hp.beta_dec, "training_step": self.report.selected_epoch,
                "encoder_hash": self.encoder_hash, "tau": self.tau, "hp": self.hp.to_dict()}


def _check_finite(loss: torch.Tensor, last_finite: float | None, where: str):
    if not torch.isfinite(loss):
        raise TrainingDivergedError(f"{where}: loss became {loss.item()}; last finite loss {last_finite}")


def select_epoch(series: list[float]) -> int:
    """Index of the minimum; ties go to the earliest."""
    best = 0
    for i, v in enumerate(series):
        if v < series[best]:
            best = i
    return best


# --------------------------------------------------------------------------- encoder


@torch.no_grad()
def encoder_predictions(encoder: Encoder, patients: list[PatientArrays], scaler: Scaler,
                        chunk: int = 512) -> list[np.ndarray]:
    """Factual next-day predictions (raw volume units), one array per patient."""
    encoder.eval()
    out = []
    for lo in range(0, len(patients), chunk):
        part = patients[lo:lo + chunk]
        b = encoder_batch(part, scaler, dtype=next(encoder.parameters()).dtype)
        s = encoder.states(b.inputs)
        f = encoder.disentangle(s)
        y_hat = encoder.predict_outcome(f, torch.nn.functional.one_hot(b.treatments, encoder.k).to(s.dtype))
        y_hat = scaler.unvol(y_hat.numpy())
        out.extend(y_hat[i, :p.T] for i, p in enumerate(part))
    return out


def factual_nrmse(encoder: Encoder, patients: list[PatientArrays], scaler: Scaler) -> float:
    if not patients:
        return float("nan")
    preds = encoder_predictions(encoder, patients, scaler)
    return nrmse(np.concatenate(preds), np.concatenate([p.volumes[1:] for p in patients]))


def train_encoder(train_records, val_records, hp: HyperParams, seed: int = 0) -> EncoderBundle:
    """Minimise the batch-mean encoder loss; keep the epoch with the lowest
    validation factual NRMSE%."""
    hp.validate()
    t0 = time.time()
    train = to_arrays(train_records)
    val = to_arrays(val_records)
    if not train:
        raise ConfigError("training split is empty")
    scaler = Scaler.fit(train_records)
    marginals = treatment_marginals(train)
    marg_t = torch.as_tensor(marginals, dtype=torch.float32)

    torch.manual_seed(seed)
    model = Encoder(hidden=hp.recurrent_hidden_enc, width=hp.mlp_hidden, variant=hp.variant, dropout=hp.dropout)
    opt = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=hp.learning_rate)
    rng = np.random.default_rng(seed)
    report = TrainReport(seed=seed)
    counter = ClipCounter()

    if hp.epochs_enc == 0:
        report.epochs.append({"epoch": 0, "val_nrmse": factual_nrmse(model, val, scaler)})
        best_state = copy.deepcopy(model.state_dict())
    last_finite = None
    best_val = math.inf
    for epoch in range(1, hp.epochs_enc + 1):
        model.train()
        order = rng.permutation(len(train))
        sums = {"total": 0.0, "P": 0.0, "T": 0.0, "W": 0.0, "I": 0.0}
        nb = 0
        for lo in range(0, len(order), hp.batch_enc):
            batch = encoder_batch([train[i] for i in order[lo:lo + hp.batch_enc]], scaler)
            out = model.losses(batch, marg_t, hp.beta_enc, imbalance=hp.imbalance, counter=counter,
                                omega_bounds=(hp.omega_min, hp.omega_max))
            _check_finite(out["total"], last_finite, f"encoder epoch {epoch}")
            opt.zero_grad()
            out["total"].backward()
            if hp.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), hp.grad_clip)
            opt.step()
            last_finite = out["total"].item()
            for key in sums:
                sums[key] += float(out[key].detach())
            nb += 1
        val_nrmse = factual_nrmse(model, val, scaler)
        row = {"epoch": epoch, **{f"loss_{k}": v / nb for k, v in sums.items()}, "val_nrmse": val_nrmse}
        report.epochs.append(row)
        log.debug("encoder %s", row)
        if val_nrmse < best_val or epoch == 1:
            best_val = val_nrmse
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    report.selected_epoch = report.epochs[select_epoch(report.val_series)]["epoch"]
    report.checkpoint_hash = module_hash(model)
    report.clip_events, report.clip_total = counter.clipped, counter.total
    report.wallclock = time.time() - t0
    return EncoderBundle(model=model, scaler=scaler, marginals=marginals, hp=hp, report=report)


# --------------------------------------------------------------------------- decoder data


@dataclass
class DecoderExamples:
    """Fixed-length windows starting at each eligible day.

    ``plan[:, j]`` is the treatment on day t + j and ``truth[:, j]`` the
    raw volume on day t + j + 1, for j = 0 .. tau - 1.
    """

    psi: torch.Tensor
    static: torch.Tensor
    plan: torch.Tensor
    truth: torch.Tensor
    patient: np.ndarray
    start: np.ndarray
    tau: int
    scaler: Scaler

    def __len__(self):
        return self.psi.shape[0]

    def subset(self, idx) -> "DecoderExamples":
        idx_t = torch.as_tensor(idx, dtype=torch.long)
        return replace(self, psi=self.psi[idx_t], static=self.static[idx_t], plan=self.plan[idx_t],
                       truth=self.truth[idx_t], patient=self.patient[idx], start=self.start[idx])


@dataclass
class DecoderBatch:
    psi: torch.Tensor
    static: torch.Tensor
    y_in: torch.Tensor
    a_prev: torch.Tensor
    a_cur: torch.Tensor
    targets: torch.Tensor
    mask: torch.Tensor


def decoder_batch(ex: DecoderExamples, dtype=torch.float32) -> DecoderBatch:
    scaled = torch.as_tensor(ex.scaler.vol(ex.truth.numpy()), dtype=dtype)
    return DecoderBatch(psi=ex.psi.to(dtype), static=ex.static.to(dtype), y_in=scaled[:, :-1],
                        a_prev=ex.plan[:, :-1], a_cur=ex.plan[:, 1:], targets=scaled[:, 1:],
                        mask=torch.ones(scaled[:, 1:].shape, dtype=torch.bool))


@torch.no_grad()
def encoder_factors(bundle: EncoderBundle, patients: list[PatientArrays], chunk: int = 512):
    """Per-patient encoder factors for every day, as dicts of (T, width) tensors."""
    model = bundle.model
    model.eval()
    out = []
    for lo in range(0, len(patients), chunk):
        part = patients[lo:lo + chunk]
        b = encoder_batch(part, bundle.scaler, dtype=next(model.parameters()).dtype)
        f = model.disentangle(model.states(b.inputs))
        for i, p in enumerate(part):
            out.append({k: v[i, :p.T] for k, v in f.items()})
    return out


def build_decoder_dataset(bundle: EncoderBundle, records, tau: int) -> DecoderExamples:
    """Windows for every day t with t < T - tau (T - tau windows per patient)."""
    if tau < 2:
        raise ConfigError("decoder dataset needs tau >= 2")
    patients = to_arrays(records)
    factors = encoder_factors(bundle, patients)
    psi, static, plan, truth, pid, start = [], [], [], [], [], []
    for i, (p, f) in enumerate(zip(patients, factors)):
        n = p.T - tau
        if n <= 0:
            continue
        u = torch.cat([f[k] for k in FACTORS if k in f], dim=-1)
        psi.append(u[:n])
        static.append(np.repeat(p.static[None], n, axis=0))
        idx = np.arange(n)[:, None] + np.arange(tau)[None]
        plan.append(p.treatments[idx])
        truth.append(p.volumes[idx + 1])
        pid.append(np.full(n, i))
        start.append(np.arange(n))
    width = bundle.model.psi_width
    if not psi:
        return DecoderExamples(psi=torch.zeros(0, width), static=torch.zeros(0, patients[0].static.size if patients else 0),
                               plan=torch.zeros(0, tau, dtype=torch.long), truth=torch.zeros(0, tau, dtype=torch.float64),
                               patient=np.zeros(0, int), start=np.zeros(0, int), tau=tau, scaler=bundle.scaler)
    return DecoderExamples(
        psi=torch.cat(psi).float(),
        static=torch.as_tensor(np.concatenate(static), dtype=torch.float32),
        plan=torch.as_tensor(np.concatenate(plan)),
        truth=torch.as_tensor(np.concatenate(truth)),
        patient=np.concatenate(pid),
        start=np.concatenate(start),
        tau=tau,
        scaler=bundle.scaler,
    )


def split_psi(psi: torch.Tensor, bundle_or_model) -> dict[str, torch.Tensor]:
    model = getattr(bundle_or_model, "model", bundle_or_model)
    w = model.width
    factors = [f for f in FACTORS if f in model.variant.factors]
    return {f: psi[..., i * w:(i + 1) * w] for i, f in enumerate(factors)}


@torch.no_grad()
def decoder_predictions(bundle: EncoderBundle, decoder: Decoder | None, ex: DecoderExamples,
                        plan: torch.Tensor | None = None, teacher: bool = False, chunk: int = 8192) -> np.ndarray:
    """Raw-unit rollouts (N, tau) for ``plan`` (defaults to the factual plan)."""
    plan = ex.plan if plan is None else plan
    enc = bundle.model
    enc.eval()
    if decoder is not None:
        decoder.eval()
    dtype = next(enc.parameters()).dtype
    out = []
    for lo in range(0, len(ex), chunk):
        sl = slice(lo, lo + chunk)
        factors = split_psi(ex.psi[sl].to(dtype), bundle)
        t_in = None
        if teacher:
            t_in = torch.as_tensor(ex.scaler.vol(ex.truth[sl, :-1].numpy()), dtype=dtype)
        y = rollout(enc, decoder, factors, ex.static[sl].to(dtype), None, plan[sl], teacher=t_in)
        out.append(ex.scaler.unvol(y.numpy()))
    return np.concatenate(out) if out else np.zeros((0, ex.tau))


def decoder_val_nrmse(bundle, decoder, ex: DecoderExamples, teacher: bool = False) -> float:
    if len(ex) == 0:
        return float("nan")
    pred = decoder_predictions(bundle, decoder, ex, teacher=teacher)
    return nrmse(pred[:, -1], ex.truth[:, -1].numpy())


def train_decoder(bundle: EncoderBundle, train_ex: DecoderExamples, val_ex: DecoderExamples,
                  hp: HyperParams, seed: int = 0) -> DecoderBundle:
    """Teacher-forced training of a fresh decoder; the encoder stays frozen.

    Selection uses the autoregressive factual NRMSE% at offset tau on the
    validation windows.
    """
    hp.validate()
    if len(train_ex) == 0:
        raise ConfigError("no decoder training windows; trajectories shorter than tau")
    t0 = time.time()
    enc = bundle.model
    for p in enc.parameters():
        p.requires_grad_(False)
    enc_hash = module_hash(enc)

    torch.manual_seed(seed)
    model = Decoder(psi_width=enc.psi_width, width=hp.mlp_hidden, variant=hp.variant, dropout=hp.dropout)
    opt = torch.optim.Adam([p for p in model.parameters() if p.requires_grad], lr=hp.learning_rate)
    marg_t = torch.as_tensor(bundle.marginals, dtype=torch.float32)
    rng = np.random.default_rng(seed)
    report = TrainReport(seed=seed)
    counter = ClipCounter()
    if hp.epochs_dec == 0:
        report.epochs.append({"epoch": 0, "val_nrmse": decoder_val_nrmse(bundle, model, val_ex)})
        best_state = copy.deepcopy(model.state_dict())
    last_finite = None
    best_val = math.inf
    for epoch in range(1, hp.epochs_dec + 1):
        model.train()
        order = rng.permutation(len(train_ex))
        sums = {"total": 0.0, "P": 0.0, "T": 0.0, "W": 0.0, "I": 0.0}
        nb = 0
        for lo in range(0, len(order), hp.batch_dec):
            batch = decoder_batch(train_ex.subset(order[lo:lo + hp.batch_dec]))
            out = model.losses(batch, marg_t, hp.beta_dec, imbalance=hp.imbalance, counter=counter,
                                omega_bounds=(hp.omega_min, hp.omega_max))
            _check_finite(out["total"], last_finite, f"decoder epoch {epoch}")
            opt.zero_grad()
            out["total"].backward()
            if hp.grad_clip:
                torch.nn.utils.clip_grad_norm_(model.parameters(), hp.grad_clip)
            opt.step()
            last_finite = out["total"].item()
            for key in sums:
                sums[key] += float(out[key].detach())
            nb += 1
        val = decoder_val_nrmse(bundle, model, val_ex)
        val_tf = decoder_val_nrmse(bundle, model, val_ex, teacher=True)
        row = {"epoch": epoch, **{f"loss_{k}": v / nb for k, v in sums.items()},
               "val_nrmse": val, "val_nrmse_teacher": val_tf}
        report.epochs.append(row)
        log.debug("decoder %s", row)
        if val < best_val or epoch == 1:
            best_val = val
            best_state = copy.deepcopy(model.state_dict())

    model.load_state_dict(best_state)
    model.eval()
    if module_hash(enc) != enc_hash:
        raise RuntimeError("encoder parameters changed during decoder training")
    report.selected_epoch = report.epochs[select_epoch(report.val_series)]["epoch"]
    report.checkpoint_hash = module_hash(model)
    report.clip_events, report.clip_total = counter.clipped, counter.total
    report.wallclock = time.time() - t0
    return DecoderBundle(model=model, encoder_hash=enc_hash, tau=train_ex.tau, hp=hp, report=report)


# --------------------------------------------------------------------------- grid search


def expand_grid(grid: dict, base: HyperParams) -> list[HyperParams]:
    if not grid:
        raise ConfigError("hyperparameter grid is empty")
    keys = sorted(grid)
    for k in keys:
        if not grid[k]:
            raise ConfigError(f"grid axis {k!r} is empty")
    return [replace(base, **dict(zip(keys, combo))) for combo in itertools.product(*(grid[k] for k in keys))]


def _grid_job(args):
    hp, train_records, val_records, seed, tau = args
    t0 = time.time()
    enc = train_encoder(train_records, val_records, hp, seed)
    val = min(enc.report.val_series)
    if tau and tau > 1 and hp.epochs_dec > 0:
        tr = build_decoder_dataset(enc, train_records, tau)
        va = build_decoder_dataset(enc, val_records, tau)
        dec = train_decoder(enc, tr, va, hp, seed)
        val_dec = min(dec.report.val_series)
    else:
        val_dec = None
    return {"hp": hp, "val_nrmse": val, "val_nrmse_dec": val_dec, "wallclock": time.time() - t0}


def hyperparameter_search(grid: dict, train_records, val_records, base: HyperParams | None = None,
                          budget: int | None = None, seed: int = 0, tau: int | None = None,
                          jobs: int = 1) -> tuple[HyperParams, list[dict]]:
    """Evaluate grid configurations and pick the lowest validation factual NRMSE%.

    With ``tau > 1`` each configuration also trains a decoder and selection
    uses the decoder's offset-tau validation NRMSE%. ``budget`` caps the
    number of configurations, taken from a seeded shuffle of the grid.
    """
    configs = expand_grid(grid, base or HyperParams())
    if budget is not None and budget < len(configs):
        order = np.random.default_rng(seed).permutation(len(configs))[:budget]
        configs = [configs[i] for i in sorted(order)]
    tasks = [(hp, train_records, val_records, seed, tau) for hp in configs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_grid_job, tasks))
    else:
        results = [_grid_job(t) for t in tasks]
    leaderboard = []
    for i, r in enumerate(results):
        score = r["val_nrmse_dec"] if r["val_nrmse_dec"] is not None else r["val_nrmse"]
        leaderboard.append({"config_id": i, **{k: getattr(r["hp"], k) for k in sorted(grid)},
                            "val_nrmse": score, "val_nrmse_enc": r["val_nrmse"],
                            "wallclock": r["wallclock"], "seed": seed})
    best = select_epoch([row["val_nrmse"] for row in leaderboard])
    return results[best]["hp"], leaderboard
