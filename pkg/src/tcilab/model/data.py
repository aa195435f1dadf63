"""Turn dataset records into padded tensors."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import torch

from ..sim.dynamics import K_OPTIONS
from ..sim.priors import PATIENT_TYPES, STAGES

STATIC_DIM = len(STAGES) + len(PATIENT_TYPES)
# per-step encoder input: scaled volume, scaled carried concentration, previous one-hot, static
ENCODER_INPUT_DIM = 2 + K_OPTIONS + STATIC_DIM
# per-step decoder input: static, previous outcome, previous one-hot
DECODER_INPUT_DIM = STATIC_DIM + 1 + K_OPTIONS


def static_vector(static: dict) -> np.ndarray:
    v = np.zeros(STATIC_DIM)
    v[STAGES.index(static["stage"])] = 1.0
    v[len(STAGES) + PATIENT_TYPES.index(static["patient_type"])] = 1.0
    return v


@dataclass
class Scaler:
    """Standardisation of volume and concentration, fitted on the training split."""

    v_mean: float
    v_std: float
    c_mean: float
    c_std: float

    @classmethod
    def fit(cls, records: list[dict]) -> "Scaler":
        vol = np.array([s["covariates"][0] for r in records for s in r["steps"]])
        conc = np.array([s["covariates"][1] for r in records for s in r["steps"]])
        return cls(float(vol.mean()), float(vol.std() or 1.0), float(conc.mean()), float(conc.std() or 1.0))

    def vol(self, v):
        return (np.asarray(v, dtype=np.float64) - self.v_mean) / self.v_std

    def unvol(self, z):
        return np.asarray(z, dtype=np.float64) * self.v_std + self.v_mean

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PatientArrays:
    volumes: np.ndarray  # (T + 1,) raw, days 0..T
    conc_carried: np.ndarray  # (T,) raw
    treatments: np.ndarray  # (T,) option indices
    static: np.ndarray  # (STATIC_DIM,)

    @property
    def T(self) -> int:
        return len(self.treatments)

    @classmethod
    def from_record(cls, rec: dict) -> "PatientArrays":
        steps = rec["steps"]
        vols = [s["covariates"][0] for s in steps] + [steps[-1]["outcome"]]
        return cls(
            volumes=np.array(vols, dtype=np.float64),
            conc_carried=np.array([s["covariates"][1] for s in steps], dtype=np.float64),
            treatments=np.array([int(np.argmax(s["treatment_onehot"])) for s in steps], dtype=np.int64),
            static=static_vector(rec["static"]),
        )


def to_arrays(records: list[dict]) -> list[PatientArrays]:
    return [PatientArrays.from_record(r) for r in records]


def treatment_marginals(patients: list[PatientArrays], k: int = K_OPTIONS) -> np.ndarray:
    """Empirical option frequencies; a pseudo-count keeps every entry positive."""
    counts = np.zeros(k)
    for p in patients:
        counts += np.bincount(p.treatments, minlength=k)
    counts += 1e-3
    return counts / counts.sum()


@dataclass
class EncoderBatch:
    inputs: torch.Tensor  # (B, T, ENCODER_INPUT_DIM)
    treatments: torch.Tensor  # (B, T) long
    targets: torch.Tensor  # (B, T) scaled next-day volume
    mask: torch.Tensor  # (B, T) bool
    lengths: torch.Tensor  # (B,)


def encoder_batch(patients: list[PatientArrays], scaler: Scaler, dtype=torch.float32) -> EncoderBatch:
    B = len(patients)
    T = max(p.T for p in patients)
    x = np.zeros((B, T, ENCODER_INPUT_DIM))
    a = np.zeros((B, T), dtype=np.int64)
    y = np.zeros((B, T))
    mask = np.zeros((B, T), dtype=bool)
    for i, p in enumerate(patients):
        n = p.T
        x[i, :n, 0] = scaler.vol(p.volumes[:n])
        x[i, :n, 1] = (p.conc_carried - scaler.c_mean) / scaler.c_std
        prev = np.concatenate([[-1], p.treatments[:-1]])
        for t in range(1, n):
            x[i, t, 2 + prev[t]] = 1.0
        x[i, :n, 2 + K_OPTIONS:] = p.static
        a[i, :n] = p.treatments
        y[i, :n] = scaler.vol(p.volumes[1:n + 1])
        mask[i, :n] = True
    return EncoderBatch(
        inputs=torch.as_tensor(x, dtype=dtype),
        treatments=torch.as_tensor(a),
        targets=torch.as_tensor(y, dtype=dtype),
        mask=torch.as_tensor(mask),
        lengths=torch.as_tensor([p.T for p in patients]),
    )
