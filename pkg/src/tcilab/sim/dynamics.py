"""Scalar tumour dynamics and the treatment assignment policy.

Volumes are in cm^3, diameters in cm, chemotherapy concentration in
arbitrary units and radiotherapy dose in Gy. Tumours are treated as spheres.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

K_OPTIONS = 4
OPTION_NAMES = ("none", "chemo", "radio", "both")

D_MAX = 13.0
CHEMO_DOSE = 5.0
RADIO_DOSE = 2.0


class SimulationDomainError(ValueError):
    """Raised when a dynamics function is evaluated outside its domain."""


def diameter_from_volume(volume: float) -> float:
    if volume < 0:
        raise SimulationDomainError(f"volume must be >= 0, got {volume}")
    return 2.0 * math.pow(3.0 * volume / (4.0 * math.pi), 1.0 / 3.0)


def volume_from_diameter(diameter: float) -> float:
    return 4.0 / 3.0 * math.pi * math.pow(diameter / 2.0, 3.0)


DEATH_VOLUME = volume_from_diameter(D_MAX)
RECOVERY_VOLUME = 0.01


@dataclass(frozen=True)
class TreatmentVector:
    """One of the four chemo/radio combinations.

    The option index packs the two binary decisions as ``chemo + 2 * radio``,
    so 0 = none, 1 = chemo, 2 = radio, 3 = both.
    """

    index: int

    def __post_init__(self):
        if not 0 <= self.index < K_OPTIONS:
            raise ValueError(f"treatment index out of range: {self.index}")

    @classmethod
    def from_flags(cls, chemo: bool, radio: bool) -> "TreatmentVector":
        return cls(int(bool(chemo)) + 2 * int(bool(radio)))

    @classmethod
    def from_onehot(cls, onehot) -> "TreatmentVector":
        arr = np.asarray(onehot)
        if arr.shape != (K_OPTIONS,) or arr.sum() != 1 or not np.isin(arr, (0, 1)).all():
            raise ValueError(f"not a one-hot treatment vector: {onehot!r}")
        return cls(int(np.argmax(arr)))

    @property
    def chemo(self) -> bool:
        return bool(self.index & 1)

    @property
    def radio(self) -> bool:
        return bool(self.index & 2)

    @property
    def onehot(self) -> list[int]:
        out = [0] * K_OPTIONS
        out[self.index] = 1
        return out

    @property
    def name(self) -> str:
        return OPTION_NAMES[self.index]


def step_volume(V_t: float, C_t: float, d_t: float, e_t: float, params) -> float:
    """Advance the tumour volume by one day.

    ``params`` needs ``rho``, ``kappa``, ``beta_c``, ``alpha_r`` and ``beta_r``.
    The result is clamped at zero; callers decide what to do with volumes
    above the death threshold.
    """
    if V_t <= 0:
        raise SimulationDomainError(f"V_t must be > 0, got {V_t}")
    factor = (1.0 + params.rho * math.log(params.kappa / V_t)
              - params.beta_c * C_t
              - (params.alpha_r * d_t + params.beta_r * d_t * d_t)
              + e_t)
    return max(factor * V_t, 0.0)


def update_chemo_concentration(C_prev: float, chemo_applied: bool, literal: bool = False) -> float:
    """Concentration after one day: half-life of one day plus a dose of 5.

    With ``literal=True`` the dose is added every day whether or not
    chemotherapy is applied.
    """
    if C_prev < 0:
        raise SimulationDomainError(f"C_prev must be >= 0, got {C_prev}")
    if literal or chemo_applied:
        return C_prev / 2.0 + CHEMO_DOSE
    return C_prev / 2.0


def sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


def treatment_probabilities(D_bar: float, gamma_c: float, gamma_r: float,
                            d_max: float = D_MAX) -> tuple[float, float]:
    """(p_chemo, p_radio) for a mean recent diameter ``D_bar``."""
    delta = d_max / 2.0
    p_c = sigmoid(gamma_c / d_max * (D_bar - delta))
    p_r = sigmoid(gamma_r / d_max * (D_bar - delta))
    return p_c, p_r


def assign_treatment(D_bar: float, gamma_c: float, gamma_r: float,
                     rng: np.random.Generator) -> TreatmentVector:
    if D_bar < 0:
        raise SimulationDomainError(f"D_bar must be >= 0, got {D_bar}")
    p_c, p_r = treatment_probabilities(D_bar, gamma_c, gamma_r)
    # chemo uniform first, then radio; the trajectory kernel uses the same order
    chemo = rng.random() < p_c
    radio = rng.random() < p_r
    return TreatmentVector.from_flags(chemo, radio)


def mean_recent_diameter(volumes, t: int, window: int = 15) -> float:
    """Mean diameter over days ``max(0, t - window + 1) .. t`` inclusive."""
    start = max(0, t - window + 1)
    total = 0.0
    for s in range(start, t + 1):
        total += diameter_from_volume(volumes[s])
    return total / (t + 1 - start)
