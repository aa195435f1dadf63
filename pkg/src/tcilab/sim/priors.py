"""Patient parameter priors.

Priors are a flat JSON list of ``{name, kind, params}`` entries evaluated in
order; later entries may read values set by earlier ones (``type_shift``,
``ratio``, ``stage_lognormal_diameter``).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from importlib import resources
from typing import Any

import numpy as np
from scipy.stats import truncnorm

from .dynamics import volume_from_diameter

STAGES = ("I", "II", "IIIA", "IIIB", "IV")
PATIENT_TYPES = (1, 2, 3)

REQUIRED = ("stage", "patient_type", "V0", "rho", "kappa", "beta_c", "alpha_r", "beta_r", "noise_sd")


class ConfigError(ValueError):
    """Invalid simulation or experiment configuration."""


@dataclass(frozen=True)
class PatientParams:
    initial_stage: str
    patient_type: int
    V0: float
    rho: float
    kappa: float
    beta_c: float
    alpha_r: float
    beta_r: float
    noise_sd: float

    def __post_init__(self):
        if not self.V0 > 0:
            raise ConfigError(f"V0 must be positive, got {self.V0}")
        if not self.kappa > self.V0:
            raise ConfigError(f"kappa ({self.kappa}) must exceed V0 ({self.V0})")
        for name in ("rho", "beta_c", "alpha_r", "beta_r", "noise_sd"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")

    def dyn_array(self) -> np.ndarray:
        return np.array([self.rho, self.kappa, self.beta_c, self.alpha_r, self.beta_r], dtype=np.float64)

    def to_dict(self) -> dict:
        return asdict(self)


def default_priors() -> list[dict]:
    text = resources.files("tcilab.sim").joinpath("priors_v1.json").read_text()
    return json.loads(text)


def load_priors(path) -> list[dict]:
    with open(path) as fh:
        priors = json.load(fh)
    validate_priors(priors)
    return priors


def point_mass_priors(**values) -> list[dict]:
    """Priors that put all mass on the given values (stage and type get defaults)."""
    values.setdefault("stage", "I")
    values.setdefault("patient_type", 1)
    for name in ("beta_c", "alpha_r", "beta_r"):
        values.setdefault(name, 0.0)
    return [{"name": k, "kind": "constant", "params": {"value": v}} for k, v in values.items()]


def _require_positive(entry, *keys):
    for key in keys:
        val = entry["params"][key]
        vals = val if isinstance(val, (list, tuple)) else [val]
        for v in vals:
            if not (isinstance(v, (int, float)) and v > 0):
                raise ConfigError(f"prior {entry['name']!r}: {key} must be positive, got {val!r}")


def validate_priors(priors: list[dict]) -> None:
    if not isinstance(priors, list):
        raise ConfigError("priors must be a JSON list of {name, kind, params}")
    seen = set()
    for entry in priors:
        if set(entry) != {"name", "kind", "params"}:
            raise ConfigError(f"malformed prior entry: {entry!r}")
        kind, p = entry["kind"], entry["params"]
        if kind == "constant":
            pass
        elif kind == "categorical":
            if len(p["values"]) != len(p["weights"]) or not p["values"]:
                raise ConfigError(f"prior {entry['name']!r}: values/weights mismatch")
            if any(w < 0 for w in p["weights"]) or sum(p["weights"]) <= 0:
                raise ConfigError(f"prior {entry['name']!r}: weights must be >= 0 with positive sum")
        elif kind == "truncated_normal":
            _require_positive(entry, "sd")
        elif kind == "positive_bivariate_normal":
            _require_positive(entry, "sd")
            if not -1 < p["corr"] < 1:
                raise ConfigError(f"prior {entry['name']!r}: corr must lie in (-1, 1)")
            seen.add(p["partner"])
        elif kind == "stage_lognormal_diameter":
            for stage, (mu, sigma, lo, hi) in p["by_stage"].items():
                if sigma <= 0 or lo <= 0 or hi <= lo:
                    raise ConfigError(f"prior {entry['name']!r}: bad lognormal params for stage {stage}")
        elif kind == "sphere_volume":
            _require_positive(entry, "diameter")
        elif kind == "ratio":
            _require_positive(entry, "divisor")
            if p["of"] not in seen:
                raise ConfigError(f"prior {entry['name']!r} refers to undefined {p['of']!r}")
        elif kind == "type_shift":
            if entry["name"] not in seen:
                raise ConfigError(f"type_shift on undefined {entry['name']!r}")
        else:
            raise ConfigError(f"unknown prior kind {kind!r}")
        seen.add(entry["name"])
    missing = [k for k in REQUIRED if k not in seen]
    if missing:
        raise ConfigError(f"priors do not define {missing}")


def _truncnorm(rng, mean, sd, lower, upper):
    a = -np.inf if lower is None else (lower - mean) / sd
    b = np.inf if upper is None else (upper - mean) / sd
    return float(mean + sd * truncnorm.rvs(a, b, random_state=rng))


def sample_patient_params(rng: np.random.Generator, priors: list[dict]) -> PatientParams:
    """Draw one patient's parameters; deterministic in the state of ``rng``."""
    validate_priors(priors)
    vals: dict[str, Any] = {}
    for entry in priors:
        name, kind, p = entry["name"], entry["kind"], entry["params"]
        if kind == "constant":
            vals[name] = p["value"]
        elif kind == "categorical":
            w = np.asarray(p["weights"], dtype=float)
            vals[name] = p["values"][int(rng.choice(len(w), p=w / w.sum()))]
        elif kind == "truncated_normal":
            vals[name] = _truncnorm(rng, p["mean"], p["sd"], p.get("lower"), p.get("upper"))
        elif kind == "positive_bivariate_normal":
            (m1, m2), (s1, s2), r = p["mean"], p["sd"], p["corr"]
            cov = [[s1 * s1, r * s1 * s2], [r * s1 * s2, s2 * s2]]
            while True:
                x, y = rng.multivariate_normal([m1, m2], cov)
                if x > 0 and y > 0:
                    break
            vals[name], vals[p["partner"]] = float(x), float(y)
        elif kind == "stage_lognormal_diameter":
            mu, sigma, lo, hi = p["by_stage"][vals["stage"]]
            a, b = (math.log(lo) - mu) / sigma, (math.log(hi) - mu) / sigma
            z = float(truncnorm.rvs(a, b, random_state=rng))
            vals[name] = volume_from_diameter(math.exp(z * sigma + mu))
        elif kind == "sphere_volume":
            vals[name] = volume_from_diameter(p["diameter"])
        elif kind == "ratio":
            vals[name] = vals[p["of"]] / p["divisor"]
        elif kind == "type_shift":
            if vals["patient_type"] in p["types"]:
                vals[name] = vals[name] + p["shift"]
    return PatientParams(
        initial_stage=str(vals["stage"]),
        patient_type=int(vals["patient_type"]),
        V0=float(vals["V0"]),
        rho=float(vals["rho"]),
        kappa=float(vals["kappa"]),
        beta_c=float(vals["beta_c"]),
        alpha_r=float(vals["alpha_r"]),
        beta_r=float(vals["beta_r"]),
        noise_sd=float(vals["noise_sd"]),
    )
