"""Factual trajectories, counterfactual annotations and dataset generation."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernel
from .dynamics import CHEMO_DOSE, D_MAX, DEATH_VOLUME, K_OPTIONS, RADIO_DOSE, RECOVERY_VOLUME
from .priors import ConfigError, PatientParams, default_priors, sample_patient_params, validate_priors

log = logging.getLogger(__name__)

TERMINATION = ("horizon", "death", "recovery")
SPLITS = ("train", "val", "test")
_SPLIT_CODES = {"train": 0, "val": 1, "test": 2}
FORMAT_VERSION = 1


@dataclass
class SimConfig:
    gamma_c: float = 5.0
    gamma_r: float = 5.0
    tau: int = 5
    horizon: int = 60
    window: int = 15
    n_train: int = 10000
    n_val: int = 1000
    n_test: int = 1000
    seed: int = 100
    literal_chemo: bool = False
    d_max: float = D_MAX
    death_volume: float = DEATH_VOLUME
    recovery_volume: float = RECOVERY_VOLUME
    priors: list = field(default_factory=default_priors)

    def validate(self) -> None:
        for name in ("gamma_c", "gamma_r"):
            g = getattr(self, name)
            if not 0 <= g <= 10:
                raise ConfigError(f"{name} must lie in [0, 10], got {g}")
        if self.tau < 1:
            raise ConfigError(f"tau must be >= 1, got {self.tau}")
        if self.horizon < 1 or self.window < 1:
            raise ConfigError("horizon and window must be >= 1")
        if min(self.n_train, self.n_val, self.n_test) < 0:
            raise ConfigError("split sizes must be >= 0")
        validate_priors(self.priors)

    def split_size(self, split: str) -> int:
        return {"train": self.n_train, "val": self.n_val, "test": self.n_test}[split]

    def to_dict(self) -> dict:
        return asdict(self)

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def policy_array(config: SimConfig, force_probs=None) -> np.ndarray:
    fc, fr = force_probs if force_probs is not None else (-1.0, -1.0)
    return np.array([config.gamma_c, config.gamma_r, config.d_max, config.death_volume,
                     config.recovery_volume, CHEMO_DOSE, RADIO_DOSE, fc, fr], dtype=np.float64)


@dataclass
class PatientTrajectory:
    """One simulated patient.

    ``volumes`` has ``T + 1`` entries (day 0 .. T); day-t covariates are the
    volume on day t and the chemo concentration carried over from day t-1,
    so they never reveal the treatment chosen on day t.
    """

    id: int
    params: PatientParams
    volumes: np.ndarray
    concentrations: np.ndarray
    treatments: np.ndarray
    noise: np.ndarray
    termination: str
    cf_encoder: np.ndarray | None = None
    cf_decoder: dict | None = None

    @property
    def T(self) -> int:
        return len(self.treatments)

    @property
    def outcomes(self) -> np.ndarray:
        return self.volumes[1:]

    @property
    def covariates(self) -> np.ndarray:
        carried = np.concatenate([[0.0], self.concentrations[:-1]])
        return np.stack([self.volumes[:-1], carried], axis=1)

    @property
    def static(self) -> dict:
        return {"stage": self.params.initial_stage, "patient_type": self.params.patient_type}

    def to_record(self) -> dict:
        cov = self.covariates
        steps = []
        for t in range(self.T):
            onehot = [0] * K_OPTIONS
            onehot[int(self.treatments[t])] = 1
            steps.append({
                "t": t,
                "covariates": [float(cov[t, 0]), float(cov[t, 1])],
                "treatment_onehot": onehot,
                "outcome": float(self.volumes[t + 1]),
            })
        return {
            "id": self.id,
            "static": self.static,
            "steps": steps,
            "cf_encoder": None if self.cf_encoder is None else self.cf_encoder.tolist(),
            "cf_decoder": self.cf_decoder,
            "termination": self.termination,
        }


def simulate_trajectory(params: PatientParams, gamma_c: float, gamma_r: float, horizon: int = 60,
                        rng: np.random.Generator | None = None, *, config: SimConfig | None = None,
                        force_probs=None, patient_id: int = 0) -> PatientTrajectory:
    """Simulate a factual trajectory.

    Random draws are taken in a fixed order (noise, chemo uniforms, radio
    uniforms) so the trajectory is a pure function of the generator state.
    ``force_probs=(p_c, p_r)`` overrides the assignment policy.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    base = config if config is not None else SimConfig()
    pol = policy_array(base, force_probs)
    pol[0], pol[1] = gamma_c, gamma_r
    noise = rng.standard_normal(horizon) * params.noise_sd
    u_chemo = rng.random(horizon)
    u_radio = rng.random(horizon)
    volumes = np.zeros(horizon + 1)
    conc = np.zeros(horizon)
    chemo = np.zeros(horizon, dtype=np.int8)
    radio = np.zeros(horizon, dtype=np.int8)
    T, reason = kernel.simulate_patient(params.V0, params.dyn_array(), pol, noise, u_chemo, u_radio,
                                        horizon, base.window, base.literal_chemo,
                                        volumes, conc, chemo, radio)
    treatments = chemo[:T].astype(np.int64) + 2 * radio[:T].astype(np.int64)
    return PatientTrajectory(id=patient_id, params=params, volumes=volumes[:T + 1].copy(),
                             concentrations=conc[:T].copy(), treatments=treatments,
                             noise=noise, termination=TERMINATION[reason])


def annotate_counterfactuals_encoder(traj: PatientTrajectory, config: SimConfig | None = None) -> np.ndarray:
    """(T, K) next-day volumes under each option, reusing the factual noise."""
    config = config or SimConfig()
    out = np.zeros((traj.T, K_OPTIONS))
    kernel.one_step_all_options(traj.volumes, np.ascontiguousarray(traj.concentrations), traj.T,
                                traj.noise, traj.params.dyn_array(), policy_array(config),
                                config.literal_chemo, out)
    return out


def decoder_plans(tau: int) -> np.ndarray:
    """The 2*tau single-application plans: chemo at offset j, then radio at offset j."""
    plans = np.zeros((2 * tau, tau), dtype=np.int64)
    for j in range(tau):
        plans[j, j] = 1
        plans[tau + j, j] = 2
    return plans


def eligible_starts(T: int, tau: int) -> range:
    """Start days with at least ``tau`` further factual days after them."""
    return range(max(T - tau, 0))


def annotate_counterfactuals_decoder(traj: PatientTrajectory, tau: int,
                                     config: SimConfig | None = None) -> dict:
    """Outcomes of every plan in :func:`decoder_plans`, from every eligible day.

    Sequences start from the factual state on day t and reuse the factual
    noise draws e(t) .. e(t + tau - 1).
    """
    if tau < 2:
        raise ValueError(f"decoder annotation needs tau >= 2, got {tau}")
    config = config or SimConfig()
    plans = decoder_plans(tau)
    chemo_plans = (plans & 1).astype(np.int8)
    radio_plans = ((plans & 2) >> 1).astype(np.int8)
    dyn = traj.params.dyn_array()
    pol = policy_array(config)
    starts = eligible_starts(traj.T, tau)
    out = np.zeros((len(starts), 2 * tau, tau))
    kernel.plan_rollouts(traj.volumes, np.ascontiguousarray(traj.concentrations), len(starts), traj.noise,
                         chemo_plans, radio_plans, dyn, pol, config.literal_chemo, out)
    timesteps = [{"t": t, "outcomes": out[t].tolist()} for t in starts]
    return {"tau": tau, "plans": plans.tolist(), "timesteps": timesteps}


def patient_rng(seed: int, split: str, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, _SPLIT_CODES[split], index]))


def simulate_patient_record(config: SimConfig, split: str, index: int) -> PatientTrajectory:
    rng = patient_rng(config.seed, split, index)
    params = sample_patient_params(rng, config.priors)
    traj = simulate_trajectory(params, config.gamma_c, config.gamma_r, config.horizon, rng,
                               config=config, patient_id=index)
    if split == "test":
        traj.cf_encoder = annotate_counterfactuals_encoder(traj, config)
        if config.tau > 1:
            traj.cf_decoder = annotate_counterfactuals_decoder(traj, config.tau, config)
    return traj


def _simulate_chunk(args):
    config, split, lo, hi = args
    return [simulate_patient_record(config, split, i) for i in range(lo, hi)]


@dataclass
class Dataset:
    config: SimConfig
    train: list
    val: list
    test: list

    def split(self, name: str) -> list:
        return getattr(self, name)

    def manifest(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "fingerprint": self.config.fingerprint(),
            "gamma_c": self.config.gamma_c,
            "gamma_r": self.config.gamma_r,
            "tau": self.config.tau,
            "seed": self.config.seed,
            "sizes": {s: len(self.split(s)) for s in SPLITS},
            "config": self.config.to_dict(),
        }


def generate_dataset(config: SimConfig, jobs: int = 1) -> Dataset:
    """Simulate all three splits; each patient owns an index-derived RNG stream,
    so the result does not depend on ``jobs``."""
    config.validate()
    splits = {}
    for split in SPLITS:
        n = config.split_size(split)
        if jobs > 1 and n > 1:
            bounds = np.linspace(0, n, jobs + 1).astype(int)
            tasks = [(config, split, int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                splits[split] = [t for chunk in pool.map(_simulate_chunk, tasks) for t in chunk]
        else:
            splits[split] = _simulate_chunk((config, split, 0, n))
        log.info("simulated %d %s patients", n, split)
    return Dataset(config=config, **splits)


def save_dataset(dataset: Dataset, directory) -> dict[str, str]:
    """Write ``{train,val,test}.jsonl`` plus ``manifest.json``; returns file sha256s."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
        hashes = {}
        for split in SPLITS:
            path = directory / f"{split}.jsonl"
            with open(path, "w") as fh:
                for traj in dataset.split(split):
                    fh.write(json.dumps(traj.to_record(), separators=(",", ":")))
                    fh.write("\n")
            hashes[path.name] = file_sha256(path)
        manifest = dataset.manifest()
        manifest["files"] = hashes
        mpath = directory / "manifest.json"
        mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    except OSError as exc:
        raise OSError(f"failed to write dataset to {directory}: {exc}") from exc
    return hashes


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dataset_hash(directory) -> str:
    """Hash over the three split files, in split order."""
    h = hashlib.sha256()
    for split in SPLITS:
        h.update(file_sha256(Path(directory) / f"{split}.jsonl").encode())
    return h.hexdigest()


def load_records(directory, split: str) -> list[dict]:
    path = Path(directory) / f"{split}.jsonl"
    if not path.exists():
        raise FileNotFoundError(f"dataset split not found: {path}")
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def load_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"dataset manifest not found: {path}")
    return json.loads(path.read_text())


def default_jobs() -> int:
    return int(os.environ.get("TCILAB_JOBS", "1"))
