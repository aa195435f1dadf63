import warnings

import numpy as np
import pytest
import torch

from tcilab.experiments import records_of
from tcilab.sim.simulate import SimConfig, generate_dataset
from tcilab.training import HyperParams, build_decoder_dataset, train_decoder, train_encoder

warnings.filterwarnings("ignore", message="history bucket")


@pytest.fixture(scope="session")
def tiny_dataset():
    cfg = SimConfig(gamma_c=5, gamma_r=5, tau=3, n_train=40, n_val=10, n_test=6, seed=3)
    return generate_dataset(cfg)


@pytest.fixture(scope="session")
def tiny_records(tiny_dataset):
    return {s: records_of(tiny_dataset.split(s)) for s in ("train", "val", "test")}


@pytest.fixture(scope="session")
def tiny_hp():
    return HyperParams(epochs_enc=2, epochs_dec=1, batch_enc=16, batch_dec=256, mlp_hidden=8,
                       recurrent_hidden_enc=8)


@pytest.fixture(scope="session")
def tiny_bundles(tiny_records, tiny_hp):
    enc = train_encoder(tiny_records["train"], tiny_records["val"], tiny_hp, seed=0)
    tr = build_decoder_dataset(enc, tiny_records["train"], 3)
    va = build_decoder_dataset(enc, tiny_records["val"], 3)
    dec = train_decoder(enc, tr, va, tiny_hp, seed=0)
    return enc, dec


@pytest.fixture(autouse=True)
def _torch_threads():
    torch.set_num_threads(1)
    yield


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))
