"""Analytic gradients versus central finite differences, double precision.

A five-point stencil with step 1e-4 keeps both truncation (about 1e-16)
and rounding (about 1e-12) error far below the tolerance.

The importance weight is computed once and held fixed, as it is during
training. Relative error uses max(|analytic|, |numeric|, 1e-6) as the
denominator so entries that are zero analytically are compared absolutely.
"""
import time

import numpy as np
import pytest
import torch

from tcilab.model.data import PatientArrays, Scaler, encoder_batch
from tcilab.model.decoder import Decoder
from tcilab.model.encoder import Encoder
from tcilab.training import DecoderBatch

D = torch.float64
H = 1e-4
TOL = 1e-4
TERMS = ("P", "T", "W", "I", "total")


def _patients():
    rng = np.random.default_rng(0)
    out = []
    for i in range(3):
        out.append(PatientArrays(volumes=rng.uniform(5, 300, 5), conc_carried=rng.uniform(0, 7, 4),
                                 treatments=np.array([0, 1, 2, 3])[np.roll(np.arange(4), i)],
                                 static=np.eye(8)[i % 8]))
    return out


def _check(model, loss_fn):
    params = [p for p in model.parameters() if p.requires_grad]
    worst = {}
    for term in TERMS:
        model.zero_grad(set_to_none=True)
        value = loss_fn()[term]
        if not value.requires_grad:  # term inactive in this variant
            continue
        value.backward()
        analytic = [torch.zeros_like(p) if p.grad is None else p.grad.detach().clone() for p in params]
        err = 0.0
        with torch.no_grad():
            for p, g in zip(params, analytic):
                flat, gflat = p.view(-1), g.view(-1)
                for j in range(flat.numel()):
                    orig = flat[j].item()
                    f = {}
                    for step in (-2, -1, 1, 2):
                        flat[j] = orig + step * H
                        f[step] = loss_fn()[term].item()
                    flat[j] = orig
                    # five-point central stencil: truncation error O(H^4)
                    num = (f[-2] - 8 * f[-1] + 8 * f[1] - f[2]) / (12 * H)
                    a = gflat[j].item()
                    err = max(err, abs(a - num) / max(abs(a), abs(num), 1e-6))
        worst[term] = err
    return worst


@pytest.mark.parametrize("variant", ["full", "Y_only", "Y+D", "Y+G"])
def test_encoder_gradients(variant):
    t0 = time.time()
    torch.manual_seed(0)
    enc = Encoder(hidden=4, width=3, variant=variant, dropout=0.0).double().eval()
    pats = _patients()
    batch = encoder_batch(pats, Scaler(150.0, 80.0, 3.0, 2.0), dtype=D)
    marg = torch.tensor([0.4, 0.3, 0.2, 0.1], dtype=D)
    with torch.no_grad():
        omega = enc.losses(batch, marg, 0.4)["omega"].detach()

    def loss():
        return enc.losses(batch, marg, 0.4, omega=omega)

    worst = _check(enc, loss)
    assert max(worst.values()) < TOL, worst
    assert time.time() - t0 < 60


@pytest.mark.parametrize("variant", ["full", "Y_only"])
def test_decoder_gradients(variant):
    torch.manual_seed(1)
    dec = Decoder(psi_width=6, width=3, variant=variant, dropout=0.0).double().eval()
    B, tau = 3, 5
    gen = torch.Generator().manual_seed(3)
    batch = DecoderBatch(psi=torch.randn(B, 6, dtype=D, generator=gen),
                         static=torch.eye(8, dtype=D)[:B],
                         y_in=torch.randn(B, tau - 1, dtype=D, generator=gen),
                         a_prev=torch.tensor([[0, 1, 2, 3], [1, 2, 3, 0], [3, 3, 0, 1]]),
                         a_cur=torch.tensor([[1, 2, 3, 0], [2, 3, 0, 1], [3, 0, 1, 2]]),
                         targets=torch.randn(B, tau - 1, dtype=D, generator=gen),
                         mask=torch.ones(B, tau - 1, dtype=torch.bool))
    marg = torch.tensor([0.4, 0.3, 0.2, 0.1], dtype=D)
    with torch.no_grad():
        omega = dec.losses(batch, marg, 0.4)["omega"].detach()
    worst = _check(dec, lambda: dec.losses(batch, marg, 0.4, omega=omega))
    assert max(worst.values()) < TOL, worst
