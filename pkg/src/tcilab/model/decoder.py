"""Decoder for tau-step-ahead prediction, initialised from the encoder's unified factors."""
from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from ..sim.dynamics import K_OPTIONS
from .data import DECODER_INPUT_DIM, STATIC_DIM
from .networks import FACTORS, DisentangledHeads, LSTMCell, Variant, get_variant


def unify(phi_y, phi_d=None, phi_g=None) -> torch.Tensor:
    """Concatenate factors in the fixed order (y, d, g); absent factors are skipped."""
    parts = [torch.as_tensor(p) for p in (phi_y, phi_d, phi_g) if p is not None]
    return torch.cat(parts, dim=-1)


class Decoder(nn.Module):
    def __init__(self, psi_width: int, width: int = 50, variant: Variant | str = "full",
                 hidden: int | None = None, dropout: float = 0.1, k: int = K_OPTIONS):
        super().__init__()
        self.variant = get_variant(variant) if isinstance(variant, str) else variant
        self.psi_width = psi_width
        self.hidden = hidden or psi_width
        self.width = width
        self.k = k
        self.adapter = nn.Identity() if self.hidden == psi_width else nn.Linear(psi_width, self.hidden)
        self.cell = LSTMCell(DECODER_INPUT_DIM, self.hidden)
        self.dropout = nn.Dropout(dropout)
        self.heads = DisentangledHeads(self.hidden, width, k, self.variant, dropout)

    def architecture(self) -> dict:
        return {"kind": "decoder", "psi_width": self.psi_width, "hidden": self.hidden, "width": self.width,
                "k": self.k, "variant": self.variant.label, "dropout": self.dropout.p}

    def init_state(self, psi):
        z = self.adapter(psi)
        return z, z

    def decoder_step(self, state, v, y_prev, a_prev):
        """One recurrent update from (static, previous outcome, previous treatment)."""
        if a_prev.dim() == v.dim() - 1:
            a_prev = F.one_hot(a_prev, self.k)
        x = torch.cat([v, y_prev.unsqueeze(-1), a_prev.to(v.dtype)], dim=-1)
        return self.cell(x, state)

    def teacher_forced_states(self, psi, v, y_in, a_prev):
        """States s_{t+m}, m = 1..M, with true previous outcomes as inputs: (B, M, H)."""
        state = self.init_state(psi)
        out = []
        for m in range(y_in.shape[1]):
            state = self.decoder_step(state, v, y_in[:, m], a_prev[:, m])
            out.append(state[0])
        return self.dropout(torch.stack(out, dim=1))

    def losses(self, batch, marginals, beta: float, **kw):
        s = self.teacher_forced_states(batch.psi, batch.static, batch.y_in, batch.a_prev)
        return self.heads.step_losses(s, batch.a_cur, batch.targets, batch.mask, marginals, beta, **kw)


def rollout(encoder, decoder: Decoder | None, enc_factors: dict, v, y_t, plan, teacher=None) -> torch.Tensor:
    """Predict the scaled outcomes at offsets 1..tau for a treatment ``plan`` (B, tau).

    Offset 1 comes from the encoder's outcome arm; later offsets iterate the
    decoder, feeding each prediction back as the next input unless
    ``teacher`` (B, tau - 1) supplies true outcomes. ``y_t`` is unused by the
    update itself (the encoder state already contains it) and kept for the
    call signature.
    """
    tau = plan.shape[1]
    if tau < 1:
        raise ValueError("rollout needs at least one treatment")
    if tau > 1 and decoder is None:
        raise ValueError("tau > 1 needs a decoder")
    k = encoder.k
    dtype = next(iter(enc_factors.values())).dtype
    preds = [encoder.predict_outcome(enc_factors, F.one_hot(plan[:, 0], k).to(dtype))]
    if tau == 1:
        return preds[0].unsqueeze(1)
    psi = torch.cat([enc_factors[f] for f in FACTORS if f in enc_factors], dim=-1)
    state = decoder.init_state(psi)
    for m in range(1, tau):
        y_prev = preds[-1] if teacher is None else teacher[:, m - 1]
        state = decoder.decoder_step(state, v, y_prev, plan[:, m - 1])
        factors = decoder.heads.disentangle(state[0])
        preds.append(decoder.heads.predict_outcome(factors, F.one_hot(plan[:, m], k).to(dtype)))
    return torch.stack(preds, dim=1)


__all__ = ["Decoder", "rollout", "unify", "STATIC_DIM"]
