"""Recurrent encoder with disentangled heads (next-day prediction)."""
from __future__ import annotations

import torch
from torch import nn

from ..sim.dynamics import K_OPTIONS
from .data import ENCODER_INPUT_DIM
from .networks import DisentangledHeads, LSTMCell, Variant, get_variant


class Encoder(nn.Module):
    def __init__(self, hidden: int = 50, width: int = 50, variant: Variant | str = "full",
                 dropout: float = 0.1, k: int = K_OPTIONS, input_dim: int = ENCODER_INPUT_DIM):
        super().__init__()
        self.variant = get_variant(variant) if isinstance(variant, str) else variant
        self.hidden = hidden
        self.width = width
        self.k = k
        self.cell = LSTMCell(input_dim, hidden)
        self.dropout = nn.Dropout(dropout)
        self.heads = DisentangledHeads(hidden, width, k, self.variant, dropout)

    def architecture(self) -> dict:
        return {"kind": "encoder", "hidden": self.hidden, "width": self.width, "k": self.k,
                "variant": self.variant.label, "dropout": self.dropout.p,
                "input_dim": self.cell.input_size}

    @property
    def psi_width(self) -> int:
        return self.heads.psi_width

    def states(self, inputs: torch.Tensor) -> torch.Tensor:
        """Run the cell over ``inputs`` (B, T, F) and return s_t for every t as (B, T, H).

        Step t sees covariates up to day t and treatments up to day t-1.
        Padded steps produce states that callers must mask out.
        """
        B, T, _ = inputs.shape
        h, c = self.cell.zero_state(B, inputs.dtype)
        out = []
        for t in range(T):
            h, c = self.cell(inputs[:, t], (h, c))
            out.append(h)
        return self.dropout(torch.stack(out, dim=1))

    def encode_state(self, inputs: torch.Tensor) -> torch.Tensor:
        """State after the last step of ``inputs`` (B, t, F)."""
        return self.states(inputs)[:, -1]

    def disentangle(self, s):
        return self.heads.disentangle(s)

    def predict_outcome(self, factors, a_onehot):
        return self.heads.predict_outcome(factors, a_onehot)

    def propensities(self, factors):
        return self.heads.propensities(factors)

    def unify(self, factors):
        return self.heads.unify(factors)

    def losses(self, batch, marginals, beta: float, **kw):
        s = self.states(batch.inputs)
        return self.heads.step_losses(s, batch.treatments, batch.targets, batch.mask, marginals, beta, **kw)


def trainable_parameters(module: nn.Module) -> list[tuple[str, nn.Parameter]]:
    return [(n, p) for n, p in module.named_parameters() if p.requires_grad]
