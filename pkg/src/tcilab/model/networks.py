"""Building blocks: gated recurrent cell, factor heads, outcome arm, propensity heads."""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .losses import (
    OMEGA_MAX,
    OMEGA_MIN,
    ClipCounter,
    importance_weight,
    loss_imbalance,
    loss_prediction,
    loss_treatment,
    loss_weighting,
    negative_entropy,
)

FACTORS = ("y", "d", "g")


@dataclass(frozen=True)
class Variant:
    """Which factor heads exist and which loss terms are active."""

    label: str
    factors: tuple[str, ...]
    weighted: bool  # L_P uses omega (needs the Delta factor)
    treatment_loss: bool  # L_T via W_Gamma
    weighting_loss: bool  # L_W via W_Delta

    @property
    def p2_inputs(self) -> tuple[str, ...]:
        return tuple(f for f in ("d", "g") if f in self.factors)

    @property
    def arm_factors(self) -> tuple[str, ...]:
        return tuple(f for f in ("y", "d") if f in self.factors)


VARIANTS = {
    "full": Variant("full", ("y", "d", "g"), weighted=True, treatment_loss=True, weighting_loss=True),
    "Y_only": Variant("Y_only", ("y",), weighted=False, treatment_loss=False, weighting_loss=False),
    "Y+D": Variant("Y+D", ("y", "d"), weighted=True, treatment_loss=False, weighting_loss=True),
    "Y+G": Variant("Y+G", ("y", "g"), weighted=False, treatment_loss=True, weighting_loss=False),
}
# accept the circled-plus spellings used in reports
VARIANT_ALIASES = {"Y⊕Δ": "Y+D", "Y⊕Γ": "Y+G", "Y": "Y_only", "drtci": "full"}


def get_variant(label: str) -> Variant:
    from ..sim.priors import ConfigError

    label = VARIANT_ALIASES.get(label, label)
    if label not in VARIANTS:
        raise ConfigError(f"unknown ablation variant {label!r}; choose from {sorted(VARIANTS)}")
    return VARIANTS[label]


class LSTMCell(nn.Module):
    """Gated cell: input, forget, cell and output gates from one affine map of [x, h]."""

    def __init__(self, input_size: int, hidden_size: int):
        super().__init__()
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.linear = nn.Linear(input_size + hidden_size, 4 * hidden_size)

    def forward(self, x, state):
        h, c = state
        z = self.linear(torch.cat([x, h], dim=-1))
        i, f, g, o = z.chunk(4, dim=-1)
        c_next = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h_next = torch.sigmoid(o) * torch.tanh(c_next)
        return h_next, c_next

    def zero_state(self, batch: int, dtype=None):
        z = torch.zeros(batch, self.hidden_size, dtype=dtype or self.linear.weight.dtype)
        return z, z.clone()


class FactorHead(nn.Module):
    """Two-layer ELU perceptron mapping the state to one factor."""

    def __init__(self, in_dim: int, width: int, dropout: float = 0.0):
        super().__init__()
        self.fc1 = nn.Linear(in_dim, width)
        self.fc2 = nn.Linear(width, width)
        self.dropout = nn.Dropout(dropout)

    def forward(self, s):
        return F.elu(self.fc2(self.dropout(F.elu(self.fc1(s)))))


class OutcomeArm(nn.Module):
    def __init__(self, in_dim: int, width: int):
        super().__init__()
        self.fc1 = nn.Linear(in_dim, width)
        self.fc2 = nn.Linear(width, 1)

    def forward(self, z):
        return self.fc2(F.elu(self.fc1(z))).squeeze(-1)


class FrozenHead(nn.Module):
    """Randomly initialised one-layer softmax classifier whose weights never train."""

    def __init__(self, in_dim: int, k: int):
        super().__init__()
        layer = nn.Linear(in_dim, k)
        self.register_buffer("weight", layer.weight.detach().clone())
        self.register_buffer("bias", layer.bias.detach().clone())

    def forward(self, z):
        return F.linear(z, self.weight, self.bias)


class DisentangledHeads(nn.Module):
    """Factor heads plus outcome arm and propensity heads on top of a recurrent state.

    Used by both the encoder and the decoder (each with its own instance).
    """

    def __init__(self, state_dim: int, width: int, k: int, variant: Variant, dropout: float = 0.0):
        super().__init__()
        self.variant = variant
        self.width = width
        self.k = k
        self.heads = nn.ModuleDict({f: FactorHead(state_dim, width, dropout) for f in variant.factors})
        self.arm = OutcomeArm(width * len(variant.arm_factors) + k, width)
        if variant.weighting_loss:
            self.w_delta = nn.Linear(width, k)
        if variant.treatment_loss:
            self.w_gamma = nn.Linear(width * len(variant.p2_inputs), k)
        self.adversary = FrozenHead(width, k)

    @property
    def psi_width(self) -> int:
        return self.width * len(self.variant.factors)

    def disentangle(self, s) -> dict[str, torch.Tensor]:
        return {f: head(s) for f, head in self.heads.items()}

    def predict_outcome(self, factors: dict, a_onehot) -> torch.Tensor:
        z = torch.cat([factors[f] for f in self.variant.arm_factors] + [a_onehot.to(factors["y"].dtype)], dim=-1)
        return self.arm(z)

    def propensities(self, factors: dict) -> dict[str, torch.Tensor]:
        out = {"p3": F.softmax(self.adversary(factors["y"]), dim=-1)}
        if self.variant.weighting_loss:
            out["p1"] = F.softmax(self.w_delta(factors["d"]), dim=-1)
        if self.variant.treatment_loss:
            out["p2"] = F.softmax(self.w_gamma(torch.cat([factors[f] for f in self.variant.p2_inputs], -1)), dim=-1)
        return out

    def unify(self, factors: dict) -> torch.Tensor:
        return torch.cat([factors[f] for f in FACTORS if f in factors], dim=-1)

    def step_losses(self, s, a_idx, y, mask, marginals, beta: float, *, omega=None,
                    imbalance: str = "ce", counter: ClipCounter | None = None,
                    omega_bounds: tuple[float, float] = (OMEGA_MIN, OMEGA_MAX)) -> dict[str, torch.Tensor]:
        """Masked batch means of L_P, L_T, L_W, L_I and the total.

        ``omega`` overrides the computed importance weights (finite-difference
        checks hold it fixed).
        """
        factors = self.disentangle(s)
        onehot = F.one_hot(a_idx, self.k).to(s.dtype)
        y_hat = self.predict_outcome(factors, onehot)
        props = self.propensities(factors)
        m = mask.to(s.dtype)
        n = m.sum().clamp_min(1.0)

        if omega is None:
            if self.variant.weighted:
                omega = importance_weight(props["p1"], marginals, a_idx, lo=omega_bounds[0], hi=omega_bounds[1],
                                          counter=counter, mask=mask)
            else:
                omega = torch.ones_like(y_hat)
        zero = s.new_zeros(())
        l_p = (loss_prediction(omega, y, y_hat) * m).sum() / n
        l_t = (loss_treatment(props["p2"], a_idx) * m).sum() / n if self.variant.treatment_loss else zero
        l_w = (loss_weighting(props["p1"], a_idx) * m).sum() / n if self.variant.weighting_loss else zero
        if imbalance == "entropy":
            # negative entropy pushes p3 toward uniform; enters with + sign
            l_i = -(negative_entropy(props["p3"]) * m).sum() / n
        else:
            l_i = (loss_imbalance(props["p3"], a_idx) * m).sum() / n
        total = l_p + l_t + l_w - beta * l_i
        return {"total": total, "P": l_p, "T": l_t, "W": l_w, "I": l_i, "y_hat": y_hat, "omega": omega}
