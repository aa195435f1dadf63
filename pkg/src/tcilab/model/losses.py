"""Importance weights and the four per-step losses."""
from __future__ import annotations

from dataclasses import dataclass

import torch

PROB_FLOOR = 1e-12
OMEGA_MIN = 0.05
OMEGA_MAX = 20.0


def _as_tensor(x) -> torch.Tensor:
    if isinstance(x, torch.Tensor):
        return x
    return torch.as_tensor(x, dtype=torch.float64)


def _factual_index(a_t, p: torch.Tensor) -> torch.Tensor:
    """Option indices from either indices or one-hot rows shaped like ``p``."""
    a_t = _as_tensor(a_t)
    if a_t.dim() == p.dim() and a_t.shape[-1] == p.shape[-1]:
        return a_t.argmax(dim=-1)
    return a_t.long()


@dataclass
class ClipCounter:
    """Running count of importance weights that hit a bound."""

    clipped: int = 0
    total: int = 0

    def update(self, raw: torch.Tensor, lo: float, hi: float, mask: torch.Tensor | None = None):
        hit = (raw < lo) | (raw > hi)
        if mask is not None:
            hit = hit & mask.bool()
            self.total += int(mask.sum().item())
        else:
            self.total += raw.numel()
        self.clipped += int(hit.sum().item())


def importance_weight(p1, marginals, a_t, *, lo: float = OMEGA_MIN, hi: float = OMEGA_MAX,
                      counter: ClipCounter | None = None, mask=None) -> torch.Tensor:
    """omega = sum_k p(a)/p(A_k) * p1[k]/p1[a], detached and clipped to [lo, hi].

    ``a_t`` may be one-hot or integer indices; leading dimensions broadcast.
    """
    p1 = _as_tensor(p1).detach()
    marginals = _as_tensor(marginals).to(p1.dtype)
    idx = _factual_index(a_t, p1).unsqueeze(-1)
    p1_f = p1.gather(-1, idx).squeeze(-1).clamp_min(PROB_FLOOR)
    marg_f = marginals.expand_as(p1).gather(-1, idx).squeeze(-1)
    raw = marg_f / p1_f * (p1 / marginals).sum(-1)
    if counter is not None:
        counter.update(raw, lo, hi, mask)
    return raw.clamp(lo, hi)


def loss_prediction(omega, y, y_hat) -> torch.Tensor:
    return _as_tensor(omega) * (_as_tensor(y) - _as_tensor(y_hat)) ** 2


def cross_entropy(p, a_t) -> torch.Tensor:
    """-sum_k a(k) log p[k] with a 1e-12 floor inside the log."""
    p = _as_tensor(p)
    idx = _factual_index(a_t, p).unsqueeze(-1)
    return -p.gather(-1, idx).squeeze(-1).clamp_min(PROB_FLOOR).log()


def loss_treatment(p2, a_t) -> torch.Tensor:
    return cross_entropy(p2, a_t)


def loss_weighting(p1, a_t) -> torch.Tensor:
    return cross_entropy(p1, a_t)


def loss_imbalance(p3, a_t) -> torch.Tensor:
    return cross_entropy(p3, a_t)


def negative_entropy(p) -> torch.Tensor:
    p = _as_tensor(p)
    return (p * p.clamp_min(PROB_FLOOR).log()).sum(-1)


def loss_total(l_p, l_t, l_w, l_i, beta: float):
    return l_p + l_t + l_w - beta * l_i
