import math

import pytest
import torch
from torch.nn import functional as F

from tcilab.model.losses import (
    ClipCounter,
    cross_entropy,
    importance_weight,
    loss_imbalance,
    loss_prediction,
    loss_total,
    negative_entropy,
)

D = torch.float64


class TestImportanceWeight:
    def test_uninformative_propensity_gives_k(self):
        marg = torch.tensor([0.1, 0.2, 0.3, 0.4], dtype=D)
        for a in range(4):
            w = importance_weight(marg.clone(), marg, torch.tensor(a), lo=0.0, hi=1e9)
            assert float(w) == pytest.approx(4.0, abs=1e-9)

    def test_point_mass_gives_one(self):
        marg = torch.tensor([0.1, 0.2, 0.3, 0.4], dtype=D)
        p1 = torch.tensor([0.0, 0.0, 1.0, 0.0], dtype=D)
        assert float(importance_weight(p1, marg, torch.tensor(2))) == pytest.approx(1.0, abs=1e-12)

    def test_two_option_worked_example(self):
        marg = torch.tensor([0.7, 0.3], dtype=D)
        p1 = torch.tensor([0.8, 0.2], dtype=D)
        # "option 1" of two, i.e. index 0
        w = importance_weight(p1, marg, torch.tensor(0))
        assert float(w) == pytest.approx(1 + (0.7 / 0.3) * (0.2 / 0.8), abs=1e-12)
        assert float(w) == pytest.approx(1.58333, abs=1e-5)

    def test_onehot_and_index_agree(self):
        marg = torch.tensor([0.25, 0.25, 0.25, 0.25], dtype=D)
        p1 = F.softmax(torch.randn(5, 4, dtype=D), -1)
        a = torch.tensor([0, 1, 2, 3, 1])
        assert torch.equal(importance_weight(p1, marg, a), importance_weight(p1, marg, F.one_hot(a, 4)))

    def test_clipping_counted(self):
        marg = torch.tensor([0.5, 0.5], dtype=D)
        p1 = torch.tensor([[0.999, 0.001], [0.5, 0.5]], dtype=D)
        c = ClipCounter()
        w = importance_weight(p1, marg, torch.tensor([1, 0]), lo=0.05, hi=20.0, counter=c)
        assert float(w[0]) == 20.0 and float(w[1]) == pytest.approx(2.0)
        assert (c.clipped, c.total) == (1, 2)

    def test_detached(self):
        logits = torch.randn(3, 4, dtype=D, requires_grad=True)
        w = importance_weight(F.softmax(logits, -1), torch.full((4,), 0.25, dtype=D), torch.tensor([0, 1, 2]))
        assert not w.requires_grad


class TestLossTerms:
    def test_prediction(self):
        assert float(loss_prediction(1.0, 3.0, 3.0)) == 0.0
        assert float(loss_prediction(1.0, 3.0, 1.0)) == 4.0
        assert float(loss_prediction(1.58333, 1.0, 0.0)) == pytest.approx(1.58333)

    def test_cross_entropy(self):
        assert float(cross_entropy(torch.full((4,), 0.25, dtype=D), torch.tensor(2))) == pytest.approx(math.log(4))
        assert float(cross_entropy(torch.tensor([0.0, 1.0], dtype=D), torch.tensor(1))) == 0.0
        assert float(cross_entropy(torch.tensor([0.5, 0.5], dtype=D), torch.tensor(0))) == pytest.approx(0.69315, abs=1e-5)

    def test_zero_probability_floored(self):
        v = float(loss_imbalance(torch.tensor([1.0, 0.0], dtype=D), torch.tensor(1)))
        assert v == pytest.approx(-math.log(1e-12))

    def test_total(self):
        assert loss_total(1.0, 2.0, 3.0, 9.0, 0.0) == 6.0
        assert loss_total(1.0, 1.0, 1.0, 1.0, 0.4) == pytest.approx(2.6)

    def test_negative_entropy_uniform(self):
        assert float(negative_entropy(torch.full((4,), 0.25, dtype=D))) == pytest.approx(-math.log(4))


class TestSoftmax:
    def test_examples(self):
        assert torch.allclose(F.softmax(torch.zeros(4, dtype=D), -1), torch.full((4,), 0.25, dtype=D))
        p = F.softmax(torch.tensor([1.0, 0, 0, 0], dtype=D), -1)
        assert torch.allclose(p, torch.tensor([0.47536, 0.17488, 0.17488, 0.17488], dtype=D), atol=1e-5)
        z = torch.randn(4, dtype=D)
        assert torch.allclose(F.softmax(z, -1), F.softmax(z + 3.7, -1))
