import numpy as np
import pytest
import torch
from torch import nn
from torch.nn import functional as F

from tcilab.model.data import ENCODER_INPUT_DIM, PatientArrays, Scaler, encoder_batch
from tcilab.model.decoder import Decoder, rollout, unify
from tcilab.model.encoder import Encoder
from tcilab.model.networks import FactorHead, LSTMCell, OutcomeArm, get_variant
from tcilab.sim.priors import ConfigError

D = torch.float64


def test_elu_at_minus_one():
    assert float(F.elu(torch.tensor(-1.0, dtype=D))) == pytest.approx(-0.63212, abs=1e-5)


def test_zero_head_gives_zero_factor():
    h = FactorHead(5, 3)
    for p in h.parameters():
        nn.init.zeros_(p)
    assert torch.equal(h(torch.randn(2, 5)), torch.zeros(2, 3))


def test_zero_weight_arm_returns_bias():
    arm = OutcomeArm(6, 4)
    nn.init.zeros_(arm.fc1.weight), nn.init.zeros_(arm.fc1.bias), nn.init.zeros_(arm.fc2.weight)
    nn.init.constant_(arm.fc2.bias, 1.25)
    assert torch.allclose(arm(torch.randn(3, 6)), torch.full((3,), 1.25))


class TestLSTMCell:
    def test_first_step_depends_only_on_input(self):
        torch.manual_seed(0)
        cell = LSTMCell(3, 4).double()
        x = torch.randn(1, 3, dtype=D)
        h1, _ = cell(x, cell.zero_state(1, D))
        h2, _ = cell(x, cell.zero_state(1, D))
        assert torch.equal(h1, h2)

    def test_gate_equations(self):
        torch.manual_seed(1)
        cell = LSTMCell(2, 3).double()
        x, h, c = torch.randn(1, 2, dtype=D), torch.randn(1, 3, dtype=D), torch.randn(1, 3, dtype=D)
        z = torch.cat([x, h], -1) @ cell.linear.weight.T + cell.linear.bias
        i, f, g, o = z.chunk(4, -1)
        c_ref = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h_ref = torch.sigmoid(o) * torch.tanh(c_ref)
        hn, cn = cell(x, (h, c))
        assert torch.allclose(hn, h_ref) and torch.allclose(cn, c_ref)


class TestVariants:
    def test_unknown_label(self):
        with pytest.raises(ConfigError):
            get_variant("Y+Z")

    def test_aliases(self):
        assert get_variant("Y⊕Δ").label == "Y+D" and get_variant("Y⊕Γ").label == "Y+G"

    @pytest.mark.parametrize("label,heads,has_d,has_g", [
        ("full", {"y", "d", "g"}, True, True), ("Y_only", {"y"}, False, False),
        ("Y+D", {"y", "d"}, True, False), ("Y+G", {"y", "g"}, False, True)])
    def test_parameter_sets(self, label, heads, has_d, has_g):
        enc = Encoder(hidden=4, width=3, variant=label)
        names = set(enc.state_dict())
        assert set(enc.heads.heads) == heads
        assert any("w_delta" in n for n in names) == has_d
        assert any("w_gamma" in n for n in names) == has_g


class TestStructure:
    def test_gamma_factor_excluded_from_outcome(self):
        torch.manual_seed(0)
        enc = Encoder(hidden=4, width=3).double()
        f = enc.disentangle(torch.randn(5, 4, dtype=D))
        a = F.one_hot(torch.arange(5) % 4, 4)
        y1 = enc.predict_outcome(f, a)
        f["g"] = torch.randn_like(f["g"]) * 100
        assert torch.equal(y1, enc.predict_outcome(f, a))

    def test_adversary_is_frozen(self):
        enc = Encoder(hidden=4, width=3)
        pnames = {n for n, _ in enc.named_parameters()}
        assert not any("adversary" in n for n in pnames)
        assert "heads.adversary.weight" in enc.state_dict()

    def test_adversary_unchanged_by_training(self, tiny_records, tiny_hp):
        from tcilab.training import train_encoder
        torch.manual_seed(0)
        ref = Encoder(hidden=tiny_hp.recurrent_hidden_enc, width=tiny_hp.mlp_hidden).heads.adversary.weight.clone()
        b = train_encoder(tiny_records["train"], tiny_records["val"], tiny_hp, seed=0)
        assert torch.equal(b.model.heads.adversary.weight, ref)

    def test_unify_order(self):
        psi = unify(torch.tensor([1.0, 2]), torch.tensor([3.0, 4]), torch.tensor([5.0, 6]))
        assert psi.tolist() == [1, 2, 3, 4, 5, 6]
        assert torch.equal(unify(torch.zeros(2), torch.zeros(2), torch.zeros(2)), torch.zeros(6))

    def test_encoder_unify_matches_factor_order(self):
        enc = Encoder(hidden=4, width=2)
        f = {"g": torch.tensor([5.0, 6]), "y": torch.tensor([1.0, 2]), "d": torch.tensor([3.0, 4])}
        assert enc.unify(f).tolist() == [1, 2, 3, 4, 5, 6]

    def test_states_deterministic_and_causal(self):
        torch.manual_seed(2)
        enc = Encoder(hidden=4, width=3, dropout=0.0).double().eval()
        x = torch.randn(1, 6, ENCODER_INPUT_DIM, dtype=D)
        s = enc.states(x)
        assert torch.equal(s, enc.states(x.clone()))
        x2 = x.clone()
        x2[:, 4:] = 9.0
        assert torch.equal(enc.states(x2)[:, :4], s[:, :4])

    def test_decoder_hidden_equals_psi_width(self):
        dec = Decoder(psi_width=12, width=4)
        assert dec.hidden == 12 and isinstance(dec.adapter, nn.Identity)

    def test_decoder_zero_step(self):
        dec = Decoder(psi_width=6, width=3).double()
        for p in dec.cell.parameters():
            nn.init.zeros_(p)
        psi = torch.randn(2, 6, dtype=D)
        h, c = dec.decoder_step(dec.init_state(psi), torch.zeros(2, 8, dtype=D), torch.zeros(2, dtype=D),
                                torch.zeros(2, dtype=torch.long))
        c_ref = 0.5 * psi
        assert torch.allclose(c, c_ref) and torch.allclose(h, 0.5 * torch.tanh(c_ref))

    def test_rollout_tau_one_is_encoder(self):
        torch.manual_seed(0)
        enc = Encoder(hidden=4, width=3).double().eval()
        f = enc.disentangle(torch.randn(3, 4, dtype=D))
        plan = torch.tensor([[1], [2], [0]])
        got = rollout(enc, None, f, None, None, plan)[:, 0]
        assert torch.equal(got, enc.predict_outcome(f, F.one_hot(plan[:, 0], 4)))


def test_padding_does_not_leak():
    rng = np.random.default_rng(0)

    def pa(T):
        return PatientArrays(volumes=rng.uniform(1, 100, T + 1), conc_carried=rng.uniform(0, 5, T),
                             treatments=rng.integers(0, 4, T), static=np.eye(8)[0])

    a, b = pa(3), pa(7)
    sc = Scaler(50, 20, 2, 1)
    enc = Encoder(hidden=4, width=3, dropout=0.0).double().eval()
    alone = enc.states(encoder_batch([a], sc, D).inputs)
    both = enc.states(encoder_batch([a, b], sc, D).inputs)
    assert torch.allclose(alone[0], both[0, :3], rtol=0, atol=1e-14)
