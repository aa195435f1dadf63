import copy
import math

import numpy as np
import pytest
import torch

from tcilab.evaluation import (
    MetricsReport,
    early_prediction_mean,
    encoder_counterfactual_predictions,
    evaluate_decoder,
    evaluate_encoder,
    history_sweep,
    treatment_accuracy,
)
from tcilab.experiments import records_of
from tcilab.metrics import nrmse
from tcilab.model.data import Scaler, to_arrays, treatment_marginals
from tcilab.model.encoder import Encoder
from tcilab.sim.priors import ConfigError
from tcilab.sim.simulate import SimConfig, generate_dataset
from tcilab.training import EncoderBundle, HyperParams, TrainReport


class TestNrmse:
    def test_fixtures(self):
        assert nrmse([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert abs(nrmse(np.full(7, 115.0), np.zeros(7)) - 10.0) < 1e-12
        assert abs(nrmse([0.0], [1150.0]) - 100.0) < 1e-12

    def test_scale(self):
        rng = np.random.default_rng(0)
        p, y = rng.normal(size=50), rng.normal(size=50)
        assert nrmse(3 * p, 3 * y) == pytest.approx(3 * nrmse(p, y), rel=1e-12)

    @pytest.mark.parametrize("p,y", [([], []), ([1.0], [1.0, 2.0])])
    def test_bad_input(self, p, y):
        with pytest.raises(ValueError):
            nrmse(p, y)


def _fixture_records():
    """Two hand-made patients with encoder annotations."""
    def rec(vols, cf):
        steps = [{"t": t, "covariates": [vols[t], 0.0], "treatment_onehot": [1, 0, 0, 0], "outcome": vols[t + 1]}
                 for t in range(len(vols) - 1)]
        return {"id": 0, "static": {"stage": "I", "patient_type": 1}, "steps": steps, "cf_encoder": cf,
                "cf_decoder": None, "termination": "horizon"}
    return [rec([10, 20, 30], [[20, 25, 15, 10], [30, 40, 20, 10]]),
            rec([5, 6], [[6, 8, 4, 2]])]


class TestEncoderEval:
    def test_oracle(self):
        recs = _fixture_records()
        rep = evaluate_encoder(lambda rs: [np.asarray(r["cf_encoder"]) for r in rs], recs)
        assert rep.rows[0]["nrmse_pct"] == 0.0

    def test_constant_predictor_by_hand(self):
        recs = _fixture_records()
        rep = evaluate_encoder(lambda rs: [np.full((len(r["steps"]), 4), 20.0) for r in rs], recs)
        vals = [20, 25, 15, 10, 30, 40, 20, 10, 6, 8, 4, 2]
        hand = 100 * math.sqrt(sum((v - 20) ** 2 for v in vals) / 12) / 1150
        assert rep.rows[0]["nrmse_pct"] == pytest.approx(hand, rel=1e-12)
        assert rep.rows[0]["nrmse_pct"] > 0

    def test_missing_annotations(self, tiny_records, tiny_bundles):
        with pytest.raises(ConfigError):
            evaluate_encoder(tiny_bundles[0], tiny_records["train"])
        with pytest.raises(ConfigError):
            evaluate_decoder(*tiny_bundles, tiny_records["train"], 3)

    def test_pure(self, tiny_records, tiny_bundles):
        a = evaluate_encoder(tiny_bundles[0], tiny_records["test"]).to_csv()
        assert a == evaluate_encoder(tiny_bundles[0], tiny_records["test"]).to_csv()


class TestDecoderEval:
    def test_oracle_rollout(self, tiny_records, tiny_bundles):
        rep = evaluate_decoder(*tiny_bundles, tiny_records["test"], 3, rollout_fn=lambda ex: ex.truth.numpy())
        row = rep.rows[0]
        assert row["nrmse_pct"] == 0.0 and row["nrmse_offset1"] == 0.0 and row["tau"] == 3

    def test_reports_offsets(self, tiny_records, tiny_bundles):
        row = evaluate_decoder(*tiny_bundles, tiny_records["test"], 3).rows[0]
        assert {"nrmse_offset1", "nrmse_offset2", "nrmse_offset3"} <= set(row)
        assert row["nrmse_pct"] == row["nrmse_offset3"]
        assert all(math.isfinite(row[f"nrmse_offset{m}"]) for m in (1, 2, 3))

    def test_tau_one_delegates_to_encoder(self, tiny_records, tiny_bundles):
        enc = tiny_bundles[0]
        test = tiny_records["test"]
        got = evaluate_decoder(enc, None, test, 1).rows[0]["nrmse_pct"]
        preds = encoder_counterfactual_predictions(enc, test)
        p = np.concatenate([x[:, [1, 2]] for x in preds])
        y = np.concatenate([np.asarray(r["cf_encoder"])[:, [1, 2]] for r in test])
        assert got == nrmse(p, y)

    def test_wrong_tau(self, tiny_records, tiny_bundles):
        with pytest.raises(ConfigError):
            evaluate_decoder(*tiny_bundles, tiny_records["test"], 4)


def test_uniform_p2_is_chance():
    ds = generate_dataset(SimConfig(gamma_c=5, gamma_r=5, n_train=0, n_val=0, n_test=60, tau=2, seed=1))
    recs = records_of(ds.test)
    enc = Encoder(hidden=4, width=3).eval()
    with torch.no_grad():
        enc.heads.w_gamma.weight.zero_()
        enc.heads.w_gamma.bias.zero_()
    bundle = EncoderBundle(enc, Scaler(100, 100, 1, 1), treatment_marginals(to_arrays(recs)), HyperParams(),
                           TrainReport(seed=0))
    acc = treatment_accuracy(bundle, recs, seed=0)
    sigma = math.sqrt(0.25 * 0.75 / acc.n)
    assert abs(acc.exact - 0.25) < 3 * sigma
    assert acc.elementwise == pytest.approx(1 - 2 * (1 - acc.exact) / 4)
    assert 0 <= acc.exact <= 1 and acc.elementwise <= 1
    assert treatment_accuracy(bundle, recs, seed=0) == acc


def test_accuracy_needs_treatment_head(tiny_records):
    enc = Encoder(hidden=3, width=2, variant="Y_only")
    b = EncoderBundle(enc, Scaler(0, 1, 0, 1), np.full(4, 0.25), HyperParams(), TrainReport(seed=0))
    with pytest.raises(ConfigError):
        treatment_accuracy(b, tiny_records["test"])


class TestHistory:
    def test_first_bucket_is_first_step(self, tiny_records, tiny_bundles):
        enc, dec = tiny_bundles
        test = tiny_records["test"]
        rep = history_sweep(enc, None, test, 1)
        first = rep.rows[0]
        assert first["history"] == 1 and first["n"] == 4 * len(test)
        preds = encoder_counterfactual_predictions(enc, test)
        want = nrmse(np.stack([p[0] for p in preds]), np.stack([r["cf_encoder"][0] for r in test]))
        assert first["nrmse_pct"] == want

    def test_curve_length_is_nonempty_buckets(self, tiny_records, tiny_bundles):
        enc, dec = tiny_bundles
        test = tiny_records["test"]
        rep = history_sweep(enc, dec.model, test, 3)
        starts = {s["t"] for r in test for s in r["cf_decoder"]["timesteps"]}
        assert len(rep.rows) == len(starts)
        assert all(r["n"] > 0 for r in rep.rows)

    def test_empty_bucket_warns(self, tiny_records, tiny_bundles):
        enc, _ = tiny_bundles
        with pytest.warns(UserWarning, match="empty"):
            history_sweep(enc, None, tiny_records["test"], 1, min_count=10 ** 9)

    def test_early_mean(self):
        a = MetricsReport("a", [{"history": 1, "nrmse_pct": 2.0}, {"history": 2, "nrmse_pct": 4.0}])
        b = MetricsReport("b", [{"history": 1, "nrmse_pct": 4.0}])
        rows = early_prediction_mean([a, b]).rows
        assert rows[0]["nrmse_pct"] == 3.0 and rows[1]["n_curves"] == 1


def test_report_csv_and_json():
    rep = MetricsReport("x", [{"a": 1, "b": 0.5}, {"a": 2, "c": "z"}])
    lines = rep.to_csv().splitlines()
    assert lines[0] == "a,b,c" and lines[1] == "1,0.500000,"
    assert '"label": "x"' in rep.to_json()
