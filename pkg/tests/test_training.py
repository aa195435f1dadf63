import math
from dataclasses import replace

import numpy as np
import pytest
import torch

from tcilab.model.checkpoint import module_hash
from tcilab.sim.priors import ConfigError
from tcilab.training import (
    HyperParams,
    build_decoder_dataset,
    expand_grid,
    hyperparameter_search,
    select_epoch,
    train_decoder,
    train_encoder,
)


def test_select_epoch_ties_go_earliest():
    assert select_epoch([3.0, 1.0, 1.0, 2.0]) == 1
    assert select_epoch([5.0]) == 0


def test_hyperparams_validation():
    with pytest.raises(ConfigError):
        HyperParams(imbalance="x").validate()
    with pytest.raises(ConfigError):
        HyperParams.from_dict({"nope": 1})
    with pytest.raises(ConfigError):
        HyperParams(omega_min=5, omega_max=1).validate()


def test_encoder_report(tiny_bundles, tiny_hp):
    enc, _ = tiny_bundles
    rep = enc.report
    assert len(rep.epochs) == tiny_hp.epochs_enc
    assert rep.selected_epoch == rep.epochs[select_epoch(rep.val_series)]["epoch"]
    assert rep.checkpoint_hash == module_hash(enc.model)
    assert 0 <= rep.clip_events <= rep.clip_total
    assert all(math.isfinite(v) for v in rep.val_series)
    assert {"loss_P", "loss_T", "loss_W", "loss_I", "loss_total"} <= set(rep.epochs[0])
    assert np.all(enc.marginals > 0) and enc.marginals.sum() == pytest.approx(1.0)


def test_training_is_deterministic(tiny_records, tiny_hp, tiny_bundles):
    again = train_encoder(tiny_records["train"], tiny_records["val"], tiny_hp, seed=0)
    assert again.report.checkpoint_hash == tiny_bundles[0].report.checkpoint_hash


def test_encoder_frozen_during_decoder_training(tiny_bundles):
    enc, dec = tiny_bundles
    assert dec.encoder_hash == module_hash(enc.model) == enc.report.checkpoint_hash
    assert "val_nrmse_teacher" in dec.report.epochs[0]


def test_decoder_example_counts(tiny_bundles, tiny_records):
    enc, _ = tiny_bundles
    recs = tiny_records["train"]
    for tau in (2, 3, 5):
        ex = build_decoder_dataset(enc, recs, tau)
        expected = sum(max(len(r["steps"]) - tau, 0) for r in recs)
        assert len(ex) == expected
        for i in np.unique(ex.patient):
            assert (ex.patient == i).sum() == len(recs[i]["steps"]) - tau
        first = recs[int(ex.patient[0])]
        assert ex.truth[0].tolist() == [s["outcome"] for s in first["steps"][:tau]]


def test_decoder_dataset_needs_tau_two(tiny_bundles, tiny_records):
    with pytest.raises(ConfigError):
        build_decoder_dataset(tiny_bundles[0], tiny_records["train"], 1)


def test_zero_epochs_records_initial_validation(tiny_records, tiny_hp):
    b = train_encoder(tiny_records["train"], tiny_records["val"], replace(tiny_hp, epochs_enc=0), seed=1)
    assert [e["epoch"] for e in b.report.epochs] == [0]


class TestGrid:
    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            expand_grid({}, HyperParams())
        with pytest.raises(ConfigError):
            expand_grid({"beta_enc": []}, HyperParams())

    def test_singleton(self, tiny_records, tiny_hp):
        best, board = hyperparameter_search({"beta_enc": [0.7]}, tiny_records["train"], tiny_records["val"],
                                            base=tiny_hp)
        assert best.beta_enc == 0.7 and len(board) == 1
        assert {"config_id", "beta_enc", "val_nrmse", "wallclock", "seed"} <= set(board[0])

    def test_trained_config_beats_untrained(self, tiny_records, tiny_hp):
        base = replace(tiny_hp, epochs_enc=3)
        best, board = hyperparameter_search({"epochs_enc": [0, 3]}, tiny_records["train"], tiny_records["val"],
                                            base=base)
        assert best.epochs_enc == 3 and len(board) == 2

    def test_budget(self, tiny_records, tiny_hp):
        _, board = hyperparameter_search({"beta_enc": [0.1, 0.4, 0.7]}, tiny_records["train"],
                                         tiny_records["val"], base=replace(tiny_hp, epochs_enc=1), budget=2)
        assert len(board) == 2


def test_divergence_is_reported(tiny_records, tiny_hp):
    from tcilab.training import TrainingDivergedError
    with pytest.raises(TrainingDivergedError, match="last finite"):
        train_encoder(tiny_records["train"], tiny_records["val"], replace(tiny_hp, learning_rate=1e30,
                                                                          grad_clip=0.0), seed=0)
