import json

import pytest
import torch

from tcilab.model.checkpoint import dumps, load_model, loads, module_hash, save_checkpoint
from tcilab.model.decoder import Decoder
from tcilab.model.encoder import Encoder


def test_encoder_roundtrip_bit_exact(tmp_path):
    torch.manual_seed(0)
    enc = Encoder(hidden=5, width=4, variant="Y+G").eval()
    save_checkpoint(enc, tmp_path / "e.json", {"seed": 1})
    back, man = load_model(tmp_path / "e.json")
    assert module_hash(back) == module_hash(enc)
    x = torch.randn(2, 3, 14)
    assert torch.equal(back.states(x), enc.states(x))
    assert man["architecture"]["variant"] == "Y+G" and man["seed"] == 1


def test_decoder_roundtrip(tmp_path):
    dec = Decoder(psi_width=9, width=3)
    save_checkpoint(dec, tmp_path / "d.json", {})
    back, _ = load_model(tmp_path / "d.json")
    assert module_hash(back) == module_hash(dec)


def test_serialisation_is_stable():
    enc = Encoder(hidden=3, width=2)
    assert dumps(enc.state_dict(), {"a": 1}) == dumps(enc.state_dict(), {"a": 1})


def test_tamper_detected():
    enc = Encoder(hidden=3, width=2)
    doc = json.loads(dumps(enc.state_dict(), {}))
    doc["tensor_hash"] = "0" * 64
    with pytest.raises(ValueError, match="hash"):
        loads(json.dumps(doc))


def test_y_only_manifest_has_no_propensity_heads(tmp_path):
    save_checkpoint(Encoder(hidden=3, width=2, variant="Y_only"), tmp_path / "y.json", {})
    doc = json.loads((tmp_path / "y.json").read_text())
    assert not any("w_delta" in k or "w_gamma" in k for k in doc["tensors"])


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_model(tmp_path / "nope.json")
