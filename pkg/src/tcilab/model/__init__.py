"""Disentangled recurrent encoder and decoder."""
from .checkpoint import load_model, save_checkpoint
from .decoder import Decoder, rollout
from .encoder import Encoder
from .networks import VARIANTS, Variant, get_variant

__all__ = ["Decoder", "Encoder", "VARIANTS", "Variant", "get_variant", "load_model", "rollout", "save_checkpoint"]
