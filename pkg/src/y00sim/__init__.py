"""Desk-scale simulator for the Y-00 intensity-modulation quantum stream cipher."""

from . import attacks, channel, experiments, keystream, modem, receiver, secmetrics
from .channel import ChannelParams, MeasurementMode, MeasurementOutcome, measure, trial_rng
from .keystream import LFSR, DeBruijnNFSR, RunningKeyBlock, berlekamp_massey, running_key_blocks, unicity_metrics
from .modem import LevelTable, decode_keyed, design_levels, encode, parity_observable
from .receiver import bob_detect, eve_mary_detect, neighbor_error_prob
from .secmetrics import bayes_success_symmetric, max_distance, qum_success

__version__ = "0.1.0"

__all__ = [
    "attacks",
    "channel",
    "experiments",
    "keystream",
    "modem",
    "receiver",
    "secmetrics",
    "ChannelParams",
    "MeasurementMode",
    "MeasurementOutcome",
    "measure",
    "trial_rng",
    "LFSR",
    "DeBruijnNFSR",
    "RunningKeyBlock",
    "berlekamp_massey",
    "running_key_blocks",
    "unicity_metrics",
    "LevelTable",
    "decode_keyed",
    "design_levels",
    "encode",
    "parity_observable",
    "bob_detect",
    "eve_mary_detect",
    "neighbor_error_prob",
    "bayes_success_symmetric",
    "max_distance",
    "qum_success",
]
