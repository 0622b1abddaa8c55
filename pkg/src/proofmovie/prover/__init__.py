"""Prover backends and the driver that runs them over a movie."""

from .simulated import UNDEFINED, ProverReply, ProverSession, SimulatedProver
from .driver import ProverDriver
from .external import ExternalProver, ProverBackendError

__all__ = [
    "UNDEFINED",
    "ProverReply",
    "ProverSession",
    "SimulatedProver",
    "ProverDriver",
    "ExternalProver",
    "ProverBackendError",
]
