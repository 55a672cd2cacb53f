"""Resident/mutant consumer-resource seasons: optimal feedback, free-riding
best responses, and the season-to-season invasion map."""

from .model import (
    ControlPair,
    FullState,
    ModelError,
    ModelParams,
    ReducedState,
    lift,
    reduce,
)
from .mutant import MimicPolicy, MutantPolicy, SurfaceId
from .resident import ResidentPolicy
from .trajectory import SeasonOutcome, integrate_season

__all__ = [
    "ControlPair",
    "FullState",
    "MimicPolicy",
    "ModelError",
    "ModelParams",
    "MutantPolicy",
    "ReducedState",
    "ResidentPolicy",
    "SeasonOutcome",
    "SurfaceId",
    "integrate_season",
    "lift",
    "reduce",
]
