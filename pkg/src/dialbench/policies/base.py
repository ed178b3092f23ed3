"""Common policy interface, exploration schedule, checkpoint format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dialbench.belief_tracker import BeliefState

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear anneal from eps0 to eps_final over anneal_dialogues."""

    eps0: float
    eps_final: float = 0.05
    anneal_dialogues: int = 4000

    def at(self, dialogue_index: int) -> float:
        frac = min(1.0, max(0.0, dialogue_index / self.anneal_dialogues))
        return self.eps0 + (self.eps_final - self.eps0) * frac


@dataclass
class Transition:
    observation: np.ndarray
    action: int
    reward: float
    next_observation: np.ndarray
    next_mask: np.ndarray
    done: bool
    mask: np.ndarray | None = None    # mask the action was chosen under


class Policy:
    """Dialogue policy over flattened beliefs and action masks.

    ``act`` must be deterministic given (model state, inputs, rng) and must
    return a legal action.  Training hooks are no-ops by default so fixed
    policies only implement ``act``.
    """

    algorithm = "base"
    trains = False

    def __init__(self, obs_dim: int, action_count: int):
        self.obs_dim = obs_dim
        self.action_count = action_count

    def begin_dialogue(self, dialogue_index: int, training: bool) -> None:
        pass

    def act(self, observation: np.ndarray, mask: np.ndarray,
            rng: np.random.Generator, greedy: bool = False,
            belief: BeliefState | None = None) -> int:
        raise NotImplementedError

    def observe(self, transition: Transition, rng: np.random.Generator) -> None:
        pass

    def end_dialogue(self, rng: np.random.Generator) -> None:
        pass

    def save(self, path: str | Path) -> None:
        raise NotImplementedError


def uniform_legal(mask: np.ndarray, rng: np.random.Generator) -> int:
    legal = np.flatnonzero(mask)
    return int(legal[int(rng.integers(len(legal)))])


def masked_argmax(values: np.ndarray, mask: np.ndarray) -> int:
    """Highest value among legal actions; ties go to the lowest index."""
    scores = np.where(mask, values, -np.inf)
    return int(np.argmax(scores))


def save_checkpoint(path: str | Path, algorithm: str, meta: dict,
                    arrays: dict[str, np.ndarray]) -> None:
    header = {
        "format_version": CHECKPOINT_VERSION,
        "algorithm": algorithm,
        **meta,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, __header__=np.frombuffer(
        json.dumps(header, sort_keys=True).encode(), dtype=np.uint8
    ), **arrays)


def load_checkpoint(path: str | Path) -> tuple[str, dict, dict[str, np.ndarray]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    with np.load(path, allow_pickle=False) as payload:
        header = json.loads(bytes(payload["__header__"]).decode())
        arrays = {k: payload[k] for k in payload.files if k != "__header__"}
    version = header.pop("format_version", None)
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    algorithm = header.pop("algorithm")
    return algorithm, header, arrays
