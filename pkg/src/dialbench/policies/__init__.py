"""Policy registry: handcrafted baseline plus four learners."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from dialbench.domain import Ontology
from dialbench.policies.a2c import A2CConfig, A2CPolicy, a2c_loss
from dialbench.policies.base import (
    EpsilonSchedule,
    Policy,
    Transition,
    load_checkpoint,
    masked_argmax,
    save_checkpoint,
    uniform_legal,
)
from dialbench.policies.dqn import DQNConfig, DQNPolicy, bellman_targets
from dialbench.policies.enac import ENACConfig, ENACPolicy, enac_natural_gradient
from dialbench.policies.gpsarsa import GPSarsaConfig, GPSarsaPolicy
from dialbench.policies.handcrafted import HandcraftedPolicy

ALGORITHMS = ("handcrafted", "gpsarsa", "dqn", "a2c", "enac")

_LEARNERS = {
    "gpsarsa": GPSarsaPolicy,
    "dqn": DQNPolicy,
    "a2c": A2CPolicy,
    "enac": ENACPolicy,
}


def make_policy(algorithm: str, obs_dim: int, action_count: int,
                ontology: Ontology | None = None,
                init_rng: np.random.Generator | None = None,
                **config_kwargs) -> Policy:
    if algorithm == "handcrafted":
        if ontology is None:
            raise ValueError("handcrafted policy needs the ontology")
        return HandcraftedPolicy(ontology, **config_kwargs)
    try:
        cls = _LEARNERS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; "
                         f"choose from {ALGORITHMS}") from None
    config_cls = {
        "gpsarsa": GPSarsaConfig,
        "dqn": DQNConfig,
        "a2c": A2CConfig,
        "enac": ENACConfig,
    }[algorithm]
    config = config_cls(**config_kwargs) if config_kwargs else None
    if algorithm == "gpsarsa":
        return cls(obs_dim, action_count, config)
    return cls(obs_dim, action_count, config, init_rng=init_rng)


def load_policy(path: str | Path, ontology: Ontology | None = None) -> Policy:
    """Reopen any saved policy; the checkpoint names its algorithm."""
    algorithm, _, _ = load_checkpoint(path)
    if algorithm == "handcrafted":
        if ontology is None:
            raise ValueError("handcrafted checkpoints need the ontology")
        return HandcraftedPolicy.load(path, ontology)
    return _LEARNERS[algorithm].load(path)


__all__ = [
    "ALGORITHMS",
    "A2CConfig",
    "A2CPolicy",
    "DQNConfig",
    "DQNPolicy",
    "ENACConfig",
    "ENACPolicy",
    "EpsilonSchedule",
    "GPSarsaConfig",
    "GPSarsaPolicy",
    "HandcraftedPolicy",
    "Policy",
    "Transition",
    "a2c_loss",
    "bellman_targets",
    "enac_natural_gradient",
    "load_checkpoint",
    "load_policy",
    "make_policy",
    "masked_argmax",
    "save_checkpoint",
    "uniform_legal",
]
