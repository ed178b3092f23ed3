"""Episodic natural actor-critic.

Each episode contributes one regression row: the summed score function
of the actions taken against the episode return.  A ridge least-squares
fit with a bias column recovers the natural gradient, which is applied
as a normalized step on the softmax policy parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dialbench.belief_tracker import BeliefState
from dialbench.policies.base import (
    EpsilonSchedule,
    Policy,
    Transition,
    load_checkpoint,
    masked_argmax,
    save_checkpoint,
    uniform_legal,
)
from dialbench.rl_core import (
    Net2,
    forward,
    forward_cache,
    grad_log_prob,
    init_net,
)


@dataclass(frozen=True)
class ENACConfig:
    hidden1: int = 130
    hidden2: int = 50
    step_size: float = 0.1
    eps0: float = 0.3
    eps_final: float = 0.05
    anneal_dialogues: int = 4000
    gamma: float = 0.99
    batch_episodes: int = 20
    ridge: float = 1e-4


def enac_natural_gradient(phis: np.ndarray, returns: np.ndarray,
                          ridge: float = 1e-4) -> np.ndarray:
    """Regress returns on summed scores; the weights (bias dropped) are
    the natural-gradient direction.

    When parameters outnumber episodes the ridge solution is obtained
    in its dual form, which involves only an episodes-sized system.
    """
    phis = np.atleast_2d(np.asarray(phis, dtype=np.float64))
    returns = np.asarray(returns, dtype=np.float64)
    design = np.concatenate([phis, np.ones((phis.shape[0], 1))], axis=1)
    n, p = design.shape
    if p <= n:
        normal = design.T @ design + ridge * np.eye(p)
        coef = np.linalg.solve(normal, design.T @ returns)
    else:
        dual = design @ design.T + ridge * np.eye(n)
        coef = design.T @ np.linalg.solve(dual, returns)
    return coef[:-1]


class ENACPolicy(Policy):
    algorithm = "enac"
    trains = True

    def __init__(self, obs_dim: int, action_count: int,
                 config: ENACConfig | None = None,
                 init_rng: np.random.Generator | None = None):
        super().__init__(obs_dim, action_count)
        self.config = config if config is not None else ENACConfig()
        rng = init_rng if init_rng is not None else np.random.default_rng(0)
        self.net = init_net(obs_dim, self.config.hidden1, self.config.hidden2,
                            action_count, "softmax", rng)
        self.schedule = EpsilonSchedule(self.config.eps0, self.config.eps_final,
                                        self.config.anneal_dialogues)
        self.epsilon = self.config.eps0
        self._training = False
        self._phi: np.ndarray | None = None
        self._rewards: list[float] = []
        self._batch_phis: list[np.ndarray] = []
        self._batch_returns: list[float] = []

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.net.params())

    def begin_dialogue(self, dialogue_index: int, training: bool) -> None:
        self.epsilon = self.schedule.at(dialogue_index)
        self._training = training
        self._phi = np.zeros(self.param_count)
        self._rewards = []

    def act(self, observation: np.ndarray, mask: np.ndarray,
            rng: np.random.Generator, greedy: bool = False,
            belief: BeliefState | None = None) -> int:
        cache = forward_cache(self.net, observation, mask)
        p = np.atleast_2d(cache.out)[0]
        if greedy or not self._training:
            return masked_argmax(p, mask)
        if rng.random() < self.epsilon:
            action = uniform_legal(mask, rng)
        else:
            action = int(rng.choice(self.action_count, p=p / p.sum()))
        # the uniform branch is treated as on-policy when accumulating
        # scores; the bias this introduces shrinks with epsilon
        grads = grad_log_prob(self.net, cache, action)
        self._phi += np.concatenate([g.ravel() for g in grads])
        return action

    def observe(self, transition: Transition, rng: np.random.Generator) -> None:
        if self._training:
            self._rewards.append(transition.reward)

    def end_dialogue(self, rng: np.random.Generator) -> None:
        if not self._training or not self._rewards:
            return
        gam = self.config.gamma ** np.arange(len(self._rewards))
        self._batch_phis.append(self._phi)
        self._batch_returns.append(float(gam @ np.array(self._rewards)))
        if len(self._batch_phis) >= self.config.batch_episodes:
            self.update()

    def update(self) -> None:
        w = enac_natural_gradient(np.stack(self._batch_phis),
                                  np.array(self._batch_returns),
                                  self.config.ridge)
        self._batch_phis, self._batch_returns = [], []
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return
        step = self.config.step_size * w / norm
        offset = 0
        for p in self.net.params():
            p += step[offset:offset + p.size].reshape(p.shape)
            offset += p.size

    def save(self, path: str | Path) -> None:
        meta = {
            "obs_dim": self.obs_dim,
            "action_count": self.action_count,
            "hidden1": self.config.hidden1,
            "hidden2": self.config.hidden2,
            "step_size": self.config.step_size,
            "gamma": self.config.gamma,
        }
        arrays = {f"p_{i}": p for i, p in enumerate(self.net.params())}
        save_checkpoint(path, self.algorithm, meta, arrays)

    @classmethod
    def load(cls, path: str | Path, config: ENACConfig | None = None) -> "ENACPolicy":
        algorithm, meta, arrays = load_checkpoint(path)
        if algorithm != cls.algorithm:
            raise ValueError(f"checkpoint holds {algorithm!r}, not enac")
        if config is None:
            config = ENACConfig(hidden1=int(meta["hidden1"]),
                                hidden2=int(meta["hidden2"]),
                                step_size=float(meta["step_size"]),
                                gamma=float(meta["gamma"]))
        policy = cls(int(meta["obs_dim"]), int(meta["action_count"]), config)
        net = policy.net
        net.w1, net.b1 = arrays["p_0"], arrays["p_1"]
        net.w2, net.b2 = arrays["p_2"], arrays["p_3"]
        net.w3, net.b3 = arrays["p_4"], arrays["p_5"]
        return policy
