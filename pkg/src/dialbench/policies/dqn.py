"""Deep Q-network with replay buffer and a periodically synced target net."""

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
    AdamState,
    Net2,
    adam_init,
    adam_step,
    backward,
    forward,
    forward_cache,
    init_net,
)


@dataclass(frozen=True)
class DQNConfig:
    hidden1: int = 300
    hidden2: int = 100
    lr: float = 0.001
    buffer_size: int = 6000
    minibatch: int = 64
    train_after: int = 192        # transitions seen before updates start
    target_sync_dialogues: int = 2
    train_steps_per_turn: int = 1
    eps0: float = 0.3
    eps_final: float = 0.05
    anneal_dialogues: int = 4000
    gamma: float = 0.99


def bellman_targets(rewards: np.ndarray, next_q: np.ndarray,
                    next_masks: np.ndarray, dones: np.ndarray,
                    gamma: float) -> np.ndarray:
    """y = r + gamma * max over legal actions of Q_target(s'), 0 at ends."""
    best = np.where(next_masks.astype(bool), next_q, -np.inf).max(axis=1)
    best = np.where(dones.astype(bool), 0.0, best)
    return rewards + gamma * best


class DQNPolicy(Policy):
    algorithm = "dqn"
    trains = True

    def __init__(self, obs_dim: int, action_count: int,
                 config: DQNConfig | None = None,
                 init_rng: np.random.Generator | None = None):
        super().__init__(obs_dim, action_count)
        self.config = config if config is not None else DQNConfig()
        rng = init_rng if init_rng is not None else np.random.default_rng(0)
        self.q_net = init_net(obs_dim, self.config.hidden1, self.config.hidden2,
                              action_count, "linear", rng)
        self.target_net = self.q_net.copy()
        self.adam = adam_init(self.q_net.params(), lr=self.config.lr)
        self.schedule = EpsilonSchedule(self.config.eps0, self.config.eps_final,
                                        self.config.anneal_dialogues)
        self.epsilon = self.config.eps0
        self._buffer: list[Transition] = []
        self._write = 0
        self._dialogues = 0
        self._training = False

    def begin_dialogue(self, dialogue_index: int, training: bool) -> None:
        self.epsilon = self.schedule.at(dialogue_index)
        self._training = training

    def act(self, observation: np.ndarray, mask: np.ndarray,
            rng: np.random.Generator, greedy: bool = False,
            belief: BeliefState | None = None) -> int:
        if not greedy and self._training and rng.random() < self.epsilon:
            return uniform_legal(mask, rng)
        q = forward(self.q_net, observation)
        return masked_argmax(q, mask)

    def observe(self, transition: Transition, rng: np.random.Generator) -> None:
        if not self._training:
            return
        if len(self._buffer) < self.config.buffer_size:
            self._buffer.append(transition)
        else:
            self._buffer[self._write] = transition
            self._write = (self._write + 1) % self.config.buffer_size
        if len(self._buffer) >= self.config.train_after:
            for _ in range(self.config.train_steps_per_turn):
                self.train_step(rng)

    def train_step(self, rng: np.random.Generator) -> float:
        idx = rng.integers(len(self._buffer), size=self.config.minibatch)
        batch = [self._buffer[int(i)] for i in idx]
        obs = np.stack([t.observation for t in batch])
        actions = np.array([t.action for t in batch])
        rewards = np.array([t.reward for t in batch])
        next_obs = np.stack([t.next_observation for t in batch])
        next_masks = np.stack([t.next_mask for t in batch])
        dones = np.array([t.done for t in batch])

        next_q = forward(self.target_net, next_obs)
        targets = bellman_targets(rewards, next_q, next_masks, dones,
                                  self.config.gamma)

        cache = forward_cache(self.q_net, obs)
        q_taken = cache.out[np.arange(len(batch)), actions]
        err = q_taken - targets
        g_out = np.zeros_like(cache.out)
        g_out[np.arange(len(batch)), actions] = 2.0 * err / len(batch)
        grads = backward(self.q_net, cache, g_out)
        adam_step(self.adam, self.q_net.params(), grads)
        return float(np.mean(err**2))

    def end_dialogue(self, rng: np.random.Generator) -> None:
        if not self._training:
            return
        self._dialogues += 1
        if self._dialogues % self.config.target_sync_dialogues == 0:
            self.target_net = self.q_net.copy()

    def save(self, path: str | Path) -> None:
        meta = {
            "obs_dim": self.obs_dim,
            "action_count": self.action_count,
            "hidden1": self.config.hidden1,
            "hidden2": self.config.hidden2,
            "lr": self.config.lr,
            "gamma": self.config.gamma,
        }
        arrays = {
            f"q_{i}": p for i, p in enumerate(self.q_net.params())
        }
        save_checkpoint(path, self.algorithm, meta, arrays)

    @classmethod
    def load(cls, path: str | Path, config: DQNConfig | None = None) -> "DQNPolicy":
        algorithm, meta, arrays = load_checkpoint(path)
        if algorithm != cls.algorithm:
            raise ValueError(f"checkpoint holds {algorithm!r}, not dqn")
        if config is None:
            config = DQNConfig(hidden1=int(meta["hidden1"]),
                               hidden2=int(meta["hidden2"]),
                               lr=float(meta["lr"]), gamma=float(meta["gamma"]))
        policy = cls(int(meta["obs_dim"]), int(meta["action_count"]), config)
        net = policy.q_net
        net.w1, net.b1 = arrays["q_0"], arrays["q_1"]
        net.w2, net.b2 = arrays["q_2"], arrays["q_3"]
        net.w3, net.b3 = arrays["q_4"], arrays["q_5"]
        policy.target_net = net.copy()
        policy.adam = adam_init(net.params(), lr=policy.config.lr)
        return policy
