"""Dialogue MDP: 18 standard tasks (6 environments x 3 domains).

Environments differ in semantic error rate, whether action masks apply,
and the user population:

    env  error rate  masks  users
    1    0.00        on     standard
    2    0.00        off    standard
    3    0.15        on     standard
    4    0.15        off    standard
    5    0.15        on     unfriendly
    6    0.30        on     standard

An episode runs for at most 25 system turns with discount 0.99.  Every
system turn costs 1; a dialogue that fulfils the user's goal earns a +20
bonus on its final turn, so the undiscounted return is 20 * success - turns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import IO

import numpy as np

from dialbench.action_space import SummaryAction, build_action_set, compute_mask, summary_to_master
from dialbench.belief_tracker import BeliefState, flatten, init_belief, update
from dialbench.domain import DOMAIN_CODES, Ontology, generate_domain
from dialbench.error_channel import ErrorParams, corrupt, preset_for_env
from dialbench.semantics import DialogueAct, NBestList, serialize_act
from dialbench.simulated_user import (
    PROFILES,
    ProfileDistribution,
    SimulatedUser,
    UserGoal,
    is_goal_fulfilled,
    sample_goal,
    sample_params,
)

_ENV_ROWS = {
    1: (0.00, True, "standard"),
    2: (0.00, False, "standard"),
    3: (0.15, True, "standard"),
    4: (0.15, False, "standard"),
    5: (0.15, True, "unfriendly"),
    6: (0.30, True, "standard"),
}

MAX_TURNS = 25
GAMMA = 0.99
SUCCESS_REWARD = 20.0
TURN_PENALTY = 1.0


@dataclass(frozen=True)
class TaskConfig:
    task_id: str
    env_index: int
    domain_code: str
    ser: float
    masks_enabled: bool
    user_profile: str
    max_turns: int = MAX_TURNS
    gamma: float = GAMMA
    success_reward: float = SUCCESS_REWARD
    turn_penalty: float = TURN_PENALTY


def make_task(task_id: str) -> TaskConfig:
    """Parse ids of the form ``env3-SFR``."""
    try:
        env_part, domain_code = task_id.split("-", 1)
        env_index = int(env_part.removeprefix("env"))
        ser, masks, profile = _ENV_ROWS[env_index]
    except (ValueError, KeyError):
        raise ValueError(f"unknown task id {task_id!r}") from None
    if domain_code not in DOMAIN_CODES:
        raise ValueError(f"unknown domain code {domain_code!r}")
    return TaskConfig(
        task_id=task_id,
        env_index=env_index,
        domain_code=domain_code,
        ser=ser,
        masks_enabled=masks,
        user_profile=profile,
    )


def list_tasks() -> list[str]:
    return [f"env{e}-{d}" for e in sorted(_ENV_ROWS) for d in DOMAIN_CODES]


@dataclass
class StepResult:
    belief: BeliefState
    observation: np.ndarray
    mask: np.ndarray
    reward: float
    done: bool


@dataclass
class TurnRecord:
    turn: int
    system_act: DialogueAct
    user_act: DialogueAct | None
    nbest: NBestList | None
    belief: BeliefState | None
    action_index: int | None
    fallback: bool = False


@dataclass
class EpisodeResult:
    success: bool
    turns: int
    final_reward: float
    discounted_return: float
    trace: list[TurnRecord]
    goal: UserGoal


def compute_return(rewards: list[float], gamma: float = GAMMA) -> float:
    return float(sum(r * gamma**t for t, r in enumerate(rewards)))


class ContractViolation(RuntimeError):
    """Stepping a finished episode or taking a masked action."""


class DialogueEnv:
    """One reusable environment; reset() starts a fresh dialogue."""

    def __init__(self, task: TaskConfig, ontology: Ontology | None = None,
                 error_params: ErrorParams | None = None,
                 profile: ProfileDistribution | None = None):
        self.task = task
        self.ontology = ontology if ontology is not None else generate_domain(task.domain_code)
        base = error_params if error_params is not None else preset_for_env(task.env_index)
        if abs(base.ser - task.ser) > 1e-12:
            base = replace(base, ser=task.ser)
        self.error_params = base
        self.profile = profile if profile is not None else PROFILES[task.user_profile]
        self.actions: tuple[SummaryAction, ...] = build_action_set(self.ontology)
        self._user: SimulatedUser | None = None
        self._belief: BeliefState | None = None
        self._done = True
        self._turns = 0
        self._rewards: list[float] = []
        self._trace: list[TurnRecord] = []

    @property
    def action_count(self) -> int:
        return len(self.actions)

    def reset(self, rng: np.random.Generator) -> StepResult:
        params = sample_params(self.profile, rng)
        goal = sample_goal(self.ontology, params, rng)
        self._user = SimulatedUser(self.ontology, params, goal, rng)
        self._done = False
        self._turns = 0
        self._rewards = []
        self._trace = []

        opening = self._user.opening_act(rng)
        nbest = corrupt(opening, self.error_params, self.ontology, rng)
        belief = update(init_belief(self.ontology), nbest, DialogueAct("hello"), self.ontology)
        self._belief = belief
        self._trace.append(
            TurnRecord(0, DialogueAct("hello"), opening, nbest, belief, None)
        )
        return StepResult(
            belief=belief,
            observation=flatten(belief, self.ontology),
            mask=compute_mask(belief, self.ontology, self.task.masks_enabled),
            reward=0.0,
            done=False,
        )

    def step(self, action_index: int, rng: np.random.Generator) -> StepResult:
        if self._done or self._user is None or self._belief is None:
            raise ContractViolation("step() on a finished episode")
        mask = compute_mask(self._belief, self.ontology, self.task.masks_enabled)
        if not 0 <= action_index < len(self.actions):
            raise ContractViolation(f"action index {action_index} out of range")
        if not mask[action_index]:
            raise ContractViolation(
                f"action {self.actions[action_index].label()} is masked"
            )

        action = self.actions[action_index]
        fallback = (
            action.kind == "inform_requested"
            and self._belief.offered_entity_id not in self.ontology.entity_by_id
        )
        system_act = summary_to_master(action, self._belief, self.ontology)
        self._turns += 1

        if system_act.act_type == "bye":
            return self._finish(system_act, None, None, action_index, fallback)

        user_act = self._user.respond(system_act, rng)
        if user_act.act_type == "bye":
            return self._finish(system_act, user_act, None, action_index, fallback)

        nbest = corrupt(user_act, self.error_params, self.ontology, rng)
        belief = update(self._belief, nbest, system_act, self.ontology)
        self._belief = belief
        self._trace.append(
            TurnRecord(self._turns, system_act, user_act, nbest, belief,
                       action_index, fallback)
        )

        if self._turns >= self.task.max_turns:
            return self._close_out(belief)

        self._rewards.append(-self.task.turn_penalty)
        return StepResult(
            belief=belief,
            observation=flatten(belief, self.ontology),
            mask=compute_mask(belief, self.ontology, self.task.masks_enabled),
            reward=-self.task.turn_penalty,
            done=False,
        )

    def _success(self) -> bool:
        return is_goal_fulfilled(
            self._user.goal,
            [t.system_act for t in self._trace if t.system_act is not None],
            self.ontology,
        )

    def _finish(self, system_act: DialogueAct, user_act: DialogueAct | None,
                nbest: NBestList | None, action_index: int,
                fallback: bool) -> StepResult:
        self._trace.append(
            TurnRecord(self._turns, system_act, user_act, nbest, self._belief,
                       action_index, fallback)
        )
        success = self._success()
        reward = -self.task.turn_penalty + (
            self.task.success_reward if success else 0.0
        )
        self._rewards.append(reward)
        self._done = True
        return StepResult(
            belief=self._belief,
            observation=flatten(self._belief, self.ontology),
            mask=compute_mask(self._belief, self.ontology, self.task.masks_enabled),
            reward=reward,
            done=True,
        )

    def _close_out(self, belief: BeliefState) -> StepResult:
        """Turn cap reached after a normal exchange."""
        success = self._success()
        reward = -self.task.turn_penalty + (
            self.task.success_reward if success else 0.0
        )
        self._rewards.append(reward)
        self._done = True
        return StepResult(
            belief=belief,
            observation=flatten(belief, self.ontology),
            mask=compute_mask(belief, self.ontology, self.task.masks_enabled),
            reward=reward,
            done=True,
        )

    def result(self) -> EpisodeResult:
        if not self._done:
            raise ContractViolation("result() before the episode finished")
        success = self._success()
        return EpisodeResult(
            success=success,
            turns=self._turns,
            final_reward=self.task.success_reward * success - self._turns,
            discounted_return=compute_return(self._rewards, self.task.gamma),
            trace=self._trace,
            goal=self._user.goal,
        )


def _nbest_payload(nbest: NBestList | None):
    if nbest is None:
        return None
    return {
        "hypotheses": [[serialize_act(h.act), round(h.confidence, 6)] for h in nbest],
        "residual": round(nbest.residual, 6),
    }


def write_trace(episode: EpisodeResult, stream: IO[str],
                ontology: Ontology | None = None) -> None:
    """One JSON line per turn; beliefs serialized sparsely."""
    for rec in episode.trace:
        row = {
            "turn": rec.turn,
            "system_act": serialize_act(rec.system_act) if rec.system_act else None,
            "user_act": serialize_act(rec.user_act) if rec.user_act else None,
            "nbest": _nbest_payload(rec.nbest),
            "action_index": rec.action_index,
            "fallback": rec.fallback,
        }
        if ontology is not None and rec.belief is not None:
            vec = flatten(rec.belief, ontology)
            nz = np.nonzero(vec)[0]
            row["belief"] = [[int(i), round(float(vec[i]), 6)] for i in nz]
        stream.write(json.dumps(row) + "\n")
