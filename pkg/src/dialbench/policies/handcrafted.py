"""Deterministic rule policy; the non-learning baseline.

Ordered rules, each skipped when the mask forbids its action:

1. a slot is requested and an entity is on the table -> inform_requested
2. the user is asking for alternatives -> inform_alternatives
3. a constraint slot is believed but not firmly ([0.3, 0.8)) -> confirm it
4. a slot is still unknown and too many entities match -> request the
   least certain such slot
5. otherwise -> inform_byconstraints
6. the user sounded finished -> bye

with reqmore as the final fallback (always legal).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from dialbench.action_space import (
    OFFERED_THRESHOLD,
    REQUESTED_THRESHOLD,
    build_action_set,
    _top_constraints,
)
from dialbench.belief_tracker import BeliefState, method_top, top_nonnone, NONE_IDX
from dialbench.domain import Ontology, query
from dialbench.policies.base import Policy, load_checkpoint, save_checkpoint

CONFIRM_LOW = 0.3
CONFIRM_HIGH = 0.8


class HandcraftedPolicy(Policy):
    algorithm = "handcrafted"
    trains = False

    def __init__(self, ontology: Ontology, entity_threshold: int = 1):
        actions = build_action_set(ontology)
        super().__init__(obs_dim=0, action_count=len(actions))
        self.ontology = ontology
        self.entity_threshold = entity_threshold
        self._index = {a.label(): a.index for a in actions}

    def _idx(self, kind: str, slot: str | None = None) -> int:
        label = kind if slot is None else f"{kind}({slot})"
        return self._index[label]

    def act(self, observation: np.ndarray, mask: np.ndarray,
            rng: np.random.Generator, greedy: bool = False,
            belief: BeliefState | None = None) -> int:
        if belief is None:
            raise ValueError("the handcrafted policy needs the belief state")
        for idx in self._candidates(belief):
            if mask[idx]:
                return idx
        return int(np.flatnonzero(mask)[0])

    def _candidates(self, belief: BeliefState):
        ontology = self.ontology

        if (
            np.any(belief.requested > REQUESTED_THRESHOLD)
            and belief.entity_offered > OFFERED_THRESHOLD
        ):
            yield self._idx("inform_requested")

        if method_top(belief) == "byalternatives":
            yield self._idx("inform_alternatives")

        for slot in ontology.constraint_slots:
            _, prob = top_nonnone(belief, slot.name, ontology)
            if CONFIRM_LOW <= prob < CONFIRM_HIGH:
                yield self._idx("confirm", slot.name)
                break

        unknown = []
        for slot in ontology.constraint_slots:
            dist = belief.slot_beliefs[slot.name]
            _, prob = top_nonnone(belief, slot.name, ontology)
            if int(np.argmax(dist)) == NONE_IDX or prob < CONFIRM_LOW:
                unknown.append((prob, slot.name))
        if unknown:
            matches = query(ontology, _top_constraints(belief, ontology))
            if len(matches) > self.entity_threshold:
                _, slot_name = min(unknown, key=lambda pair: pair[0])
                yield self._idx("request", slot_name)

        yield self._idx("inform_byconstraints")

        if method_top(belief) == "finished":
            yield self._idx("bye")

        yield self._idx("reqmore")

    def save(self, path: str | Path) -> None:
        save_checkpoint(
            path,
            self.algorithm,
            {
                "domain": self.ontology.code,
                "entity_threshold": self.entity_threshold,
                "action_count": self.action_count,
            },
            {},
        )

    @classmethod
    def load(cls, path: str | Path, ontology: Ontology) -> "HandcraftedPolicy":
        algorithm, meta, _ = load_checkpoint(path)
        if algorithm != cls.algorithm:
            raise ValueError(f"checkpoint holds {algorithm!r}, not handcrafted")
        if meta["domain"] != ontology.code:
            raise ValueError(f"checkpoint was built for {meta['domain']}, "
                             f"got ontology {ontology.code}")
        return cls(ontology, entity_threshold=int(meta["entity_threshold"]))
