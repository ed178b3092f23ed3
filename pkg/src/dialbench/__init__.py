"""Simulated task-oriented dialogue environments and baseline RL policies.

The package bundles three slot-filling domains, an agenda-driven user
simulator, a configurable semantic error channel, a rule-based belief
tracker, a fixed summary action space and five dialogue policies, plus a
benchmark harness that produces learning curves and result tables.
"""

from dialbench.domain import Ontology, generate_domain, load_ontology, query
from dialbench.environment import DialogueEnv, TaskConfig, list_tasks, make_task

__all__ = [
    "Ontology",
    "generate_domain",
    "load_ontology",
    "query",
    "DialogueEnv",
    "TaskConfig",
    "list_tasks",
    "make_task",
]

__version__ = "0.1.0"
