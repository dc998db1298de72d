"""Differentiable LP solver and inverse-optimization learner."""

import json

from ._core import InvoptError, loss_and_grad, solve_lp
from . import _core

__all__ = ["InvoptError", "generate", "learn", "loss_and_grad", "solve_lp", "trig_demo"]


def generate(task, d, m, seed=0, index=0):
    return json.loads(_core.generate(task, d, m, seed, index))


def trig_demo():
    return json.loads(_core.trig_demo())


def learn(instance, loss=None, hyper_search=None, max_steps=200, seed=0):
    """Learn from an instance dict; returns one record per learned target."""
    text = instance if isinstance(instance, str) else json.dumps(instance)
    return [json.loads(r) for r in _core.learn(text, loss, hyper_search, max_steps, seed)]
