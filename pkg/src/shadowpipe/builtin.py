"""Access to the bundled reference plans."""

from __future__ import annotations

from importlib import resources

from .plan import PipelinePlan, parse_plan

BUILTIN_PLANS = ("rag", "train")


def builtin_plan_text(name: str) -> str:
    if name not in BUILTIN_PLANS:
        raise ValueError(f"unknown builtin plan {name!r}; available: {', '.join(BUILTIN_PLANS)}")
    return resources.files("shadowpipe.plans").joinpath(f"{name}.plan.json").read_text("utf-8")


def load_builtin_plan(name: str) -> PipelinePlan:
    return parse_plan(builtin_plan_text(name))
