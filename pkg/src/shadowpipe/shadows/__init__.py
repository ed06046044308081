"""Background analysis pipelines that screen a run for issues, localize root
causes, evaluate candidate fixes on the smallest sufficient row sets, and
emit applicable suggestions."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..calls import LatencyConfig
from ..corpus import CorpusBundle
from ..engine import PipelineRoles, RunResult, resolve_roles
from ..plan import PipelinePlan


@dataclass
class ShadowInput:
    """Read-only snapshot handed to every analysis pipeline."""

    plan: PipelinePlan
    bundle: CorpusBundle
    run: RunResult
    latency: LatencyConfig = field(default_factory=LatencyConfig)
    sleep: bool = False
    seed: int = 7

    _roles: PipelineRoles | None = None

    @property
    def roles(self) -> PipelineRoles:
        if self._roles is None:
            self._roles = resolve_roles(self.plan)
        return self._roles

    def user_country(self) -> dict[str, str]:
        users = self.bundle.users
        return dict(zip(users.columns["user_id"], users.columns["country"]))
