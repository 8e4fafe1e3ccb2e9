from __future__ import annotations

from dataclasses import dataclass

from .config import Settings
from .run_store import RunStore


@dataclass(frozen=True)
class Deps:
    settings: Settings
    store: RunStore | None = None
