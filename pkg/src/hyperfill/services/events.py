from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from hyperfill.services.utils import json_ready, utc_now_iso


@dataclass
class EventLogger:
    path: Path
    run: str
    enabled: bool = True

    def log(
        self,
        *,
        event_type: str,
        stage: str,
        detail: Mapping[str, Any] | None = None,
    ) -> None:
        if not self.enabled:
            return
        payload = {
            "ts": utc_now_iso(),
            "run": self.run,
            "event_type": event_type,
            "stage": stage,
            "detail": json_ready(dict(detail or {})),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(payload, sort_keys=True) + "\n")
