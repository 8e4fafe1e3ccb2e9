from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any


def _utc_now() -> datetime:
    return datetime.now(tz=timezone.utc)


@dataclass(frozen=True)
class RecordedRun:
    id: int
    command: str
    input_digest: str | None
    exit_code: int
    summary: dict[str, Any]
    created_at: str


class RunStore:
    """Append-only ledger of CLI runs."""

    def __init__(self, db_path: Path) -> None:
        db_path.parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(db_path)
        self._conn.row_factory = sqlite3.Row
        self._migrate()

    def close(self) -> None:
        self._conn.close()

    def _migrate(self) -> None:
        self._conn.execute(
            """
            CREATE TABLE IF NOT EXISTS runs (
              id INTEGER PRIMARY KEY AUTOINCREMENT,
              command TEXT NOT NULL,
              input_digest TEXT,
              exit_code INTEGER NOT NULL,
              summary_json TEXT NOT NULL,
              created_at TEXT NOT NULL
            )
            """
        )
        self._conn.commit()

    def record_run(
        self,
        *,
        command: str,
        input_digest: str | None,
        exit_code: int,
        summary: dict[str, Any],
    ) -> int:
        cur = self._conn.execute(
            "INSERT INTO runs(command, input_digest, exit_code, summary_json, created_at) "
            "VALUES(?,?,?,?,?)",
            (
                command,
                input_digest,
                exit_code,
                json.dumps(summary, sort_keys=True, default=str),
                _utc_now().isoformat(),
            ),
        )
        self._conn.commit()
        return int(cur.lastrowid or 0)

    def recent_runs(self, *, limit: int = 20, command: str | None = None) -> list[RecordedRun]:
        if command is None:
            rows = self._conn.execute(
                "SELECT * FROM runs ORDER BY id DESC LIMIT ?", (limit,)
            ).fetchall()
        else:
            rows = self._conn.execute(
                "SELECT * FROM runs WHERE command = ? ORDER BY id DESC LIMIT ?",
                (command, limit),
            ).fetchall()
        return [
            RecordedRun(
                id=r["id"],
                command=r["command"],
                input_digest=r["input_digest"],
                exit_code=r["exit_code"],
                summary=json.loads(r["summary_json"]),
                created_at=r["created_at"],
            )
            for r in rows
        ]
