"""
Run Log Manager Module
Handles the opt-in SQLite ledger of command runs (status, seed, config digest, resources)
"""
import json
import os
import sqlite3
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

import psutil

from domain_types import TOOL_VERSION
from error_utils import safe_log_error


def peak_rss_bytes() -> int:
    """Peak resident set size of this process where the platform reports it, else the current RSS"""
    memory = psutil.Process().memory_info()
    return int(getattr(memory, 'peak_wset', 0) or memory.rss)


class RunLogManager:
    """Manages the run ledger database"""

    def __init__(self, db_path: str):
        """
        Initialize RunLogManager

        Args:
            db_path: Path to the SQLite database file (created on first use)
        """
        self.db_path = db_path
        self.init_database()

    def init_database(self):
        """Create the runs table if it does not exist"""
        db_dir = os.path.dirname(self.db_path)
        if db_dir and not os.path.exists(db_dir):
            os.makedirs(db_dir, exist_ok=True)

        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS runs (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                timestamp TEXT NOT NULL,
                command TEXT NOT NULL,
                status TEXT NOT NULL,
                seed INTEGER,
                config_digest TEXT,
                tool_version TEXT NOT NULL,
                duration_seconds REAL,
                peak_rss_bytes INTEGER,
                outputs TEXT,
                error_message TEXT,
                details TEXT
            )
        ''')
        conn.commit()
        conn.close()

    def log_run(self, command: str, status: str, seed: Optional[int] = None,
                config_digest: Optional[str] = None, duration_seconds: Optional[float] = None,
                outputs: Optional[List[str]] = None, error_message: Optional[str] = None,
                details: Optional[Dict[str, Any]] = None) -> bool:
        """
        Record one command run

        Args:
            command: Subcommand name (gen-data, train, explain, ...)
            status: completed or error
            seed: Root seed of the run
            config_digest: Digest of the effective config
            duration_seconds: Wall time
            outputs: Paths written by the run
            error_message: Diagnostic when status is error
            details: Extra JSON-encodable information

        Returns:
            bool: True if logged successfully
        """
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()
            cursor.execute('''
                INSERT INTO runs
                (timestamp, command, status, seed, config_digest, tool_version,
                 duration_seconds, peak_rss_bytes, outputs, error_message, details)
                VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
            ''', (datetime.now(timezone.utc).isoformat(), command, status, seed, config_digest, TOOL_VERSION,
                  duration_seconds, peak_rss_bytes(), json.dumps(outputs or []),
                  error_message, json.dumps(details) if details else None))
            conn.commit()
            conn.close()
            return True
        except Exception as e:
            safe_log_error(e, context="log_run")
            return False

    def get_runs(self, limit: int = 100, command: Optional[str] = None,
                 status: Optional[str] = None) -> Dict[str, Any]:
        """
        Most recent runs first, optionally filtered

        Returns:
            Dict with runs and total count, or error
        """
        try:
            conn = sqlite3.connect(self.db_path)
            cursor = conn.cursor()

            where_clauses = []
            params: List[Any] = []
            if command:
                where_clauses.append("command = ?")
                params.append(command)
            if status:
                where_clauses.append("status = ?")
                params.append(status)
            where_clause = " WHERE " + " AND ".join(where_clauses) if where_clauses else ""

            cursor.execute(f"SELECT COUNT(*) FROM runs{where_clause}", params)
            total = cursor.fetchone()[0]
            cursor.execute(f'''
                SELECT id, timestamp, command, status, seed, config_digest, tool_version,
                       duration_seconds, peak_rss_bytes, outputs, error_message, details
                FROM runs{where_clause}
                ORDER BY id DESC
                LIMIT ?
            ''', params + [limit])

            runs = []
            for row in cursor.fetchall():
                (run_id, timestamp, cmd, run_status, seed, digest, version,
                 duration, rss, outputs_json, error, details_json) = row
                runs.append({
                    'id': run_id,
                    'timestamp': timestamp,
                    'command': cmd,
                    'status': run_status,
                    'seed': seed,
                    'config_digest': digest,
                    'tool_version': version,
                    'duration_seconds': duration,
                    'peak_rss_bytes': rss,
                    'outputs': json.loads(outputs_json) if outputs_json else [],
                    'error_message': error,
                    'details': json.loads(details_json) if details_json else None,
                })
            conn.close()
            return {'runs': runs, 'total': total}
        except Exception as e:
            safe_log_error(e, context="get_runs")
            return {'error': 'Failed to retrieve runs', 'runs': [], 'total': 0}
