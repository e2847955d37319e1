"""Implementation of report writer which is responsible for recording analysis tables and the summary."""

import csv
import json
import logging
import math
import os
from concurrent.futures import Future
from concurrent.futures.thread import ThreadPoolExecutor
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

LOGGER = logging.getLogger('report_writer')

Cell = Optional[Any]


def format_cell(value: Cell) -> str:
    """Floats are written by repr so that values survive a round trip, None is an empty (masked) field"""
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(value):
            raise ValueError(f'Non-finite value {value} cannot be written to a report')
        return repr(float(value))
    return str(value)


class ReportWriter:
    """
    Writes CSV tables to an output directory.

    Tables are written by a single worker thread in submission order, close() waits for all of them.
    Without an output directory only the summary is produced.
    """

    def __init__(self, out_dir: Optional[str]):
        self.out_dir = out_dir
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
        self.tables: Dict[str, int] = {}
        self._pending: List[Future] = []
        self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix='ReportWriter')

    def _write(self, path: str, header: Sequence[str], rows: List[List[str]]) -> None:
        with open(path, 'w', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            writer.writerows(rows)
        LOGGER.debug(f'{path}: {len(rows)} rows')

    def table(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> None:
        formatted = []
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f'Table {name}: row {row} does not match header {header}')
            formatted.append([format_cell(v) for v in row])
        self.tables[name] = len(formatted)
        if self.out_dir is None:
            LOGGER.warning(f'No output directory, table {name} is not written')
            return
        self._pending.append(self._executor.submit(self._write, os.path.join(self.out_dir, name), header, formatted))

    def summary(self, summary: Dict[str, Any]) -> str:
        """Writes summary.json next to the tables and returns its text"""
        text = json.dumps(summary, sort_keys=True, indent=2, allow_nan=False)
        if self.out_dir is not None:
            with open(os.path.join(self.out_dir, 'summary.json'), 'w') as f:
                f.write(text + '\n')
        return text

    def close(self) -> None:
        for future in self._pending:
            future.result()
        self._pending.clear()
        self._executor.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


def error_summary(exit_code: int, message: str) -> str:
    return json.dumps({'error': message, 'exit_code': exit_code}, sort_keys=True, indent=2)
