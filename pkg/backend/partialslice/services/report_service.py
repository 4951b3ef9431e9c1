"""
Report Service

This module writes and reads verification results as CSV:
- header suite,case,level,metric,value,tolerance,pass
- values in scientific notation with 15 significant digits, LF line endings
"""

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Union

from ..serializers import ResultRow
from .base_service import ServiceException

logger = logging.getLogger(__name__)

CSV_HEADER = ['suite', 'case', 'level', 'metric', 'value', 'tolerance', 'pass']


def format_real(value: float) -> str:
    return '%.14e' % value


def emit_csv(rows: Iterable[ResultRow], path: Union[str, Path]) -> None:
    """
    Write rows to path, header first

    Raises:
        ServiceException: If the path cannot be written
    """
    rows = list(rows)
    try:
        with open(path, 'w', newline='', encoding='utf-8') as handle:
            writer = csv.writer(handle, lineterminator='\n')
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([
                    row.suite,
                    row.case,
                    row.level,
                    row.metric,
                    format_real(row.value),
                    format_real(row.tolerance),
                    'true' if row.passed else 'false',
                ])
    except OSError as e:
        raise ServiceException(message=f"Cannot write {path}: {e}", code='unwritable_path') from e
    logger.info(f"Wrote {len(rows)} rows to {path}")


def read_csv(path: Union[str, Path]) -> List[ResultRow]:
    """Parse a file written by emit_csv."""
    with open(path, newline='', encoding='utf-8') as handle:
        reader = csv.DictReader(handle)
        return [
            ResultRow(
                suite=record['suite'],
                case=record['case'],
                level=int(record['level']),
                metric=record['metric'],
                value=float(record['value']),
                tolerance=float(record['tolerance']),
                passed=record['pass'] == 'true',
            )
            for record in reader
        ]


def summarize(rows: Iterable[ResultRow]) -> Dict[str, Dict[str, int]]:
    """Passed and failed row counts per suite, in first-seen order."""
    summary: Dict[str, Dict[str, int]] = {}
    for row in rows:
        counts = summary.setdefault(row.suite, {'passed': 0, 'failed': 0})
        counts['passed' if row.passed else 'failed'] += 1
    return summary
