"""
On-disk artifacts of a run: long-format CSV series and the JSON manifest.
"""

import csv
import json
import logging
from collections import defaultdict
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

SERIES_COLUMNS = ('replica', 'N', 't', 'value')
DENSITY_COLUMNS = ('x', 'density')
AGGREGATE = -1


def format_float(value):
    return format(float(value), '.17g')


class NumericEncoder(json.JSONEncoder):
    """JSON for numpy scalars/arrays, complex numbers and paths."""

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, complex):
            return {'real': o.real, 'imag': o.imag}
        if isinstance(o, Path):
            return str(o)
        return super().default(o)


def to_jsonable(payload):
    """Round-trip through the encoder so the result only holds builtins."""
    return json.loads(json.dumps(payload, cls=NumericEncoder))


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, cls=NumericEncoder, indent=2, sort_keys=True) + '\n')
    return path


class SeriesWriter:
    """
    Collects (replica, N, t, value) rows per metric and writes one CSV each.

    Rows can arrive in any order (for example from worker threads); they are
    sorted by (N, t, replica) before writing so output bytes only depend on
    the values.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.rows = defaultdict(list)

    def add(self, metric, replica, n, t, value):
        self.rows[metric].append((int(replica), int(n), float(t), float(value)))

    def add_series(self, metric, n, t, values, replica=AGGREGATE):
        for time, value in zip(t, values):
            self.add(metric, replica, n, time, value)

    def add_replicas(self, metric, n, t, per_replica):
        """Every replica row followed by the across-replica mean (replica -1)."""
        per_replica = np.asarray(per_replica, dtype=float)
        for replica, values in enumerate(per_replica):
            self.add_series(metric, n, t, values, replica=replica)
        self.add_series(metric, n, t, per_replica.mean(axis=0))

    def flush(self):
        """Write every metric; returns {metric: path}."""
        self.directory.mkdir(parents=True, exist_ok=True)
        paths = {}
        for metric in sorted(self.rows):
            path = self.directory / f"{metric}.csv"
            rows = sorted(self.rows[metric], key=lambda row: (row[1], row[2], row[0]))
            with path.open('w', newline='') as handle:
                writer = csv.writer(handle, lineterminator='\n')
                writer.writerow(SERIES_COLUMNS)
                for replica, n, t, value in rows:
                    writer.writerow([replica, n, format_float(t), format_float(value)])
            logger.debug("Wrote %d rows to %s", len(rows), path)
            paths[metric] = str(path)
        return paths


def write_density(directory, density):
    path = Path(directory) / 'density.csv'
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', newline='') as handle:
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(DENSITY_COLUMNS)
        for x, value in zip(density.grid.midpoints, density.values):
            writer.writerow([format_float(x), format_float(value)])
    return path


def read_series(path):
    """
    Parse a CSV written by this module into a column dict of arrays.

    Raises ValueError when the header is not one of the documented schemas.
    """
    with Path(path).open(newline='') as handle:
        reader = csv.reader(handle)
        header = tuple(next(reader, ()))
        if header not in (SERIES_COLUMNS, DENSITY_COLUMNS):
            raise ValueError(f"Unexpected CSV header in {path}: {header}")
        rows = [[float(cell) for cell in row] for row in reader]
    table = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: table[:, k] for k, name in enumerate(header)}
