"""
Experiment configuration documents.

A document is either JSON or flat ``key = value`` text:

    kind = EntropyDecay          # comments run to the end of the line
    model.V = quadratic:1.0
    model.W = mollified_coulomb:0.3,1.0
    n_list = 8, 16, 32
    t_grid = 0:15:151            # start:stop:count, both ends included

Dotted keys nest, comma lists become lists and ``none`` is null. Both forms
produce the same mapping, which ExperimentConfigSerializer validates.
"""

import json
import logging
import re
from pathlib import Path

import numpy as np
from django.conf import settings
from django.utils.text import slugify

from .experiments import ExperimentConfig
from .serializers import ExperimentConfigSerializer

logger = logging.getLogger(__name__)

LIST_KEYS = {'n_list', 't_grid', 'epsilon_list', 'fit_window'}
NULL_WORDS = {'none', 'null'}
POTENTIAL_PATTERN = re.compile(r'^(quadratic|mollified_coulomb)\s*:\s*(.+)$')
RANGE_PATTERN = re.compile(r'^([^:,]+):([^:,]+):\s*(\d+)$')


class ConfigurationError(ValueError):
    """The document cannot be read as a configuration mapping."""


def _potential(kind, arguments):
    parts = [part.strip() for part in arguments.split(',')]
    if kind == 'quadratic':
        if len(parts) != 1:
            raise ConfigurationError("quadratic takes one coefficient, e.g. quadratic:1.0")
        return {'kind': kind, 'coefficient': parts[0]}
    if len(parts) != 2:
        raise ConfigurationError("mollified_coulomb takes strength,mollifier, e.g. mollified_coulomb:0.3,1.0")
    return {'kind': kind, 'strength': parts[0], 'mollifier': parts[1]}


def _linspace(start, stop, count):
    try:
        return np.linspace(float(start), float(stop), int(count)).tolist()
    except ValueError as error:
        raise ConfigurationError(f"Bad range {start}:{stop}:{count}") from error


def parse_value(text):
    text = text.strip()
    if text.lower() in NULL_WORDS:
        return None
    match = POTENTIAL_PATTERN.match(text)
    if match:
        return _potential(*match.groups())
    match = RANGE_PATTERN.match(text)
    if match:
        return _linspace(*match.groups())
    if ',' in text:
        return [part.strip() for part in text.split(',') if part.strip()]
    return text


def _assign(data, path, value, number):
    node = data
    for part in path[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"Line {number}: {'.'.join(path)} nests under a plain value.")
    if path[-1] in node:
        raise ConfigurationError(f"Line {number}: duplicate key {'.'.join(path)}.")
    if path[-1] in LIST_KEYS and len(path) == 1 and value is not None and not isinstance(value, list):
        value = [value]
    node[path[-1]] = value


def parse_flat(text):
    data = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key = key.strip()
        if not sep or not key:
            raise ConfigurationError(f"Line {number}: expected 'key = value', got {raw.strip()!r}.")
        path = [part.strip() for part in key.split('.')]
        if not all(path):
            raise ConfigurationError(f"Line {number}: empty segment in key {key!r}.")
        _assign(data, path, parse_value(value), number)
    return data


def parse_document(text):
    """Mapping from JSON or flat key/value text."""
    if text.lstrip().startswith('{'):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as error:
            raise ConfigurationError(f"Invalid JSON: {error}") from error
        if not isinstance(data, dict):
            raise ConfigurationError('A JSON configuration must be an object.')
        return data
    return parse_flat(text)


def default_output_dir(kind, seed):
    return Path(settings.LAB_OUTPUT_DIR) / f"{slugify(kind)}-{seed}"


def load_config(path=None, *, kind=None, overrides=None, data=None):
    """
    Read, merge and validate a configuration.

    Args:
        path: document on disk; ``data`` may be given instead.
        kind: experiment kind forced by the caller (a CLI subcommand).
        overrides: top-level values that win over the document, None skipped.

    Raises:
        ConfigurationError: unreadable document or conflicting kind.
        rest_framework.exceptions.ValidationError: schema violations.
    """
    if path is not None:
        try:
            data = parse_document(Path(path).read_text())
        except OSError as error:
            raise ConfigurationError(f"Cannot read {path}: {error}") from error
    data = dict(data or {})
    if kind is not None:
        declared = data.get('kind')
        if declared not in (None, kind):
            raise ConfigurationError(f"The document declares kind {declared!r}, this command runs {kind!r}.")
        data['kind'] = kind
    data.update({key: value for key, value in (overrides or {}).items() if value is not None})

    serializer = ExperimentConfigSerializer(data=data)
    serializer.is_valid(raise_exception=True)
    validated = dict(serializer.validated_data)
    validated.setdefault('output_dir', str(default_output_dir(validated['kind'], validated['seed'])))
    config = ExperimentConfig.from_validated(
        validated,
        ensemble_factor=settings.LAB_ENSEMBLE_FACTOR,
        lyapunov_epsilon_scale=settings.LAB_LYAPUNOV_EPSILON_SCALE,
    )
    logger.debug("Loaded %s configuration (seed %d)", config.kind, config.seed)
    return config


def describe_errors(detail, prefix=''):
    """Flatten DRF error details into 'field: message' lines."""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            name = key if key != 'non_field_errors' else ''
            lines.extend(describe_errors(value, f"{prefix}{name}." if name else prefix))
        return lines
    if isinstance(detail, list):
        lines = []
        for item in detail:
            lines.extend(describe_errors(item, prefix))
        return lines
    return [f"{prefix.rstrip('.')}: {detail}" if prefix else str(detail)]
