"""Contains functions for reading chain specification files used by the program."""

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from chain.core import ChainModel, Distribution, StochasticMatrix, TimeIndex
from chain.countable import RandomWalkFamily, ResetFamily, RowFamily, ShiftFamily, TruncationError, truncated_chain
from chain.families import absorbing_walk, alt_dim, permutation2
from chain.tail import InvalidEventError, TailEventSpec
from settings import ToleranceSettings, tail_settings, tolerances


class FormatError(Exception):
    def __init__(self, msg: str, line: Optional[int] = None, column: Optional[int] = None):
        if line is not None:
            msg = f'{msg} (line {line}, column {column})'
        super().__init__(msg)
        self.message = msg
        self.line = line
        self.column = column


LOGGER = logging.getLogger('files')

FINITE_FAMILIES = {
    'permutation2': permutation2,
    'alt_dim': alt_dim,
    'absorbing_walk': absorbing_walk,
}

COUNTABLE_FAMILIES = {
    'reset': ResetFamily,
    'random_walk': RandomWalkFamily,
    'shift': ShiftFamily,
}


@dataclass(frozen=True)
class ChainSpec:
    window: Tuple[TimeIndex, TimeIndex]
    model: Optional[ChainModel]
    """Explicit or builtin chain, truncated to 1..truncation for countable families, None if the truncation
    has rows without mass"""
    family: Optional[RowFamily]
    family_name: Optional[str]
    truncation: Optional[int]
    tail_event: Optional[TailEventSpec]
    bands: Tuple[float, float]
    tolerances: ToleranceSettings
    digest: str
    """SHA-256 of the document bytes"""


def _get(doc: Dict[str, Any], key: str, kind: type, path: str, required: bool = True) -> Any:
    if key not in doc:
        if required:
            raise FormatError(f'{path}: missing key "{key}"')
        return None
    value = doc[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise FormatError(f'{path}.{key}: expected {kind.__name__}, got {type(value).__name__}')
    return value


def _array(value: Any, ndim: int, path: str) -> np.ndarray:
    try:
        res = np.array(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise FormatError(f'{path}: not a numeric array: {e}')
    if res.ndim != ndim:
        raise FormatError(f'{path}: expected a {ndim} dimensional array, got shape {res.shape}')
    if not np.all(np.isfinite(res)):
        raise FormatError(f'{path}: entries must be finite')
    return res


def _read_window(doc: Dict[str, Any]) -> Tuple[TimeIndex, TimeIndex]:
    window = _get(doc, 'window', dict, 'spec')
    start = _get(window, 'start', int, 'window')
    end = _get(window, 'end', int, 'window')
    if start > end:
        raise FormatError(f'window: start {start} is after end {end}')
    return start, end


def _read_explicit(items: List[Any], window: Tuple[TimeIndex, TimeIndex]) -> Dict[TimeIndex, StochasticMatrix]:
    res: Dict[TimeIndex, StochasticMatrix] = {}
    for k, item in enumerate(items):
        path = f'matrices[{k}]'
        if not isinstance(item, dict):
            raise FormatError(f'{path}: expected object')
        entries = _array(_get(item, 'entries', list, path), 2, f'{path}.entries')
        for key, axis in (('rows', 0), ('cols', 1)):
            declared = _get(item, key, int, path, required=False)
            if declared is not None and declared != entries.shape[axis]:
                raise FormatError(f'{path}.{key}: declared {declared}, entries have {entries.shape[axis]}')
        time = _get(item, 'time', int, path, required=False)
        # an entry without time applies to every step
        times = range(*window) if time is None else [time]
        for n in times:
            if n in res:
                raise FormatError(f'{path}: matrix at time {n} is given twice')
            res[n] = StochasticMatrix(n, entries)
    return res


def _read_family(doc: Dict[str, Any], window: Tuple[TimeIndex, TimeIndex],
                 truncation: Optional[int]) -> Tuple[Optional[ChainModel], Optional[RowFamily], str]:
    name = _get(doc, 'family', str, 'matrices')
    params = _get(doc, 'params', dict, 'matrices', required=False) or {}
    try:
        if name in FINITE_FAMILIES:
            return FINITE_FAMILIES[name](window, **params), None, name
        if name in COUNTABLE_FAMILIES:
            family = COUNTABLE_FAMILIES[name](**params)
            if truncation is None:
                raise FormatError(f'matrices: family "{name}" has infinitely many states and needs truncation.M')
            try:
                return truncated_chain(family, window, truncation).model, family, name
            except TruncationError as e:
                LOGGER.warning(f'{e.message}, no finite chain is available for this spec')
                return None, family, name
    except (TypeError, ValueError) as e:
        raise FormatError(f'matrices.params: invalid parameters for family "{name}": {e}')
    known = sorted(list(FINITE_FAMILIES) + list(COUNTABLE_FAMILIES))
    raise FormatError(f'matrices.family: unknown family "{name}", expected one of {known}')


def _read_event(doc: Dict[str, Any]) -> TailEventSpec:
    kind = _get(doc, 'type', str, 'tail_event')
    if kind == 'absorption':
        targets = _get(doc, 'targets', list, 'tail_event')
        if not all(isinstance(i, int) and not isinstance(i, bool) for i in targets):
            raise FormatError('tail_event.targets: expected a list of state numbers')
        return TailEventSpec.absorption(targets)
    if kind == 'terminal_seed':
        horizon = _get(doc, 'horizon', int, 'tail_event', required=False)
        values = _array(_get(doc, 'values', list, 'tail_event'), 1, 'tail_event.values')
        return TailEventSpec.terminal_seed(horizon, values)
    raise FormatError(f'tail_event.type: expected "absorption" or "terminal_seed", got "{kind}"')


def _read_tolerances(doc: Dict[str, Any]) -> ToleranceSettings:
    given = {}
    for key in ('stochastic', 'convergence', 'dedup'):
        value = _get(doc, key, float, 'tolerances', required=False)
        if value is not None:
            if value < 0:
                raise FormatError(f'tolerances.{key}: must be nonnegative, got {value}')
            given[key] = value
    return replace(tolerances, **given)


def parse_chain_spec(text: str) -> ChainSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(f'Malformed JSON: {e.msg}', e.lineno, e.colno)
    if not isinstance(doc, dict):
        raise FormatError('spec: expected a JSON object')

    window = _read_window(doc)
    tol = _read_tolerances(_get(doc, 'tolerances', dict, 'spec', required=False) or {})
    truncation_doc = _get(doc, 'truncation', dict, 'spec', required=False)
    truncation = None if truncation_doc is None else _get(truncation_doc, 'M', int, 'truncation')
    if truncation is not None and truncation < 1:
        raise FormatError(f'truncation.M: must be positive, got {truncation}')

    matrices = doc.get('matrices')
    family: Optional[RowFamily] = None
    family_name = None
    model: Optional[ChainModel]
    if isinstance(matrices, list):
        model = ChainModel(window, _read_explicit(matrices, window), tol_stochastic=tol.stochastic)
    elif isinstance(matrices, dict):
        model, family, family_name = _read_family(matrices, window, truncation)
        if model is not None:
            model = replace(model, tol_stochastic=tol.stochastic)
    else:
        raise FormatError('spec.matrices: expected a list of matrices or a builtin family object')

    initial_doc = _get(doc, 'initial', dict, 'spec', required=False)
    if initial_doc is not None:
        time = _get(initial_doc, 'time', int, 'initial')
        probs = _array(_get(initial_doc, 'probs', list, 'initial'), 1, 'initial.probs')
        # mass defects are reported by validation
        mass_defect = abs(float(probs.sum()) - 1)
        try:
            initial = Distribution(time, probs, max(tol.stochastic, mass_defect))
        except ValueError as e:
            raise FormatError(f'initial: {e}')
        if model is not None:
            model = model.with_initial(initial)

    event_doc = _get(doc, 'tail_event', dict, 'spec', required=False)
    event = None if event_doc is None else _read_event(event_doc)

    bands_doc = _get(doc, 'bands', dict, 'spec', required=False)
    bands = tail_settings.bands
    if bands_doc is not None:
        bands = (_get(bands_doc, 'p', float, 'bands'), _get(bands_doc, 'q', float, 'bands'))
        if not 0 < bands[0] < bands[1] < 1:
            raise InvalidEventError(f'Bands require 0 < p < q < 1, got p = {bands[0]}, q = {bands[1]}')

    digest = hashlib.sha256(text.encode('utf-8')).hexdigest()
    LOGGER.info(f'Chain spec {digest[:12]}: window {window}, '
                f'{family_name or "explicit matrices"}, truncation {truncation}')
    return ChainSpec(window, model, family, family_name, truncation, event, bands, tol, digest)


def read_chain_spec(file: str) -> ChainSpec:
    with open(file, 'r') as f:
        return parse_chain_spec(f.read())
