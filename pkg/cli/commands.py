"""
Subcommands of the command line interface.

Each command reads an already parsed chain spec, writes its tables through the report writer and
returns the JSON summary together with the exit code.
"""

import logging
from dataclasses import asdict
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from chain.algebra import stationary_vector
from chain.checks import ExitCode, validate_chain
from chain.core import ChainModel, Distribution, InfeasibleAnalysisError, TimeIndex
from chain.countable import RandomWalkFamily, ShiftFamily, TruncationError, condition_u_check, \
    product_envelope_check, rw_bound_check, rw_max_row_entry, shift_family_checks, truncated_chain, \
    truncated_entrance
from chain.entrance import delta_vertices, detect_uniqueness, entrance_law, limit_matrix, vertex_set_distance
from chain.helpers import total_variation
from chain.montecarlo import SimConfig, empirical_band_report, simulate
from chain.tail import band_probabilities, band_sets, harmonic_backward
from files import ChainSpec, FormatError
from report_writer import ReportWriter
from settings import countable_settings, program_version

LOGGER = logging.getLogger('cli')

Summary = Dict[str, Any]

BANDS_HEADER = ['n', 'P_low', 'P_mid', 'P_high', 'P_A', 'conservation_residual']
EMPIRICAL_HEADER = ['emp_low', 'emp_mid', 'emp_high', 'emp_A', 'emp_sym_diff', 'emp_h_mean', 'undecided',
                    'absorbed', 'se_low', 'se_mid', 'se_high', 'se_A', 'se_sym_diff']

RW_TRUNCATED_LIMIT = 50


def _summary(command: str, spec: ChainSpec) -> Summary:
    return {
        'command': command,
        'version': program_version,
        'spec_hash': spec.digest,
        'tolerances': asdict(spec.tolerances),
    }


def _model(spec: ChainSpec) -> ChainModel:
    if spec.model is None:
        raise InfeasibleAnalysisError(f'Family "{spec.family_name}" cannot be truncated to {spec.truncation} states')
    return spec.model


def _floats(values: np.ndarray) -> List[float]:
    return [float(v) for v in values]


def cmd_validate(args, spec: ChainSpec, writer: ReportWriter) -> Tuple[Summary, ExitCode]:
    report = validate_chain(_model(spec))
    writer.table('violations.csv', ['time', 'row', 'row_defined', 'defect', 'magnitude', 'message'], [
        (v.time, v.row, v.row is not None, v.kind.to_simple_str(), float(v.magnitude), v.message)
        for v in report.violations
    ])
    res = _summary('validate', spec)
    res['ok'] = report.ok
    res['violations'] = len(report.violations)
    res['defects'] = report.defects.to_simple_str()
    for v in report.violations:
        LOGGER.error(v.message)
    return res, ExitCode.OK if report.ok else ExitCode.VALIDATION


def _homogeneous_square(model: ChainModel) -> Optional[np.ndarray]:
    steps = list(model.steps())
    if not steps:
        return None
    first = model.matrix(steps[0]).entries
    if first.shape[0] != first.shape[1]:
        return None
    if all(np.array_equal(first, model.matrix(n).entries) for n in steps[1:]):
        return first
    return None


def cmd_entrance(args, spec: ChainSpec, writer: ReportWriter) -> Tuple[Summary, ExitCode]:
    model = _model(spec)
    tol = spec.tolerances.convergence if args.tol is None else args.tol
    t: TimeIndex = model.end if args.time is None else args.time
    report = detect_uniqueness(model, t, tol, args.depth, spec.tolerances.dedup)

    writer.table('diameter_trace.csv', ['depth', 's', 'diameter'],
                 [(d, t - d, diam) for d, diam in enumerate(report.diameter_trace, 1)])
    writer.table('vertices.csv', ['vertex', 'state', 'probability'], [
        (k + 1, j + 1, float(p)) for k, v in enumerate(report.delta.vertices) for j, p in enumerate(v.probs)
    ])

    limits: Dict[str, Any] = {}
    limit_rows = []
    deepest: Dict[str, TimeIndex] = {}
    for parity in ('even', 'odd'):
        schedule = [s for s in range(t - 1, t - args.depth - 1, -1) if s % 2 == (parity == 'odd')]
        if not schedule:
            continue
        deepest[parity] = schedule[-1]
        if len(schedule) < 2:
            continue
        lm = limit_matrix(model, t, schedule, tol)
        limits[parity] = {
            'converged': lm.converged,
            'unique': lm.unique,
            'dimension_mismatch': lm.dimension_mismatch,
            'limit': [_floats(row) for row in lm.limit],
            'final_residual': lm.residuals[-1] if lm.residuals else None,
        }
        limit_rows.extend((parity, s, r) for s, r in zip(schedule[1:], lm.residuals))
    writer.table('limits.csv', ['parity', 's', 'residual'], limit_rows)

    res = _summary('entrance', spec)
    res['tolerances']['convergence'] = tol
    res.update({
        't': t,
        'depth': args.depth,
        'verdict': 'unique' if report.unique else 'non-unique',
        'law': None if report.law is None else _floats(report.law.probs),
        'final_diameter': report.delta.diameter,
        'limits': limits,
    })
    if len(deepest) == 2:
        res['parity_set_distance'] = vertex_set_distance(delta_vertices(model, deepest['even'], t),
                                                         delta_vertices(model, deepest['odd'], t))

    size = model.dimension(model.start)
    anchored = entrance_law(model, Distribution(model.start, np.full(size, 1.0 / size)), [t])
    res['anchored_law'] = _floats(anchored.laws[t].probs)
    res['anchor_sensitivity'] = anchored.anchor_sensitivity

    entries = _homogeneous_square(model)
    if entries is not None and report.law is not None:
        res['stationary_distance'] = total_variation(report.law.probs, stationary_vector(entries, tol))
    return res, ExitCode.OK


def cmd_zeroone(args, spec: ChainSpec, writer: ReportWriter) -> Tuple[Summary, ExitCode]:
    model = _model(spec)
    event = spec.tail_event
    if event is None:
        raise FormatError('spec: tail_event is required by the zero-one analysis')
    initial = model.initial
    if initial is None:
        raise FormatError('spec: initial distribution is required by the zero-one analysis')

    h = harmonic_backward(model, event)
    bands = band_sets(h, *spec.bands)
    rows = band_probabilities(model, initial, h, bands)
    header = list(BANDS_HEADER)
    table: List[List[Any]] = [[r.n, r.low, r.mid, r.high, r.p_a, r.conservation_residual] for r in rows]

    res = _summary('zeroone', spec)
    res.update({
        'bands': {'p': bands.p, 'q': bands.q},
        'horizon': h.horizon,
        'P_A': rows[0].p_a,
        'final_P_mid': rows[-1].mid,
        'max_conservation_residual': max(abs(r.conservation_residual) for r in rows),
        'stabilization_residual': h.stabilization_residual,
    })

    if args.simulate:
        config = SimConfig(args.simulate, h.horizon, args.seed, tuple(r.n for r in rows), args.workers)
        batch = simulate(model, initial, config)
        empirical = empirical_band_report(batch, model, h, bands, event, config)
        header += EMPIRICAL_HEADER
        for row, e in zip(table, empirical):
            row.extend([e.low, e.mid, e.high, e.p_a, e.sym_diff, e.h_mean, e.undecided, e.absorbed,
                        e.se_low, e.se_mid, e.se_high, e.se_a, e.se_sym_diff])
        res['simulation'] = {
            'trajectories': config.n_trajectories,
            'root_seed': config.root_seed,
            'undecided': empirical[-1].undecided,
            'absorbed': empirical[-1].absorbed,
            'final_sym_diff': empirical[-1].sym_diff,
        }
    writer.table('bands.csv', header, table)
    return res, ExitCode.OK


def _tightness_rows(report) -> List[Tuple[Any, ...]]:
    rows = []
    for v in report.per_time.verdicts:
        for eps in sorted(report.table, reverse=True):
            ce = v.counterexample if v.counterexample is not None and v.counterexample.eps == eps else None
            rows.append((v.time, eps, v.table.get(eps), eps in v.table,
                         None if ce is None else ce.state, None if ce is None else ce.mass))
    return rows


def cmd_countable(args, spec: ChainSpec, writer: ReportWriter) -> Tuple[Summary, ExitCode]:
    family = spec.family
    if family is None or spec.truncation is None:
        raise FormatError('spec: the countable analysis needs a countable builtin family and truncation.M')
    m = spec.truncation
    window = spec.window

    report = condition_u_check(family, list(range(*window)), countable_settings.eps_grid)
    writer.table('tightness.csv', ['n', 'eps', 'N_eps', 'certified', 'counterexample_state', 'counterexample_mass'],
                 _tightness_rows(report))
    writer.table('uniform.csv', ['eps', 'N_uniform', 'certified'],
                 [(eps, n, n is not None) for eps, n in sorted(report.table.items(), reverse=True)])

    res = _summary('countable', spec)
    res.update({
        'family': spec.family_name,
        'truncation': m,
        'probe_budget': report.per_time.probe_budget,
        'condition_p': report.per_time.holds,
        'condition_u': report.uniform,
        'uniform_table': {repr(eps): n for eps, n in report.table.items()},
        'counterexamples': sorted({v.counterexample.state for v in report.per_time.verdicts
                                   if v.counterexample is not None}),
    })

    try:
        truncated = truncated_chain(family, window, m)
        writer.table('truncation.csv', ['n', 'mass_defect', 'min_row_mass'], [
            (n, truncated.mass_defects[n], float(truncated.renormalization[n].min())) for n in range(*window)
        ])
        entrance = truncated_entrance(family, window, m)
        res['entrance'] = {
            'law': _floats(entrance.law.probs),
            'diameter': entrance.diameter,
            'vertex_count': entrance.vertex_count,
            'defect_bound': entrance.defect_bound,
        }
    except TruncationError as e:
        LOGGER.warning(f'{e.message}, truncated chain is not reported')
        res['entrance'] = None

    if report.uniform:
        eps = min(countable_settings.eps_grid)
        try:
            smallest, required, holds = product_envelope_check(family, window, m, eps)
            res['product_envelope'] = {'eps': eps, 'smallest_mass': smallest, 'required': required, 'holds': holds}
        except InfeasibleAnalysisError as e:
            LOGGER.warning(e.message)
            res['product_envelope'] = None

    if isinstance(family, RandomWalkFamily):
        bounds = rw_bound_check(range(1, args.rw_max + 1))
        rows = []
        for b in bounds:
            defined = b.n <= RW_TRUNCATED_LIMIT and 4 * b.n + 1 <= m
            rows.append((b.n, b.exact, b.bound, b.holds, rw_max_row_entry(b.n, m) if defined else None, defined))
        writer.table('rw_bound.csv', ['n', 'exact', 'bound', 'holds', 'truncated_max', 'truncated_defined'], rows)
        res['rw_bound_holds'] = all(b.holds for b in bounds)

    if isinstance(family, ShiftFamily):
        shift = shift_family_checks(family.ell, m, window)
        writer.table('shift.csv', ['n', 'state'],
                     [(law.time, int(np.argmax(law.probs)) + 1) for law in shift.laws])
        res['shift'] = {
            'ell': shift.ell,
            'onto_modulo_shift': shift.onto_on_truncation_modulo_shift,
            'residual': shift.residual,
        }
    return res, ExitCode.OK
