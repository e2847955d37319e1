import csv
import json
import math

import pytest

from chain.checks import ExitCode
from cli.main import run

ABSORBING = {
    'window': {'start': 0, 'end': 60},
    'matrices': {'family': 'absorbing_walk'},
    'initial': {'time': 0, 'probs': [0, 1, 0]},
    'tail_event': {'type': 'absorption', 'targets': [3]},
    'bands': {'p': 0.1, 'q': 0.9},
}


@pytest.fixture
def write_spec(tmp_path):
    def write(doc, name='spec.json'):
        path = tmp_path / name
        path.write_text(doc if isinstance(doc, str) else json.dumps(doc))
        return str(path)
    return write


def _summary(capsys):
    return json.loads(capsys.readouterr().out)


def _table(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


def _assert_finite(out_dir):
    for path in out_dir.glob('*.csv'):
        for row in _table(path):
            for value in row.values():
                try:
                    x = float(value)
                except ValueError:
                    continue
                assert math.isfinite(x), f'{path.name}: {value}'


def test_validate_ok(write_spec, capsys):
    spec = write_spec({'window': {'start': -5, 'end': 0}, 'matrices': {'family': 'permutation2'}})
    assert run(['validate', '--spec', spec]) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['ok'] and summary['violations'] == 0
    assert summary['exit_code'] == 0
    assert summary['tolerances']['stochastic'] == 1e-12


def test_validate_reports_row_sum_defect(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': 0, 'end': 3}, 'matrices': [{'entries': [[0.5, 0.4], [0.5, 0.5]]}]})
    out = tmp_path / 'out'
    assert run(['validate', '--spec', spec, '--out', str(out)]) == ExitCode.VALIDATION
    summary = _summary(capsys)
    assert not summary['ok']
    assert summary['violations'] == 3
    rows = _table(out / 'violations.csv')
    assert [r['time'] for r in rows] == ['0', '1', '2']
    assert all(r['row'] == '1' and r['defect'] == 'row_sum' for r in rows)
    assert float(rows[0]['magnitude']) == pytest.approx(0.1)


def test_initial_mass_defect_fails_validation(write_spec, tmp_path, capsys):
    spec = write_spec(dict(ABSORBING, initial={'time': 0, 'probs': [0.25, 0.5, 0.0]}))
    out = tmp_path / 'out'
    assert run(['validate', '--spec', spec, '--out', str(out)]) == ExitCode.VALIDATION
    assert _summary(capsys)['violations'] == 1
    rows = _table(out / 'violations.csv')
    assert [r['defect'] for r in rows] == ['initial_simplex']
    assert float(rows[0]['magnitude']) == pytest.approx(0.25)

    assert run(['zeroone', '--spec', spec, '--out', str(tmp_path / 'z')]) == ExitCode.VALIDATION
    assert _summary(capsys)['exit_code'] == 2


def test_malformed_spec_is_a_parse_failure(write_spec, capsys):
    spec = write_spec('{"window": {"start": 0,\n "end": ')
    assert run(['validate', '--spec', spec]) == ExitCode.PARSE
    error = _summary(capsys)
    assert error['exit_code'] == 3
    assert 'line 2' in error['error']


def test_missing_spec_file(tmp_path, capsys):
    assert run(['validate', '--spec', str(tmp_path / 'missing.json')]) == ExitCode.PARSE
    assert _summary(capsys)['exit_code'] == 3


def test_permutation_entrance_is_not_unique(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -60, 'end': 0}, 'matrices': {'family': 'permutation2'}})
    out = tmp_path / 'out'
    assert run(['entrance', '--spec', spec, '--out', str(out), '--depth', '50']) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['verdict'] == 'non-unique'
    assert summary['law'] is None
    assert summary['final_diameter'] == 1.0
    assert summary['limits']['even']['limit'] == [[1.0, 0.0], [0.0, 1.0]]
    assert summary['limits']['odd']['limit'] == [[0.0, 1.0], [1.0, 0.0]]
    assert summary['parity_set_distance'] <= 1e-12

    trace = _table(out / 'diameter_trace.csv')
    assert len(trace) == 50
    assert all(float(r['diameter']) == 1.0 for r in trace)
    assert trace[-1]['s'] == '-50'
    assert len(_table(out / 'vertices.csv')) == 4
    _assert_finite(out)


def test_positive_chain_entrance_is_stationary(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -50, 'end': 0}, 'matrices': [{'entries': [[0.5, 0.5], [0.3, 0.7]]}]})
    out = tmp_path / 'out'
    assert run(['entrance', '--spec', spec, '--out', str(out), '--depth', '50', '--tol', '1e-10']) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['verdict'] == 'unique'
    assert summary['tolerances']['convergence'] == 1e-10
    assert summary['stationary_distance'] <= 1e-10
    assert summary['law'] == pytest.approx([0.375, 0.625], abs=1e-10)
    assert summary['anchored_law'] == pytest.approx([0.375, 0.625], abs=1e-10)


def test_alternating_dimension_entrance(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -50, 'end': 0}, 'matrices': {'family': 'alt_dim'}})
    assert run(['entrance', '--spec', spec, '--out', str(tmp_path / 'out')]) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['verdict'] == 'unique'
    assert summary['law'] == pytest.approx([0.5, 0.5], abs=1e-12)
    assert summary['limits']['odd']['limit'] == [[0.5, 0.5]]


def test_shallow_window_is_infeasible(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -10, 'end': 0}, 'matrices': {'family': 'permutation2'}})
    assert run(['entrance', '--spec', spec, '--out', str(tmp_path / 'out'), '--depth', '50']) \
        == ExitCode.INFEASIBLE
    assert _summary(capsys)['exit_code'] == 4


def test_zeroone_absorbing_walk(write_spec, tmp_path, capsys):
    out = tmp_path / 'out'
    assert run(['zeroone', '--spec', write_spec(ABSORBING), '--out', str(out)]) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['P_A'] == pytest.approx(0.5 * (1 - 0.5 ** 60), abs=1e-15)
    assert summary['horizon'] == 60
    assert summary['max_conservation_residual'] <= 1e-12

    rows = _table(out / 'bands.csv')
    assert len(rows) == 61
    assert list(rows[0]) == ['n', 'P_low', 'P_mid', 'P_high', 'P_A', 'conservation_residual']
    for row in rows:
        n = int(row['n'])
        assert abs(float(row['P_mid']) - 0.5 ** n) <= 1e-12
        assert float(row['P_A']) == pytest.approx(0.5, abs=1e-12)
    _assert_finite(out)


def test_zeroone_simulation_is_reproducible(write_spec, tmp_path, capsys):
    spec = write_spec(ABSORBING)
    outputs = []
    for k, workers in enumerate(('1', '3', '3')):
        out = tmp_path / f'out{k}'
        assert run(['zeroone', '--spec', spec, '--out', str(out), '--simulate', '2000', '--seed', '42',
                    '--workers', workers]) == ExitCode.OK
        outputs.append(((out / 'bands.csv').read_bytes(), (out / 'summary.json').read_bytes()))
    capsys.readouterr()
    assert outputs[0] == outputs[1] == outputs[2]

    rows = _table(tmp_path / 'out0' / 'bands.csv')
    assert 'emp_sym_diff' in rows[0] and 'se_mid' in rows[0]
    assert float(rows[0]['emp_mid']) == 1.0
    assert (rows[-1]['undecided'], rows[-1]['absorbed']) == ('0.0', '1.0')
    _assert_finite(tmp_path / 'out0')


def test_zeroone_ones_seed_is_always_high(write_spec, tmp_path, capsys):
    doc = dict(ABSORBING, tail_event={'type': 'terminal_seed', 'values': [1, 1, 1]})
    out = tmp_path / 'out'
    assert run(['zeroone', '--spec', write_spec(doc), '--out', str(out)]) == ExitCode.OK
    capsys.readouterr()
    assert all(abs(float(r['P_high']) - 1) <= 1e-14 for r in _table(out / 'bands.csv'))


def test_zeroone_needs_tail_event(write_spec, tmp_path, capsys):
    doc = {k: v for k, v in ABSORBING.items() if k != 'tail_event'}
    assert run(['zeroone', '--spec', write_spec(doc), '--out', str(tmp_path / 'out')]) == ExitCode.PARSE
    assert _summary(capsys)['exit_code'] == 3


def test_zeroone_bad_targets_fail_validation(write_spec, tmp_path, capsys):
    doc = dict(ABSORBING, tail_event={'type': 'absorption', 'targets': [2]})
    assert run(['zeroone', '--spec', write_spec(doc), '--out', str(tmp_path / 'out')]) == ExitCode.VALIDATION
    capsys.readouterr()


def test_countable_random_walk(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -3, 'end': 0}, 'matrices': {'family': 'random_walk'},
                       'truncation': {'M': 201}})
    out = tmp_path / 'out'
    assert run(['countable', '--spec', spec, '--out', str(out), '--rw-max', '60']) == ExitCode.OK
    summary = _summary(capsys)
    assert not summary['condition_p'] and not summary['condition_u']
    assert summary['rw_bound_holds']
    assert summary['counterexamples'] == [1000]

    bounds = _table(out / 'rw_bound.csv')
    assert len(bounds) == 60
    assert all(r['holds'] == 'true' for r in bounds)
    for r in bounds:
        if r['truncated_defined'] == 'true':
            assert abs(float(r['truncated_max']) - float(r['exact'])) <= 1e-12
        else:
            assert r['truncated_max'] == ''
    assert sum(r['truncated_defined'] == 'true' for r in bounds) == 50
    assert all(r['certified'] == 'false' and r['N_eps'] == '' for r in _table(out / 'tightness.csv'))
    _assert_finite(out)


def test_countable_reset_family_is_uniform(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -20, 'end': 0},
                       'matrices': {'family': 'reset', 'params': {'alpha': 0.5, 'beta': 0.5, 'band': 3}},
                       'truncation': {'M': 40}})
    out = tmp_path / 'out'
    assert run(['countable', '--spec', spec, '--out', str(out)]) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['condition_p'] and summary['condition_u']
    assert summary['uniform_table'] == {'0.1': 4, '0.01': 7, '0.001': 10}
    assert summary['product_envelope']['holds']
    assert summary['entrance']['diameter'] <= 0.5 ** 20 + 1e-9
    uniform = _table(out / 'uniform.csv')
    assert [r['N_uniform'] for r in uniform] == ['4', '7', '10']
    assert len(_table(out / 'truncation.csv')) == 20
    _assert_finite(out)


def test_countable_still_shift_family(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -10, 'end': 0}, 'matrices': {'family': 'shift', 'params': {'ell': 0}},
                       'truncation': {'M': 20}})
    out = tmp_path / 'out'
    assert run(['countable', '--spec', spec, '--out', str(out)]) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['shift'] == {'ell': 0, 'onto_modulo_shift': True, 'residual': 0.0}
    assert not summary['condition_u']
    assert all(r['state'] == '1' for r in _table(out / 'shift.csv'))


def test_moving_shift_family_has_no_truncated_chain(write_spec, tmp_path, capsys):
    spec = write_spec({'window': {'start': -10, 'end': 0}, 'matrices': {'family': 'shift', 'params': {'ell': 1}},
                       'truncation': {'M': 30}})
    out = tmp_path / 'out'
    assert run(['countable', '--spec', spec, '--out', str(out)]) == ExitCode.OK
    summary = _summary(capsys)
    assert summary['entrance'] is None
    assert summary['shift']['residual'] == 0.0
    assert [r['state'] for r in _table(out / 'shift.csv')] == [str(k) for k in range(1, 12)]

    assert run(['validate', '--spec', spec]) == ExitCode.INFEASIBLE
    capsys.readouterr()


def test_countable_needs_a_family(write_spec, tmp_path, capsys):
    assert run(['countable', '--spec', write_spec(ABSORBING), '--out', str(tmp_path / 'out')]) == ExitCode.PARSE
    capsys.readouterr()
