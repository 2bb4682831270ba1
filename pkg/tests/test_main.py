import json

import pandas as pd
import pytest

from main import main
from reader import read_trajectory
from conftest import SQRT_075

CANONICAL_FLAGS = ['--a', '0.5', '--b', repr(SQRT_075), '--A', '1', '--B', '1']


def run_cli(*argv) -> int:
    return main([*argv, '--quiet'])


def report_from(capsys) -> dict:
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def traj(tmp_path):
    path = tmp_path / 'traj.csv'
    assert run_cli('simulate', *CANONICAL_FLAGS, '--n', '100', '--seed', '42', '--out', str(path)) == 0
    return path


@pytest.fixture
def short_traj(tmp_path):
    path = tmp_path / 'short.csv'
    path.write_text('t,x\n1,1.0\n2,0.5\n')
    return path


class TestSimulate:
    def test_writes_rows(self, traj):
        data = pd.read_csv(traj)
        assert list(data.columns) == ['t', 's', 'x']
        assert len(data) == 100

    def test_reproducible(self, traj, tmp_path):
        again = tmp_path / 'again.csv'
        run_cli('simulate', *CANONICAL_FLAGS, '--n', '100', '--seed', '42', '--out', str(again))
        assert again.read_bytes() == traj.read_bytes()

    def test_degenerate(self, tmp_path):
        code = run_cli('simulate', '--a', '1.0', '--b', '1', '--A', '1', '--B', '1', '--n', '10', '--seed', '0',
                       '--out', str(tmp_path / 'x.csv'))
        assert code == 2

    def test_missing_params(self, tmp_path):
        assert run_cli('simulate', '--a', '0.5', '--n', '10', '--seed', '0', '--out', str(tmp_path / 'x.csv')) == 2

    def test_params_file(self, params_file, tmp_path):
        out = tmp_path / 'x.csv'
        assert run_cli('simulate', '--params', str(params_file()), '--n', '5', '--seed', '1', '--out', str(out)) == 0
        assert len(read_trajectory(out)) == 5


class TestFilter:
    def test_kalman(self, traj, tmp_path):
        out = tmp_path / 'est.csv'
        assert run_cli('filter', *CANONICAL_FLAGS, '--method', 'kalman', '--traj', str(traj), '--out', str(out)) == 0
        assert len(pd.read_csv(out)) == 100

    def test_grid_final_estimate(self, short_traj, tmp_path):
        out = tmp_path / 'est.csv'
        assert run_cli('filter', *CANONICAL_FLAGS, '--method', 'grid', '--traj', str(short_traj),
                       '--out', str(out)) == 0
        assert pd.read_csv(out)['estimate'].iloc[-1] == pytest.approx(0.36666666666666664, abs=1e-4)

    def test_normalcorr_independent_chain(self, short_traj, tmp_path):
        out = tmp_path / 'est.csv'
        assert run_cli('filter', '--a', '0', '--b', '1', '--A', '1', '--B', '1', '--method', 'normalcorr',
                       '--psi-path', '--traj', str(short_traj), '--out', str(out)) == 0
        assert list(pd.read_csv(out)['estimate']) == pytest.approx([0.5, 0.25])

    def test_loglik(self, short_traj, tmp_path, capsys):
        assert run_cli('filter', *CANONICAL_FLAGS, '--method', 'dobrovidov', '--loglik', '--traj', str(short_traj),
                       '--out', str(tmp_path / 'est.csv')) == 0
        assert 'log_likelihood' in report_from(capsys)

    def test_malformed_csv(self, tmp_path):
        bad = tmp_path / 'bad.csv'
        bad.write_text('t,x\n1,1.0\n2,oops\n')
        assert run_cli('filter', *CANONICAL_FLAGS, '--traj', str(bad), '--out', str(tmp_path / 'est.csv')) == 4

    def test_missing_file(self, tmp_path):
        assert run_cli('filter', *CANONICAL_FLAGS, '--traj', str(tmp_path / 'nope.csv'),
                       '--out', str(tmp_path / 'est.csv')) == 3

    def test_unknown_method(self, short_traj, tmp_path):
        assert run_cli('filter', *CANONICAL_FLAGS, '--method', 'particle', '--traj', str(short_traj),
                       '--out', str(tmp_path / 'est.csv')) == 2

    def test_grid_too_coarse(self, tmp_path):
        far = tmp_path / 'far.csv'
        far.write_text('t,x\n1,0.1\n2,1000\n')
        assert run_cli('filter', *CANONICAL_FLAGS, '--method', 'grid', '--traj', str(far),
                       '--out', str(tmp_path / 'est.csv')) == 2


class TestCompare:
    def test_default_methods_pass(self, capsys):
        assert run_cli('compare', *CANONICAL_FLAGS, '--simulate', '--n', '200', '--seed', '0', '--tol', '1e-9') == 0
        report = report_from(capsys)
        assert report['pass'] is True
        assert report['kind'] == 'compare'
        assert len(report['max_abs_divergence']) == 3

    def test_normalcorr(self, traj, capsys):
        assert run_cli('compare', *CANONICAL_FLAGS, '--methods', 'kalman,normalcorr', '--traj', str(traj),
                       '--tol', '1e-7') == 0

    def test_perturbed_params_diverge(self, params_file, capsys):
        perturbed = params_file(a=0.55, name='perturbed.json')
        code = run_cli('compare', *CANONICAL_FLAGS, '--simulate', '--tol', '1e-9',
                       '--method-params', f'dobrovidov={perturbed}')
        assert code == 1
        assert report_from(capsys)['pass'] is False

    def test_single_method(self):
        assert run_cli('compare', *CANONICAL_FLAGS, '--simulate', '--methods', 'kalman') == 2

    def test_report_file(self, tmp_path, capsys):
        output = tmp_path / 'reports'
        run_cli('compare', *CANONICAL_FLAGS, '--simulate', '--n', '20', '--output', str(output))
        report = report_from(capsys)
        saved = output / f'{report["key"][:16]}.json'
        assert json.loads(saved.read_text()) == report


class TestInvert:
    def test_two(self, capsys):
        assert run_cli('invert', *CANONICAL_FLAGS, '--n', '2') == 0
        report = report_from(capsys)
        assert report['path'] == 'psi'
        assert report['inverse'] == [[pytest.approx(8 / 15), pytest.approx(-2 / 15)],
                                     [pytest.approx(-2 / 15), pytest.approx(8 / 15)]]

    def test_oracle(self, capsys):
        assert run_cli('invert', *CANONICAL_FLAGS, '--n', '10', '--oracle') == 0
        report = report_from(capsys)
        assert report['residual'] <= 1e-12
        assert report['oracle']['max_abs_diff'] <= 1e-12

    def test_single(self, capsys):
        assert run_cli('invert', *CANONICAL_FLAGS, '--n', '1') == 0
        report = report_from(capsys)
        assert report['path'] == 'diagonal'
        assert report['inverse'] == [[pytest.approx(0.5)]]

    def test_csv(self, tmp_path):
        out = tmp_path / 'inverse.csv'
        assert run_cli('invert', *CANONICAL_FLAGS, '--n', '3', '--format', 'csv', '--out', str(out)) == 0
        data = pd.read_csv(out)
        assert list(data.columns) == ['i', 'j', 'value']
        assert len(data) == 9

    def test_overflow_falls_back(self, capsys):
        assert run_cli('invert', '--a', '0.05', '--b', '3', '--A', '3', '--B', '0.1', '--n', '80') == 0
        assert report_from(capsys)['path'] == 'innovations'

    def test_overflow_strict(self):
        assert run_cli('invert', '--a', '0.05', '--b', '3', '--A', '3', '--B', '0.1', '--n', '80',
                       '--psi-path') == 2


class TestLemmas:
    def test_canonical(self, capsys):
        assert run_cli('lemmas', *CANONICAL_FLAGS) == 0
        report = report_from(capsys)
        assert report['N'] == 25
        assert report['max_residual'] <= 1e-11

    def test_zero_a(self):
        assert run_cli('lemmas', '--a', '0', '--b', '1', '--A', '1', '--B', '1') == 2


@pytest.mark.slow
def test_montecarlo(capsys):
    assert run_cli('montecarlo', *CANONICAL_FLAGS, '--n', '4', '--trials', '200000', '--seed', '0') == 0
    assert report_from(capsys)['kind'] == 'montecarlo'


def test_missing_explicit_config(tmp_path):
    assert run_cli('lemmas', *CANONICAL_FLAGS, '--config', str(tmp_path / 'missing.ini')) == 3


def test_config_tolerance(tmp_path, capsys):
    config = tmp_path / 'optfilter.ini'
    config.write_text('[compare]\ntol = 1e-30\n')
    code = run_cli('compare', *CANONICAL_FLAGS, '--simulate', '--n', '50', '--methods', 'kalman,grid',
                   '--config', str(config))
    assert code == 1
    assert report_from(capsys)['tol'] == 1e-30
