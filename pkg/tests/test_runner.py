# -*- coding: utf-8 -*-
import json
import math
import os

import numpy as np
import pytest
from numpy.testing import assert_allclose

from core import runner
from core.exceptions import ConfigHashMismatch, MissingInputs
from core.storage import read_json, read_table

FAST = {'max_iters': 400, 'restarts': 2, 'max_outer': 25}


def write_config(tmp_path, data, name='run.json'):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding='utf-8')
    return str(path)


@pytest.fixture
def single_run(tmp_path):
    path = write_config(tmp_path, {'mode': 'single', 'model': {'M': 0.5, 'rho0': 1.0}, 'bond_dims': [1],
                                   'grids': {'gamma': [1.0, 2.0]}, 'optimizer': FAST, 'seed': 3})
    out = str(tmp_path / 'out')
    record = runner.run(path, out=out)
    return path, out, record


class TestPointSeeds:

    def test_stable(self):
        assert runner.point_seed(0, 'single-D1-gamma1.0') == runner.point_seed(0, 'single-D1-gamma1.0')

    def test_depends_on_seed_and_key(self):
        base = runner.point_seed(0, 'a')
        assert runner.point_seed(1, 'a') != base
        assert runner.point_seed(0, 'b') != base
        assert 0 <= base < 2 ** 32


class TestBetheRun:

    def test_table(self, tmp_path):
        path = write_config(tmp_path, {'mode': 'bethe', 'grids': {'gamma': [0.5, 1.0, 2.0, 10.0, 100.0]}})
        out = str(tmp_path / 'bethe')
        record = runner.run(path, out=out)
        assert record.status == 'complete'
        df = read_table(os.path.join(out, 'bethe.csv'))
        assert len(df) == 5
        assert list(df['gamma']) == [0.5, 1.0, 2.0, 10.0, 100.0]
        assert (df['e'].diff().dropna() > 0).all()
        assert len(os.listdir(os.path.join(out, runner.POINTS_DIR))) == 5

    def test_default_directory_uses_hash(self, tmp_path):
        path = write_config(tmp_path, {'mode': 'bethe', 'grids': {'gamma': [1.0]}}, name='energies.json')
        cfg = runner.load_run_config(path)
        run_dir = runner.run_directory(cfg, config_path=path)
        assert os.path.basename(run_dir) == f"energies-{cfg.config_hash()[:8]}"


class TestSingleRun:

    def test_mean_field_energies(self, single_run):
        _, out, record = single_run
        assert record.status == 'complete'
        assert record.failed == {}
        df = read_table(os.path.join(out, 'single.csv'))
        assert list(df['gamma']) == [1.0, 2.0]
        # D = 1 is the coherent state, e0 = c rho0^2
        assert_allclose(df['energy'], df['c'], atol=1e-6)
        assert (df['bethe_energy'] < df['energy']).all()

    def test_record_and_snapshot(self, single_run):
        _, out, record = single_run
        data = read_json(os.path.join(out, runner.RECORD_FILE))
        snapshot = read_json(os.path.join(out, runner.CONFIG_FILE))
        assert data['config_hash'] == runner.config_hash(snapshot)
        assert data['status'] == 'complete'
        assert len(data['points']) == 2

    def test_resume_complete_run_is_noop(self, single_run):
        _, out, _ = single_run
        before = (os.path.join(out, runner.RECORD_FILE))
        with open(before, 'rb') as f:
            record_bytes = f.read()
        record = runner.resume(out)
        assert record.status == 'complete'
        with open(before, 'rb') as f:
            assert f.read() == record_bytes

    def test_resume_recomputes_missing_point(self, single_run):
        _, out, _ = single_run
        table = os.path.join(out, 'single.csv')
        with open(table, 'rb') as f:
            original = f.read()
        points = os.path.join(out, runner.POINTS_DIR)
        os.remove(os.path.join(points, sorted(os.listdir(points))[0]))
        record = runner.resume(out)
        assert record.status == 'complete'
        assert len(os.listdir(points)) == 2
        with open(table, 'rb') as f:
            assert f.read() == original

    def test_resume_detects_edited_config(self, single_run):
        _, out, _ = single_run
        snapshot_path = os.path.join(out, runner.CONFIG_FILE)
        snapshot = read_json(snapshot_path)
        snapshot['seed'] = 99
        with open(snapshot_path, 'w', encoding='utf-8') as f:
            json.dump(snapshot, f)
        with pytest.raises(ConfigHashMismatch):
            runner.resume(out)

    def test_rerun_with_other_config_is_refused(self, single_run, tmp_path):
        _, out, _ = single_run
        other = write_config(tmp_path, {'mode': 'single', 'model': {'M': 0.5, 'rho0': 1.0}, 'bond_dims': [1],
                                        'grids': {'gamma': [4.0]}, 'optimizer': FAST}, name='other.json')
        with pytest.raises(ConfigHashMismatch):
            runner.run(other, out=out)

    def test_resume_needs_run_files(self, tmp_path):
        with pytest.raises(MissingInputs):
            runner.resume(str(tmp_path))


class TestCoupledRun:

    def test_product_state_without_pairs(self, tmp_path):
        path = write_config(tmp_path, {
            'mode': 'coupled', 'model': {'M': 0.5, 'c': 1.0, 'rho01': 1.0, 'rho02': 1.0},
            'bond_dims': [1], 'pairs': [0], 'grids': {'g': [0.0, 0.5]}, 'optimizer': FAST,
        })
        out = str(tmp_path / 'coupled')
        record = runner.run(path, out=out, jobs=2)
        assert record.status == 'complete'
        df = read_table(os.path.join(out, 'coupled.csv'))
        assert len(df) == 2
        assert_allclose(df['energy'], df['mean_field_energy'], atol=1e-5)
        assert_allclose(df['correlation'], 0.0, atol=1e-8)
        slope = (df['energy'][1] - df['energy'][0]) / 0.5
        assert_allclose(slope, 1.0, atol=1e-4)
        names = os.listdir(os.path.join(out, runner.POINTS_DIR))
        assert sum(n.startswith('species-') for n in names) == 1
        assert sum(n.startswith('coupled-') for n in names) == 2

    def test_pairs_start_from_plain_optimum(self, tmp_path):
        path = write_config(tmp_path, {
            'mode': 'coupled', 'model': {'M': 0.5, 'c': 1.0, 'rho01': 1.0, 'rho02': 0.8},
            'bond_dims': [1], 'pairs': [1, 0], 'grids': {'g': [0.0, 0.5]}, 'optimizer': FAST,
        })
        cfg = runner.load_run_config(path)
        out = str(tmp_path / 'paired')
        stages = runner.Runner(cfg, out).stages()
        assert [len(s) for s in stages] == [2, 2, 2]
        assert all(' P=0 ' in label for label, _ in stages[1])
        assert all(' P=1 ' in label for label, _ in stages[2])

        record = runner.run(path, out=out)
        assert record.status == 'complete'
        df = read_table(os.path.join(out, 'coupled.csv'))
        for g in (0.0, 0.5):
            rows = df[df['g'] == g].set_index('P')
            assert rows.loc[1, 'energy'] <= rows.loc[0, 'energy'] + 1e-8


@pytest.fixture
def luttinger_single_run(tmp_path):
    path = write_config(tmp_path, {
        'mode': 'luttinger', 'system': 'single', 'model': {'M': 0.5, 'rho0': 1.0}, 'bond_dims': [1],
        'grids': {'gamma': [2.0], 'density_nodes': 9, 'bethe_nodes': 128}, 'optimizer': FAST, 'seed': 1,
    })
    out = str(tmp_path / 'lutt')
    return out, runner.run(path, out=out)


class TestSweepRuns:

    def test_luttinger_single(self, luttinger_single_run):
        out, record = luttinger_single_run
        assert record.status == 'complete'
        sweep = read_table(os.path.join(out, 'sweep.csv'))
        assert len(sweep) == 9
        # D = 1 mean field, e0 = c rho^2 with c = 2
        assert_allclose(sweep['energy'], 2.0 * sweep['rho'] ** 2, atol=1e-6)
        lutt = read_table(os.path.join(out, 'luttinger.csv'))
        assert len(lutt) == 1
        row = lutt.iloc[0]
        assert_allclose(row['second_derivative'], 4.0, rtol=1e-3)
        assert_allclose(row['v'], math.sqrt(8.0), rtol=1e-2)
        assert_allclose(row['K'], math.pi / math.sqrt(2.0), rtol=1e-2)
        assert row['bethe_K'] > 1.0
        assert row['bethe_v'] * row['bethe_K'] == pytest.approx(math.pi * 1.0 / 0.5, rel=1e-9)

    def test_luttinger_single_resume_after_deleting_sweep_point(self, luttinger_single_run):
        out, _ = luttinger_single_run
        tables = {}
        for name in ('sweep.csv', 'luttinger.csv'):
            with open(os.path.join(out, name), 'rb') as f:
                tables[name] = f.read()
        os.remove(os.path.join(out, runner.POINTS_DIR, 'sweep-D1-gamma2.0-i02.json'))
        record = runner.resume(out)
        assert record.status == 'complete'
        assert os.path.isfile(os.path.join(out, runner.POINTS_DIR, 'sweep-D1-gamma2.0-i02.json'))
        for name, original in tables.items():
            with open(os.path.join(out, name), 'rb') as f:
                assert f.read() == original

    def test_sweep_density_coupled(self, tmp_path):
        path = write_config(tmp_path, {
            'mode': 'sweep-density', 'system': 'coupled', 'model': {'M': 0.5, 'c': 1.5, 'rho01': 1.0, 'rho02': 0.8},
            'bond_dims': [1], 'pairs': [0], 'grids': {'g': [0.0, 1.0], 'density_nodes': 3}, 'optimizer': FAST,
        })
        out = str(tmp_path / 'sweep2')
        record = runner.run(path, out=out)
        assert record.status == 'complete'
        assert not os.path.exists(os.path.join(out, 'luttinger.csv'))
        sweep = read_table(os.path.join(out, 'sweep.csv'))
        assert len(sweep) == 18
        expected = 1.5 * (sweep['rho1'] ** 2 + sweep['rho2'] ** 2) + sweep['g'] * sweep['rho1'] * sweep['rho2']
        assert_allclose(sweep['energy'], expected, atol=1e-5)
        names = os.listdir(os.path.join(out, runner.POINTS_DIR))
        assert sum(n.startswith('sweep-D1-P0-') for n in names) == 18

    def test_sweep_density_single_resume(self, tmp_path):
        path = write_config(tmp_path, {
            'mode': 'sweep-density', 'model': {'M': 0.5, 'rho0': 1.0}, 'bond_dims': [1],
            'grids': {'gamma': [1.0], 'density_nodes': 5}, 'optimizer': FAST,
        })
        out = str(tmp_path / 'sweep1')
        assert runner.run(path, out=out).status == 'complete'
        table = os.path.join(out, 'sweep.csv')
        with open(table, 'rb') as f:
            original = f.read()
        # the centre point seeds the others
        os.remove(os.path.join(out, runner.POINTS_DIR, 'sweep-D1-gamma1.0-i02.json'))
        assert runner.resume(out).status == 'complete'
        with open(table, 'rb') as f:
            assert f.read() == original

    def test_luttinger_coupled(self, tmp_path):
        path = write_config(tmp_path, {
            'mode': 'luttinger', 'system': 'coupled', 'model': {'M': 0.5, 'c': 1.5, 'rho01': 1.0, 'rho02': 1.0},
            'bond_dims': [1], 'pairs': [0], 'grids': {'g': [0.5], 'density_nodes': 9}, 'optimizer': FAST,
        })
        out = str(tmp_path / 'lutt2')
        record = runner.run(path, out=out, jobs=2)
        assert record.status == 'complete'
        assert len(read_table(os.path.join(out, 'sweep.csv'))) == 81
        lutt = read_table(os.path.join(out, 'luttinger.csv')).set_index('channel')
        # e'' = 2c +/- g for the mean-field surface c (x^2 + y^2) + g x y
        assert_allclose(lutt.loc['plus', 'second_derivative'], 3.5, rtol=1e-3)
        assert_allclose(lutt.loc['minus', 'second_derivative'], 2.5, rtol=1e-3)
        assert (lutt['rho_ref_policy'] == 'total').all()
        assert_allclose(lutt['rho_ref'], 2.0)
        assert_allclose(lutt['v'] * lutt['K'], np.pi * 2.0 / 0.5, rtol=1e-9)
