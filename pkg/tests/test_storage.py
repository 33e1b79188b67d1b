# -*- coding: utf-8 -*-
import json
import math

import numpy as np
from numpy.testing import assert_allclose

from core.cmps_coupled import from_singles
from core.param_layout import ParamLayout
from core.storage import (
    ansatz_from_dict, ansatz_to_dict, read_json, read_table, result_from_dict, result_to_dict,
    write_json_atomic, write_table,
)
from core.variational import OptimResult
from tests.helpers import generic_ansatz


class TestFiles:

    def test_json_is_lossless_and_sorted(self, tmp_path):
        path = tmp_path / 'points' / 'a.json'
        value = 0.1 + 0.2
        write_json_atomic(str(path), {'b': value, 'a': np.float64(1 / 3), 'n': np.int64(4)})
        data = read_json(str(path))
        assert data == {'a': 1 / 3, 'b': value, 'n': 4}
        text = path.read_text(encoding='utf-8')
        assert text.index('"a"') < text.index('"b"')

    def test_non_finite_values_become_null(self, tmp_path):
        path = tmp_path / 'x.json'
        write_json_atomic(str(path), {'gap': math.inf, 'list': [1.0, math.nan]})
        assert read_json(str(path)) == {'gap': None, 'list': [1.0, None]}

    def test_no_temporary_files_left(self, tmp_path):
        write_json_atomic(str(tmp_path / 'x.json'), {'a': 1})
        assert [p.name for p in tmp_path.iterdir()] == ['x.json']

    def test_table_round_trip(self, tmp_path):
        path = tmp_path / 'single.csv'
        rows = [{'D': 2, 'gamma': 0.5, 'e0': 1 / 7}, {'D': 4, 'gamma': 0.5, 'e0': 2 / 7}]
        write_table(str(path), rows, ['D', 'gamma', 'e0'])
        raw = path.read_bytes()
        assert raw.startswith(b'D,gamma,e0\r\n')
        df = read_table(str(path))
        assert list(df['D']) == [2, 4]
        assert df['e0'][0] == 1 / 7

    def test_empty_table_keeps_header(self, tmp_path):
        path = tmp_path / 'empty.csv'
        write_table(str(path), [], ['a', 'b'])
        assert path.read_text(encoding='utf-8').strip() == 'a,b'


class TestAnsatzCodec:

    def test_single(self):
        ansatz = generic_ansatz(3, seed=4)
        back = ansatz_from_dict(json.loads(json.dumps(ansatz_to_dict(ansatz))))
        assert_allclose(back.K, ansatz.K, rtol=0, atol=0)
        assert_allclose(back.R, ansatz.R, rtol=0, atol=0)

    def test_coupled(self):
        z = np.array([[0.1, 0.02j], [-0.02j, 0.3]])
        ansatz = from_singles(generic_ansatz(2, seed=1), generic_ansatz(2, seed=2), [(z, 2 * z)])
        back = ansatz_from_dict(ansatz_to_dict(ansatz))
        assert back.P == 1
        assert_allclose(back.Z[0][1], 2 * z)

    def test_result(self):
        result = OptimResult(
            ansatz=generic_ansatz(2, seed=3), energy=0.25, densities=(1.0,), constraint_residuals=(1e-9,),
            iterations=17, converged=True, gap=math.inf, layout=ParamLayout('single', 2),
            observables={'kinetic': 0.1}, objective_trace=[[1.0, 0.5]], restart_index=1,
        )
        back = result_from_dict(json.loads(json.dumps(result_to_dict(result))))
        assert back.energy == 0.25
        assert back.layout == result.layout
        assert math.isinf(back.gap)
        assert back.restart_index == 1
        assert back.objective_trace == []
        assert_allclose(back.ansatz.R, result.ansatz.R)
