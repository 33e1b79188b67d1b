# -*- coding: utf-8 -*-
"""
Storage
Atomic JSON point files, CSV series tables and (de)serialization of
optimized ansaetze. Floats are written losslessly: JSON uses the shortest
round-trip repr, CSV uses 17 significant digits.
"""

import json
import logging
import math
import os
import tempfile

import numpy as np
import pandas as pd

from core.cmps_coupled import CoupledAnsatz
from core.cmps_single import CmpsAnsatz
from core.param_layout import ParamLayout
from core.variational import OptimResult

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


# ==================== Files ====================
def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None"""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else None
    return obj


def _atomic_write(path, write):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
            write(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise


def write_json_atomic(path, data):
    _atomic_write(path, lambda f: json.dump(_clean(data), f, indent=1, sort_keys=True, allow_nan=False))


def read_json(path):
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


def write_table(path, rows, columns):
    """RFC-4180 CSV with a header row, UTF-8"""
    df = pd.DataFrame(rows, columns=columns)
    _atomic_write(path, lambda f: df.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator='\r\n'))
    logger.debug(f"wrote {len(df)} rows to {path}")
    return df


def read_table(path) -> pd.DataFrame:
    return pd.read_csv(path, encoding='utf-8', float_precision='round_trip')


# ==================== Ansatz codec ====================
def _matrix_to_dict(m):
    m = np.asarray(m, dtype=np.complex128)
    return {'re': m.real.tolist(), 'im': m.imag.tolist()}


def _matrix_from_dict(d):
    return np.asarray(d['re'], dtype=float) + 1j * np.asarray(d['im'], dtype=float)


def ansatz_to_dict(ansatz):
    if isinstance(ansatz, CoupledAnsatz):
        return {
            'kind': 'coupled',
            'K1': _matrix_to_dict(ansatz.K1), 'K2': _matrix_to_dict(ansatz.K2),
            'R1': _matrix_to_dict(ansatz.R1), 'R2': _matrix_to_dict(ansatz.R2),
            'Z': [[_matrix_to_dict(z1), _matrix_to_dict(z2)] for z1, z2 in ansatz.Z],
        }
    return {'kind': 'single', 'K': _matrix_to_dict(ansatz.K), 'R': _matrix_to_dict(ansatz.R)}


def ansatz_from_dict(d):
    if d['kind'] == 'coupled':
        return CoupledAnsatz(
            K1=_matrix_from_dict(d['K1']), K2=_matrix_from_dict(d['K2']),
            R1=_matrix_from_dict(d['R1']), R2=_matrix_from_dict(d['R2']),
            Z=tuple((_matrix_from_dict(a), _matrix_from_dict(b)) for a, b in d['Z']),
        )
    return CmpsAnsatz(K=_matrix_from_dict(d['K']), R=_matrix_from_dict(d['R']))


def result_to_dict(result):
    data = result.summary()
    data['layout'] = {'kind': result.layout.kind, 'D': result.layout.D, 'P': result.layout.P}
    data['ansatz'] = ansatz_to_dict(result.ansatz)
    return data


def result_from_dict(d) -> OptimResult:
    """OptimResult from a point file; the objective trace is not stored"""
    gap = d.get('gap')
    return OptimResult(
        ansatz=ansatz_from_dict(d['ansatz']),
        energy=d['energy'],
        densities=tuple(d['densities']),
        constraint_residuals=tuple(d['constraint_residuals']),
        iterations=d['iterations'],
        converged=d['converged'],
        gap=math.inf if gap is None else gap,
        layout=ParamLayout(**d['layout']),
        observables=dict(d.get('observables') or {}),
        restart_index=d.get('restart_index', 0),
    )
