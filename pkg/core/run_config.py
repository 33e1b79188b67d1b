# -*- coding: utf-8 -*-
"""
Run Configuration
JSON run description, validated with key-path error messages.
"""

import hashlib
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import List, Optional

from config import Config, active_config
from core.exceptions import ConfigError
from core.luttinger import RHO_REF_POLICIES
from core.variational import OptimizerConfig

logger = logging.getLogger(__name__)

MODES = tuple(Config.RUN_MODES)
SYSTEMS = ('single', 'coupled')

TOP_KEYS = {'mode', 'system', 'model', 'bond_dims', 'pairs', 'optimizer', 'grids',
            'rho_ref_policy', 'output_dir', 'seed', 'name'}
MODEL_KEYS = {'M', 'c', 'g', 'rho0', 'rho01', 'rho02'}
GRID_KEYS = {'gamma', 'g', 'density_nodes', 'density_span', 'bethe_nodes'}
SCHEMA_PATH = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs', 'run.schema.json')


@dataclass(frozen=True)
class Grids:
    gamma: List[float] = field(default_factory=list)
    g: List[float] = field(default_factory=list)
    density_nodes: int = Config.SURFACE_NODES
    density_span: float = Config.SURFACE_MIN_SPAN
    bethe_nodes: int = Config.BETHE_NODES


@dataclass(frozen=True)
class RunConfig:
    mode: str
    model: dict
    system: str = 'single'
    bond_dims: List[int] = field(default_factory=lambda: [2])
    pairs: List[int] = field(default_factory=lambda: [Config.DEFAULT_PAIRS])
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    grids: Grids = field(default_factory=Grids)
    rho_ref_policy: str = Config.RHO_REF_POLICY
    output_dir: Optional[str] = None
    seed: int = 0
    name: Optional[str] = None

    @property
    def coupled(self) -> bool:
        return self.mode == 'coupled' or (self.mode in ('sweep-density', 'luttinger') and self.system == 'coupled')

    def to_dict(self):
        data = asdict(self)
        data['optimizer'] = self.optimizer.to_dict()
        return data

    def config_hash(self) -> str:
        return config_hash(self.to_dict())

    def with_overrides(self, seed=None, output_dir=None):
        data = self.to_dict()
        if seed is not None:
            data['seed'] = seed
        if output_dir is not None:
            data['output_dir'] = output_dir
        return RunConfig.from_dict(data)

    @classmethod
    def from_dict(cls, data):
        errors = []
        cfg = _validate(data, errors)
        if errors:
            raise ConfigError(errors)
        return cfg


def config_hash(data) -> str:
    """sha256 of the canonical JSON form"""
    canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_run_config(path) -> RunConfig:
    if not os.path.isfile(path):
        raise ConfigError([f"{path}: file not found"])
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError([f"{path}: invalid JSON ({e})"]) from e
    return RunConfig.from_dict(data)


# ==================== Validation ====================
def _number(value, path, errors, positive=False, nonneg=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        errors.append(f"{path}: expected a finite number, got {value!r}")
        return None
    if positive and not value > 0:
        errors.append(f"{path}: must be > 0, got {value}")
    if nonneg and not value >= 0:
        errors.append(f"{path}: must be >= 0, got {value}")
    return float(value)


def _integer(value, path, errors, minimum):
    if isinstance(value, bool) or not isinstance(value, int):
        errors.append(f"{path}: expected an integer, got {value!r}")
        return None
    if value < minimum:
        errors.append(f"{path}: must be >= {minimum}, got {value}")
    return value


def _unknown(data, allowed, prefix, errors):
    for key in sorted(set(data) - allowed):
        errors.append(f"{prefix}{key}: unknown key")


def _number_list(value, path, errors, **kw):
    if not isinstance(value, list):
        errors.append(f"{path}: expected a list")
        return []
    return [_number(v, f"{path}[{i}]", errors, **kw) for i, v in enumerate(value)]


def _validate(data, errors):
    if not isinstance(data, dict):
        errors.append("<root>: expected a JSON object")
        return None
    _unknown(data, TOP_KEYS, '', errors)

    mode = data.get('mode')
    if mode not in MODES:
        errors.append(f"mode: must be one of {', '.join(MODES)}, got {mode!r}")
    system = data.get('system', 'single')
    if system not in SYSTEMS:
        errors.append(f"system: must be one of {', '.join(SYSTEMS)}, got {system!r}")
    coupled = mode == 'coupled' or (mode in ('sweep-density', 'luttinger') and system == 'coupled')

    model = data.get('model', {})
    if not isinstance(model, dict):
        errors.append("model: expected an object")
        model = {}
    _unknown(model, MODEL_KEYS, 'model.', errors)
    m = {'M': _number(model.get('M', 0.5), 'model.M', errors, positive=True)}
    if 'c' in model:
        m['c'] = _number(model['c'], 'model.c', errors, nonneg=True)
    if 'g' in model:
        m['g'] = _number(model['g'], 'model.g', errors)
    if coupled:
        for key in ('rho01', 'rho02'):
            m[key] = _number(model.get(key, 1.0), f'model.{key}', errors, positive=True)
    else:
        m['rho0'] = _number(model.get('rho0', 1.0), 'model.rho0', errors, positive=True)

    grids_in = data.get('grids', {})
    if not isinstance(grids_in, dict):
        errors.append("grids: expected an object")
        grids_in = {}
    _unknown(grids_in, GRID_KEYS, 'grids.', errors)
    gamma = _number_list(grids_in['gamma'], 'grids.gamma', errors, positive=True) if 'gamma' in grids_in else []
    g = _number_list(grids_in['g'], 'grids.g', errors) if 'g' in grids_in else []
    nodes = _integer(grids_in.get('density_nodes', Config.SURFACE_NODES), 'grids.density_nodes', errors,
                     Config.SURFACE_MIN_NODES if mode == 'luttinger' else 3)
    span = _number(grids_in.get('density_span', Config.SURFACE_MIN_SPAN), 'grids.density_span', errors,
                   positive=True)
    if span is not None and not span < 1:
        errors.append(f"grids.density_span: must be < 1, got {span}")
    if mode == 'luttinger' and span is not None and span < Config.SURFACE_MIN_SPAN:
        errors.append(f"grids.density_span: must be >= {Config.SURFACE_MIN_SPAN} for luttinger runs")
    bethe_nodes = _integer(grids_in.get('bethe_nodes', Config.BETHE_NODES), 'grids.bethe_nodes', errors, 64)

    if mode == 'bethe' and not gamma:
        errors.append("grids.gamma: required for bethe runs")
    if mode in MODES and mode != 'bethe':
        if coupled:
            if 'c' not in m:
                errors.append("model.c: required for coupled runs")
            if not g and 'g' not in m:
                errors.append("grids.g: required for coupled runs (or set model.g)")
            if mode == 'luttinger' and m.get('rho01') != m.get('rho02'):
                errors.append("model.rho02: coupled luttinger runs need rho01 == rho02")
        elif not gamma and 'c' not in m:
            errors.append("grids.gamma: required for single-field runs (or set model.c)")

    bond_dims = data.get('bond_dims', [2])
    if not isinstance(bond_dims, list) or not bond_dims:
        errors.append("bond_dims: expected a non-empty list")
        bond_dims = []
    bond_dims = [_integer(d, f"bond_dims[{i}]", errors, 1) for i, d in enumerate(bond_dims)]
    pairs = data.get('pairs', [Config.DEFAULT_PAIRS])
    if not isinstance(pairs, list) or not pairs:
        errors.append("pairs: expected a non-empty list")
        pairs = []
    pairs = [_integer(p, f"pairs[{i}]", errors, 0) for i, p in enumerate(pairs)]

    policy = data.get('rho_ref_policy', Config.RHO_REF_POLICY)
    if policy not in RHO_REF_POLICIES:
        errors.append(f"rho_ref_policy: must be one of {', '.join(RHO_REF_POLICIES)}, got {policy!r}")

    seed = _integer(data.get('seed', 0), 'seed', errors, 0)
    output_dir = data.get('output_dir')
    if output_dir is not None and not isinstance(output_dir, str):
        errors.append("output_dir: expected a string")
    name = data.get('name')
    if name is not None and not isinstance(name, str):
        errors.append("name: expected a string")

    optimizer_in = data.get('optimizer', {})
    optimizer = None
    if not isinstance(optimizer_in, dict):
        errors.append("optimizer: expected an object")
    else:
        known = set(Config.OPTIMIZER)
        _unknown(optimizer_in, known, 'optimizer.', errors)
        for key, value in optimizer_in.items():
            if key in known:
                _number(value, f'optimizer.{key}', errors)
        try:
            optimizer = OptimizerConfig.from_dict({k: v for k, v in optimizer_in.items() if k in known},
                                                  defaults=active_optimizer_defaults())
        except (TypeError, ValueError) as e:
            errors.append(f"optimizer: {e}")

    if errors:
        return None
    return RunConfig(
        mode=mode, system=system, model=m, bond_dims=bond_dims, pairs=pairs, optimizer=optimizer,
        grids=Grids(gamma=gamma, g=g, density_nodes=nodes, density_span=span, bethe_nodes=bethe_nodes),
        rho_ref_policy=policy, output_dir=output_dir, seed=seed, name=name,
    )


def active_optimizer_defaults():
    return active_config().OPTIMIZER


def published_schema(path=SCHEMA_PATH) -> dict:
    """The JSON Schema of run files shipped under configs/"""
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)
