# -*- coding: utf-8 -*-
"""
Runner
Turns a RunConfig into point computations on disk. Every optimization is a
point with a stable key, a seed derived from (run seed, key) and its own
JSON file under points/. Tables are rebuilt from the point files only, so
fresh and resumed runs produce the same CSVs.
"""

import hashlib
import logging
import math
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from config import Config
from core import __version__
from core.bethe import TONKS_ENERGY, energy_density_exact, luttinger_exact, solve_bethe, weak_coupling_energy
from core.cmps_coupled import CoupledModelParams, mean_field_energy
from core.cmps_single import ModelParams
from core.exceptions import CmpsError, ConfigHashMismatch, MissingInputs, SweepPointFailed
from core.luttinger import (
    EnergySurface, SurfaceSample, density_grid, luttinger_coupled, luttinger_single,
    sweep_coupled, sweep_single,
)
from core.param_layout import ParamLayout
from core.run_config import RunConfig, config_hash, load_run_config
from core.storage import read_json, result_from_dict, result_to_dict, write_json_atomic, write_table
from core.variational import minimize, refine_pairs, warm_start_coupled

logger = logging.getLogger(__name__)

CONFIG_FILE = 'config.json'
RECORD_FILE = 'run.json'
POINTS_DIR = 'points'

TABLE_COLUMNS = {
    'bethe': ['gamma', 'e', 'lam', 'residual', 'nodes', 'weak_coupling', 'tonks'],
    'single': ['D', 'gamma', 'M', 'c', 'rho0', 'energy', 'density', 'kinetic', 'pair', 'gap',
               'correlation_length', 'iterations', 'converged', 'bethe_energy'],
    'coupled': ['D', 'P', 'g', 'M', 'c', 'rho01', 'rho02', 'energy', 'n1', 'n2', 'cross', 'correlation',
                'gap', 'iterations', 'converged', 'e1', 'e2', 'mean_field_energy'],
    'sweep-single': ['D', 'gamma', 'rho', 'energy', 'gap', 'converged'],
    'sweep-coupled': ['D', 'P', 'g', 'rho1', 'rho2', 'energy', 'gap', 'converged'],
    'luttinger-single': ['D', 'gamma', 'M', 'rho0', 'v', 'K', 'second_derivative', 'rho_ref',
                         'v_uncertainty', 'K_uncertainty', 'bethe_v', 'bethe_K'],
    'luttinger-coupled': ['D', 'P', 'g', 'channel', 'v', 'K', 'second_derivative', 'rho_ref',
                          'rho_ref_policy', 'v_uncertainty', 'K_uncertainty'],
}


@dataclass
class RunRecord:
    """run.json: config snapshot, hash, version, timing and point summaries"""
    config: dict
    config_hash: str
    version: str = __version__
    status: str = 'running'
    started: float = 0.0
    finished: float = 0.0
    elapsed: float = 0.0
    points: dict = field(default_factory=dict)
    failed: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


def point_seed(seed, key) -> int:
    digest = hashlib.sha256(f"{seed}:{key}".encode('utf-8')).digest()
    return int.from_bytes(digest[:4], 'big')


def _tag(x) -> str:
    return repr(float(x))


def run_directory(cfg, out=None, config_path=None) -> str:
    """--out, then output_dir, then <OUTPUT_FOLDER>/<name>-<hash8>"""
    if out:
        return out
    if cfg.output_dir:
        return cfg.output_dir
    stem = cfg.name or (os.path.splitext(os.path.basename(config_path))[0] if config_path else cfg.mode)
    return os.path.join(Config.OUTPUT_FOLDER, f"{stem}-{cfg.config_hash()[:8]}")


class Runner:
    """Executes the points of one run directory"""

    def __init__(self, cfg, run_dir, jobs=1):
        self.cfg = cfg
        self.run_dir = run_dir
        self.jobs = max(1, int(jobs))
        self.points_dir = os.path.join(run_dir, POINTS_DIR)
        self.failed = {}
        self.computed = 0
        self._lock = threading.Lock()
        os.makedirs(self.points_dir, exist_ok=True)

    # ==================== Points ====================
    def point_path(self, key):
        return os.path.join(self.points_dir, f"{key}.json")

    def load_point(self, key):
        path = self.point_path(key)
        return read_json(path) if os.path.isfile(path) else None

    def load_result(self, key):
        data = self.load_point(key)
        return None if data is None else result_from_dict(data['result'])

    def save_point(self, key, payload):
        write_json_atomic(self.point_path(key), dict(payload, key=key))
        with self._lock:
            self.computed += 1

    def save_result(self, key, inputs, result):
        self.save_point(key, {'inputs': inputs, 'result': result_to_dict(result)})

    def fail(self, key, reason):
        logger.error(f"point {key} failed: {reason}")
        with self._lock:
            self.failed[key] = str(reason)

    def optimizer_for(self, key):
        return replace(self.cfg.optimizer, seed=point_seed(self.cfg.seed, key))

    # ==================== Parameters ====================
    @property
    def gammas(self):
        m = self.cfg.model
        if self.cfg.grids.gamma:
            return list(self.cfg.grids.gamma)
        return [ModelParams(M=m['M'], c=m['c'], rho0=m['rho0']).gamma]

    @property
    def couplings(self):
        return list(self.cfg.grids.g) or [self.cfg.model['g']]

    def single_params(self, gamma):
        m = self.cfg.model
        return ModelParams.from_gamma(gamma, rho0=m['rho0'], M=m['M'])

    def coupled_params(self, g):
        m = self.cfg.model
        return CoupledModelParams(M=m['M'], c=m['c'], g=g, rho01=m['rho01'], rho02=m['rho02'])

    def species_key(self, D, rho):
        return f"species-D{D}-c{_tag(self.cfg.model['c'])}-rho{_tag(rho)}"

    def sweep_key(self, D, gamma, i):
        return f"sweep-D{D}-gamma{_tag(gamma)}-i{i:02d}"

    def sweep2_key(self, D, P, g, i, j):
        return f"sweep-D{D}-P{P}-g{_tag(g)}-i{i:02d}-j{j:02d}"

    # ==================== Work units ====================
    def _optimize(self, key, params, layout, inputs, initial=None):
        result = self.load_result(key)
        if result is None:
            result = minimize(initial, params, self.optimizer_for(key), layout=layout)
            self.save_result(key, inputs, result)
        if not result.converged:
            self.fail(key, f"not converged (residuals {result.constraint_residuals})")
        return result

    def bethe_point(self, gamma):
        key = f"bethe-gamma{_tag(gamma)}"
        if self.load_point(key) is None:
            sol = solve_bethe(gamma, self.cfg.grids.bethe_nodes)
            self.save_point(key, {'inputs': {'gamma': gamma}, 'result': {
                'gamma': sol.gamma, 'e': sol.e_dimensionless, 'lam': sol.lam,
                'residual': sol.residual, 'nodes': sol.quad_nodes}})

    def single_point(self, D, gamma):
        params = self.single_params(gamma)
        self._optimize(f"single-D{D}-gamma{_tag(gamma)}", params, ParamLayout('single', D),
                       {'D': D, 'gamma': gamma, 'M': params.M, 'c': params.c, 'rho0': params.rho0})

    def species_point(self, D, rho):
        params = ModelParams(M=self.cfg.model['M'], c=self.cfg.model['c'], rho0=rho)
        return self._optimize(self.species_key(D, rho), params, ParamLayout('single', D),
                              {'D': D, 'M': params.M, 'c': params.c, 'rho0': rho})

    def species_results(self, D):
        m = self.cfg.model
        return self.load_result(self.species_key(D, m['rho01'])), self.load_result(self.species_key(D, m['rho02']))

    def warm_start(self, D, P, key):
        s1, s2 = self.species_results(D)
        if s1 is None or s2 is None or not (s1.converged and s2.converged):
            return None
        return warm_start_coupled(s1, s2, P, seed=point_seed(self.cfg.seed, key))

    def coupled_point(self, D, P, g):
        key = f"coupled-D{D}-P{P}-g{_tag(g)}"
        params = self.coupled_params(g)
        inputs = {'D': D, 'P': P, 'g': g, 'M': params.M, 'c': params.c,
                  'rho01': params.rho01, 'rho02': params.rho02}
        plain = self.load_result(f"coupled-D{D}-P0-g{_tag(g)}") if P else None
        if P and plain is not None and plain.converged and self.load_point(key) is None:
            result = refine_pairs(plain, params, self.optimizer_for(key), P, seed=point_seed(self.cfg.seed, key))
            self.save_result(key, inputs, result)
        initial = None if self.load_point(key) else self.warm_start(D, P, key)
        self._optimize(key, params, ParamLayout('coupled', D, P), inputs, initial)

    def sweep_single_chain(self, D, gamma):
        params = self.single_params(gamma)
        grid = density_grid(params.rho0, self.cfg.grids.density_nodes, self.cfg.grids.density_span)
        keys = {i: self.sweep_key(D, gamma, i) for i in range(len(grid))}
        known = {}
        for i, key in keys.items():
            result = self.load_result(key)
            if result is not None:
                known[i] = result

        def on_point(i, point, result):
            self.save_result(keys[i], {'D': D, 'gamma': gamma, 'M': params.M, 'c': params.c,
                                       'rho': point[0], 'index': i}, result)

        chain = f"sweep-D{D}-gamma{_tag(gamma)}"
        try:
            sweep_single(params, grid, self.optimizer_for(chain), D, known=known, on_point=on_point)
        except SweepPointFailed as e:
            self.fail(chain, e)

    def sweep_coupled_chain(self, D, P, g):
        params = self.coupled_params(g)
        nodes, span = self.cfg.grids.density_nodes, self.cfg.grids.density_span
        grid = (density_grid(params.rho01, nodes, span), density_grid(params.rho02, nodes, span))
        keys = {(i, j): self.sweep2_key(D, P, g, i, j) for i in range(nodes) for j in range(nodes)}
        known = {}
        for ij, key in keys.items():
            result = self.load_result(key)
            if result is not None:
                known[ij] = result

        def on_point(ij, point, result):
            self.save_result(keys[ij], {'D': D, 'P': P, 'g': g, 'M': params.M, 'c': params.c,
                                        'rho1': point[0], 'rho2': point[1], 'index': list(ij)}, result)

        chain = f"sweep-D{D}-P{P}-g{_tag(g)}"
        try:
            sweep_coupled(params, grid, self.optimizer_for(chain), D, P, initial=self.warm_start(D, P, chain),
                          known=known, on_point=on_point)
        except SweepPointFailed as e:
            self.fail(chain, e)

    # ==================== Plans ====================
    def stages(self):
        """Lists of independent work units; each stage runs after the previous one"""
        cfg = self.cfg
        if cfg.mode == 'bethe':
            return [[(f"bethe {g}", lambda g=g: self.bethe_point(g)) for g in cfg.grids.gamma]]

        if not cfg.coupled:
            if cfg.mode == 'single':
                unit = self.single_point
            else:
                unit = self.sweep_single_chain
            return [[(f"D={D} gamma={g}", lambda D=D, g=g: unit(D, g))
                     for D in cfg.bond_dims for g in self.gammas]]

        species = []
        seen = set()
        for D in cfg.bond_dims:
            for rho in (cfg.model['rho01'], cfg.model['rho02']):
                if (D, rho) not in seen:
                    seen.add((D, rho))
                    species.append((f"species D={D} rho={rho}", lambda D=D, rho=rho: self.species_point(D, rho)))
        unit = self.coupled_point if cfg.mode == 'coupled' else self.sweep_coupled_chain

        def units(pairs):
            return [(f"D={D} P={P} g={g}", lambda D=D, P=P, g=g: unit(D, P, g))
                    for D in cfg.bond_dims for P in pairs for g in self.couplings]

        if cfg.mode != 'coupled':
            return [species, units(cfg.pairs)]
        # P > 0 points start from the P = 0 optimum at the same (D, g)
        stages = [species, units([P for P in cfg.pairs if P == 0]), units([P for P in cfg.pairs if P > 0])]
        return [stage for stage in stages if stage]

    def _guarded(self, item):
        label, work = item
        try:
            work()
        except CmpsError as e:
            self.fail(label, e)

    def execute(self):
        for n, stage in enumerate(self.stages()):
            logger.info(f"stage {n + 1}: {len(stage)} work units on {self.jobs} worker(s)")
            if self.jobs == 1:
                for item in stage:
                    self._guarded(item)
            else:
                with ThreadPoolExecutor(max_workers=self.jobs) as pool:
                    list(pool.map(self._guarded, stage))
        return self.build_tables()

    # ==================== Tables ====================
    def _point_results(self, key):
        data = self.load_point(key)
        return None if data is None else data['result']

    def build_tables(self):
        """Rebuild every CSV table of this mode from the point files; returns missing point keys"""
        cfg = self.cfg
        missing = []
        if cfg.mode == 'bethe':
            rows = []
            for g in cfg.grids.gamma:
                r = self._point_results(f"bethe-gamma{_tag(g)}")
                if r is None:
                    missing.append(f"bethe-gamma{_tag(g)}")
                    continue
                rows.append([r['gamma'], r['e'], r['lam'], r['residual'], r['nodes'],
                             weak_coupling_energy(r['gamma']), TONKS_ENERGY])
            self._write('bethe', rows)
        elif cfg.mode == 'single':
            self._write('single', self._single_rows(missing))
        elif cfg.mode == 'coupled':
            self._write('coupled', self._coupled_rows(missing))
        elif not cfg.coupled:
            surfaces = self._single_surfaces(missing)
            if cfg.mode == 'luttinger':
                self._write('luttinger-single', self._luttinger_single_rows(surfaces))
        else:
            surfaces = self._coupled_surfaces(missing)
            if cfg.mode == 'luttinger':
                self._write('luttinger-coupled', self._luttinger_coupled_rows(surfaces))
        return missing

    def _write(self, table, rows):
        name = table.split('-')[0]
        write_table(os.path.join(self.run_dir, f"{name}.csv"), rows, TABLE_COLUMNS[table])

    def _single_rows(self, missing):
        rows = []
        for D in self.cfg.bond_dims:
            for gamma in self.gammas:
                key = f"single-D{D}-gamma{_tag(gamma)}"
                r = self._point_results(key)
                if r is None:
                    missing.append(key)
                    continue
                p = self.single_params(gamma)
                obs = r['observables']
                gap = math.inf if r['gap'] is None else r['gap']
                length = math.inf if math.isinf(gap) or gap <= 0 else 1.0 / gap
                exact = energy_density_exact(p.rho0, p, self.cfg.grids.bethe_nodes) if p.c > 0 else 0.0
                rows.append([D, gamma, p.M, p.c, p.rho0, r['energy'], obs['density'], obs['kinetic'],
                             obs['pair'], gap, length, r['iterations'], r['converged'], exact])
        return rows

    def _coupled_rows(self, missing):
        rows = []
        m = self.cfg.model
        for D in self.cfg.bond_dims:
            s1, s2 = self.species_results(D)
            for P in self.cfg.pairs:
                for g in self.couplings:
                    key = f"coupled-D{D}-P{P}-g{_tag(g)}"
                    r = self._point_results(key)
                    if r is None:
                        missing.append(key)
                        continue
                    obs = r['observables']
                    e1 = s1.energy if s1 else None
                    e2 = s2.energy if s2 else None
                    mf = mean_field_energy(e1, e2, self.coupled_params(g)) if s1 and s2 else None
                    rows.append([D, P, g, m['M'], m['c'], m['rho01'], m['rho02'], r['energy'], obs['n1'],
                                 obs['n2'], obs['cross'], obs['correlation'], r['gap'], r['iterations'],
                                 r['converged'], e1, e2, mf])
        return rows

    def _single_surfaces(self, missing):
        rows = []
        surfaces = {}
        grids = self.cfg.grids
        for D in self.cfg.bond_dims:
            for gamma in self.gammas:
                rho0 = self.single_params(gamma).rho0
                samples = []
                for i, rho in enumerate(density_grid(rho0, grids.density_nodes, grids.density_span)):
                    r = self._point_results(self.sweep_key(D, gamma, i))
                    if r is None:
                        missing.append(self.sweep_key(D, gamma, i))
                        continue
                    rows.append([D, gamma, float(rho), r['energy'], r['gap'], r['converged']])
                    samples.append(SurfaceSample((float(rho),), r['energy'], r['converged']))
                surfaces[(D, gamma)] = samples if len(samples) == grids.density_nodes else None
        self._write('sweep-single', rows)
        return surfaces

    def _coupled_surfaces(self, missing):
        rows = []
        surfaces = {}
        grids = self.cfg.grids
        m = self.cfg.model
        xs = density_grid(m['rho01'], grids.density_nodes, grids.density_span)
        ys = density_grid(m['rho02'], grids.density_nodes, grids.density_span)
        for D in self.cfg.bond_dims:
            for P in self.cfg.pairs:
                for g in self.couplings:
                    samples = []
                    for i, x in enumerate(xs):
                        for j, y in enumerate(ys):
                            key = self.sweep2_key(D, P, g, i, j)
                            r = self._point_results(key)
                            if r is None:
                                missing.append(key)
                                continue
                            rows.append([D, P, g, float(x), float(y), r['energy'], r['gap'], r['converged']])
                            samples.append(SurfaceSample((float(x), float(y)), r['energy'], r['converged']))
                    complete = len(samples) == grids.density_nodes ** 2
                    surfaces[(D, P, g)] = samples if complete else None
        self._write('sweep-coupled', rows)
        return surfaces

    def _luttinger_single_rows(self, surfaces):
        rows = []
        for (D, gamma), samples in surfaces.items():
            if samples is None:
                continue
            p = self.single_params(gamma)
            try:
                res = luttinger_single(EnergySurface.from_samples(samples, 1), p.rho0, p.M)
                exact = luttinger_exact(p, self.cfg.grids.bethe_nodes, self.cfg.grids.density_nodes,
                                        self.cfg.grids.density_span) if p.c > 0 else None
            except CmpsError as e:
                self.fail(f"luttinger-D{D}-gamma{_tag(gamma)}", e)
                continue
            rows.append([D, gamma, p.M, p.rho0, res.v, res.K, res.second_derivative, res.rho_ref,
                         res.uncertainty.get('v'), res.uncertainty.get('K'),
                         exact.v if exact else None, exact.K if exact else None])
        return rows

    def _luttinger_coupled_rows(self, surfaces):
        rows = []
        m = self.cfg.model
        for (D, P, g), samples in surfaces.items():
            if samples is None:
                continue
            try:
                surface = EnergySurface.from_samples(samples, 2)
                results = [luttinger_coupled(surface, m['rho01'], m['rho02'], m['M'], channel,
                                             self.cfg.rho_ref_policy) for channel in ('plus', 'minus')]
            except CmpsError as e:
                self.fail(f"luttinger-D{D}-P{P}-g{_tag(g)}", e)
                continue
            for res in results:
                rows.append([D, P, g, res.channel, res.v, res.K, res.second_derivative, res.rho_ref,
                             res.rho_ref_policy, res.uncertainty.get('v'), res.uncertainty.get('K')])
        return rows


# ==================== Entry points ====================
def _point_summaries(runner):
    summaries = {}
    for name in sorted(os.listdir(runner.points_dir)):
        if not name.endswith('.json'):
            continue
        data = read_json(os.path.join(runner.points_dir, name))
        r = data.get('result', {})
        summaries[data['key']] = {k: r.get(k) for k in ('energy', 'e', 'converged') if k in r}
    return summaries


def _execute(cfg, run_dir, jobs, record):
    runner = Runner(cfg, run_dir, jobs)
    start = time.time()
    missing = runner.execute()
    if runner.computed == 0 and not runner.failed and not missing and record.status == 'complete':
        logger.info(f"{run_dir}: nothing to do")
        return record
    record.points = _point_summaries(runner)
    record.failed = dict(sorted(runner.failed.items()))
    record.status = 'complete' if not runner.failed and not missing else 'failed'
    record.finished = time.time()
    record.elapsed += record.finished - start
    write_json_atomic(os.path.join(run_dir, RECORD_FILE), record.to_dict())
    logger.info(f"{run_dir}: {runner.computed} new point(s), status {record.status}")
    return record


def run(config_path, jobs=None, seed=None, out=None):
    """Run a configuration file; returns the RunRecord"""
    cfg = load_run_config(config_path).with_overrides(seed=seed)
    run_dir = run_directory(cfg, out, config_path)
    snapshot = cfg.to_dict()
    record_path = os.path.join(run_dir, RECORD_FILE)
    if os.path.isfile(record_path):
        record = RunRecord.from_dict(read_json(record_path))
        if record.config_hash != config_hash(snapshot):
            raise ConfigHashMismatch(f"{run_dir} holds a run of a different configuration")
        logger.info(f"{run_dir}: continuing existing run")
    else:
        record = RunRecord(config=snapshot, config_hash=config_hash(snapshot), started=time.time())
        write_json_atomic(os.path.join(run_dir, CONFIG_FILE), snapshot)
        write_json_atomic(record_path, record.to_dict())
    return _execute(cfg, run_dir, jobs or Config.JOBS, record)


def resume(run_dir, jobs=None):
    """Complete the missing points of an existing run directory"""
    record_path = os.path.join(run_dir, RECORD_FILE)
    config_path = os.path.join(run_dir, CONFIG_FILE)
    missing = [p for p in (record_path, config_path) if not os.path.isfile(p)]
    if missing:
        raise MissingInputs(missing)
    record = RunRecord.from_dict(read_json(record_path))
    snapshot = read_json(config_path)
    if config_hash(snapshot) != record.config_hash:
        raise ConfigHashMismatch(f"{config_path} does not match the hash recorded in {record_path}")
    cfg = RunConfig.from_dict(snapshot)
    return _execute(cfg, run_dir, jobs or Config.JOBS, record)
