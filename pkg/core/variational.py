# -*- coding: utf-8 -*-
"""
Variational Engine
Density-constrained minimization of the cMPS energy density: augmented
Lagrangian outer loop around BFGS with central finite-difference gradients.
"""

import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Tuple

import numpy as np

from config import Config
from core.cmps_coupled import (
    CoupledAnsatz, CoupledModelParams, from_singles, local_observables_coupled,
)
from core.cmps_single import CmpsAnsatz, ModelParams, local_observables, random_ansatz
from core.exceptions import AllRestartsInfeasible, CmpsError, InfeasiblePoint, LayoutMismatch, NotConverged
from core.param_layout import (
    ParamLayout, ParamVector, gauge_fix_coupled, gauge_fix_single, hermitian_to_reals, pack, unpack,
)

logger = logging.getLogger(__name__)

MAX_STEP = 1.0
MIN_ALPHA = 1e-12
INIT_ATTEMPTS = 20
NOISE_FLOOR = 1e3


# ========================= Types =========================
@dataclass(frozen=True)
class OptimizerConfig:
    max_iters: int = Config.OPTIMIZER['max_iters']
    grad_step: float = Config.OPTIMIZER['grad_step']
    energy_tol: float = Config.OPTIMIZER['energy_tol']
    grad_tol: float = Config.OPTIMIZER['grad_tol']
    constraint_tol: float = Config.OPTIMIZER['constraint_tol']
    penalty_init: float = Config.OPTIMIZER['penalty_init']
    penalty_growth: float = Config.OPTIMIZER['penalty_growth']
    max_outer: int = Config.OPTIMIZER['max_outer']
    restarts: int = Config.OPTIMIZER['restarts']
    seed: int = Config.OPTIMIZER['seed']
    init_scale: float = Config.OPTIMIZER['init_scale']
    line_search_shrink: float = Config.OPTIMIZER['line_search_shrink']
    armijo: float = Config.OPTIMIZER['armijo']

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == 'seed':
                if value < 0:
                    raise ValueError("seed must be >= 0")
            elif not value > 0:
                raise ValueError(f"{f.name} must be > 0, got {value}")
        if not self.penalty_growth > 1:
            raise ValueError("penalty_growth must be > 1")
        if not (self.line_search_shrink < 1 and self.armijo < 1):
            raise ValueError("line_search_shrink and armijo must be < 1")

    @classmethod
    def from_dict(cls, data, defaults=None):
        base = dict(defaults or Config.OPTIMIZER)
        base.update(data or {})
        return cls(**{f.name: base[f.name] for f in fields(cls) if f.name in base})

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PenaltyState:
    """Multipliers mu (one per species) and quadratic weight sigma"""
    mu: Tuple[float, ...]
    sigma: float

    @classmethod
    def initial(cls, n_species, sigma):
        return cls(mu=(0.0,) * n_species, sigma=sigma)


@dataclass(frozen=True)
class Evaluation:
    energy: float
    densities: Tuple[float, ...]
    gap: float
    observables: dict


@dataclass
class OptimResult:
    ansatz: object
    energy: float
    densities: Tuple[float, ...]
    constraint_residuals: Tuple[float, ...]
    iterations: int
    converged: bool
    gap: float
    layout: ParamLayout
    observables: dict = field(default_factory=dict)
    objective_trace: list = field(default_factory=list)
    restart_index: int = 0

    def params(self) -> ParamVector:
        return pack(self.ansatz, self.layout)

    def summary(self):
        return {
            'energy': self.energy,
            'densities': list(self.densities),
            'constraint_residuals': list(self.constraint_residuals),
            'iterations': self.iterations,
            'converged': self.converged,
            'gap': None if math.isinf(self.gap) else self.gap,
            'restart_index': self.restart_index,
            'observables': dict(self.observables),
        }


# ==================== Problems ====================
class SingleFieldProblem:
    """Energy and density of a single Lieb-Liniger field"""

    def __init__(self, params, layout, tol=None):
        if layout.kind == 'coupled':
            raise LayoutMismatch("single-field problem needs a single-field layout")
        self.params = params
        self.layout = layout
        self.tol = tol
        self.targets = (params.rho0,)

    def evaluate(self, x) -> Evaluation:
        ansatz = unpack(x, self.layout)
        try:
            obs = local_observables(ansatz, self.params, self.tol)
        except CmpsError as e:
            raise InfeasiblePoint(str(e)) from e
        return Evaluation(energy=obs.energy, densities=(obs.density,), gap=obs.gap,
                          observables={'density': obs.density, 'kinetic': obs.kinetic, 'pair': obs.pair})

    def random_ansatz(self, rng, scale):
        return random_ansatz(self.layout.D, rng, scale)

    def rescale(self, ansatz, factors):
        return CmpsAnsatz(K=ansatz.K, R=ansatz.R * factors[0])

    def encode(self, ansatz):
        if self.layout.kind == 'single-gauge':
            ansatz = gauge_fix_single(ansatz)
        return pack(ansatz, self.layout).values


class CoupledProblem:
    """Energy and densities of two density-coupled Lieb-Liniger fields"""

    def __init__(self, params, layout, tol=None):
        if layout.kind != 'coupled':
            raise LayoutMismatch("coupled problem needs the coupled layout")
        self.params = params
        self.layout = layout
        self.tol = tol
        self.targets = params.targets

    def evaluate(self, x) -> Evaluation:
        ansatz = unpack(x, self.layout)
        try:
            obs, energy = local_observables_coupled(ansatz, self.params, self.tol)
        except CmpsError as e:
            raise InfeasiblePoint(str(e)) from e
        observables = {k: getattr(obs, k) for k in ('n1', 'n2', 'kin1', 'kin2', 'pair1', 'pair2', 'cross')}
        observables['correlation'] = obs.correlation
        return Evaluation(energy=energy, densities=obs.densities, gap=obs.gap, observables=observables)

    def random_ansatz(self, rng, scale):
        D = self.layout.D
        a1 = random_ansatz(D, rng, scale)
        a2 = random_ansatz(D, rng, scale)
        Z = [(random_ansatz(D, rng, scale).K, random_ansatz(D, rng, scale).K) for _ in range(self.layout.P)]
        return from_singles(a1, a2, Z)

    def rescale(self, ansatz, factors):
        return CoupledAnsatz(K1=ansatz.K1, K2=ansatz.K2, R1=ansatz.R1 * factors[0],
                             R2=ansatz.R2 * factors[1], Z=ansatz.Z)

    def encode(self, ansatz):
        return pack(gauge_fix_coupled(ansatz), self.layout).values


def make_problem(params, layout, tol=None):
    if isinstance(params, CoupledModelParams):
        return CoupledProblem(params, layout, tol)
    if isinstance(params, ModelParams):
        return SingleFieldProblem(params, layout, tol)
    raise TypeError(f"unsupported model parameters {type(params).__name__}")


def augmented_value(ev, targets, penalty) -> float:
    """e + sum_a [mu_a (n_a - rho0_a) + sigma (n_a - rho0_a)^2]"""
    value = ev.energy
    for n, target, mu in zip(ev.densities, targets, penalty.mu):
        r = n - target
        value += mu * r + penalty.sigma * r * r
    return value


# ==================== Objective and gradient ====================
def objective(v, params, penalty, tol=None) -> float:
    """Augmented-Lagrangian value; InfeasiblePoint where the steady state is rejected"""
    problem = make_problem(params, v.layout, tol)
    return augmented_value(problem.evaluate(v.values), problem.targets, penalty)


def central_gradient(f, x, h) -> np.ndarray:
    """(f(x + h e_i) - f(x - h e_i)) / 2h for every component"""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step[i] = h
        g[i] = (f(x + step) - f(x - step)) / (2.0 * h)
    if not np.all(np.isfinite(g)):
        raise InfeasiblePoint("non-finite gradient component")
    return g


def gradient_fd(v, params, penalty, h=None, tol=None) -> ParamVector:
    h = Config.OPTIMIZER['grad_step'] if h is None else h
    problem = make_problem(params, v.layout, tol)

    def f(x):
        return augmented_value(problem.evaluate(x), problem.targets, penalty)

    return ParamVector(values=central_gradient(f, v.values, h), layout=v.layout)


# ==================== BFGS inner loop ====================
def _safe(f):
    def wrapped(x):
        try:
            return f(x)
        except InfeasiblePoint:
            return math.inf
    return wrapped


def bfgs(f, x0, config, trace=None):
    """
    Quasi-Newton descent with Armijo backtracking; infeasible trial points
    count as +inf and are rejected. Returns (x, f(x), iterations, ok).
    """
    fs = _safe(f)
    x = np.array(x0, dtype=float)
    fx = f(x)
    try:
        g = central_gradient(f, x, config.grad_step)
    except InfeasiblePoint:
        return x, fx, 0, False

    n = x.size
    H = np.eye(n)
    fresh = True
    stalls = 0
    k = 0
    ok = False
    while k < config.max_iters:
        if np.max(np.abs(g)) <= config.grad_tol:
            ok = True
            break
        p = -H @ g
        slope = float(g @ p)
        if slope >= 0:
            H, fresh = np.eye(n), True
            p, slope = -g, -float(g @ g)

        alpha = min(1.0, MAX_STEP / max(np.max(np.abs(p)), 1e-300))
        f_new = math.inf
        while alpha > MIN_ALPHA:
            f_new = fs(x + alpha * p)
            if f_new <= fx + config.armijo * alpha * slope:
                break
            alpha *= config.line_search_shrink
        else:
            if not fresh:
                H, fresh = np.eye(n), True
                continue
            # stalled: success only at the finite-difference noise floor
            ok = bool(np.max(np.abs(g)) <= NOISE_FLOOR * config.grad_tol)
            break

        x_new = x + alpha * p
        try:
            g_new = central_gradient(f, x_new, config.grad_step)
        except InfeasiblePoint:
            x, fx = x_new, f_new
            break
        k += 1
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if fresh:
                H = np.eye(n) * (sy / float(y @ y))
                fresh = False
            rho = 1.0 / sy
            A = np.eye(n) - rho * np.outer(s, y)
            H = A @ H @ A.T + rho * np.outer(s, s)

        decrease = fx - f_new
        x, fx, g = x_new, f_new, g_new
        if trace is not None:
            trace.append(fx)
        logger.debug(f"bfgs iter {k}: f={fx:.12g} |g|={np.max(np.abs(g)):.3e}")

        if decrease <= config.energy_tol * max(1.0, abs(fx)):
            stalls += 1
            if stalls >= 3:
                ok = True
                break
        else:
            stalls = 0
    return x, fx, k, ok


# ==================== Initialization ====================
def rescale_to_density(problem, ansatz, passes=3, window=0.2):
    """Rescale R blocks until every density is within `window` of its target"""
    ev = None
    for _ in range(passes + 1):
        ev = problem.evaluate(problem.encode(ansatz))
        ratios = [n / t for n, t in zip(ev.densities, problem.targets)]
        if all(abs(r - 1.0) <= window for r in ratios):
            break
        factors = [math.sqrt(1.0 / max(r, 1e-12)) for r in ratios]
        ansatz = problem.rescale(ansatz, factors)
    return ansatz, ev


def random_parameters(problem, rng, scale) -> np.ndarray:
    """Random feasible starting vector with densities near their targets"""
    for attempt in range(INIT_ATTEMPTS):
        try:
            ansatz, _ = rescale_to_density(problem, problem.random_ansatz(rng, scale))
            return problem.encode(ansatz)
        except InfeasiblePoint as e:
            logger.debug(f"initial draw {attempt} rejected: {e}")
    raise InfeasiblePoint(f"no feasible initial point in {INIT_ATTEMPTS} draws")


# ==================== Minimization ====================
def _run(problem, x0, config, restart_index):
    penalty = PenaltyState.initial(len(problem.targets), config.penalty_init)
    x = x0
    iterations = 0
    traces = []
    converged = False
    prev_violation = math.inf
    ev = problem.evaluate(x)

    for outer in range(config.max_outer):
        trace = []

        def f(y, penalty=penalty):
            return augmented_value(problem.evaluate(y), problem.targets, penalty)

        x, _, iters, inner_ok = bfgs(f, x, config, trace)
        iterations += iters
        traces.append(trace)
        ev = problem.evaluate(x)
        residuals = [n - t for n, t in zip(ev.densities, problem.targets)]
        violation = max(abs(r) for r in residuals)
        logger.debug(f"restart {restart_index} outer {outer}: e={ev.energy:.12g} violation={violation:.3e}")
        if violation <= config.constraint_tol and inner_ok:
            converged = True
            break
        mu = tuple(m + 2.0 * penalty.sigma * r for m, r in zip(penalty.mu, residuals))
        sigma = penalty.sigma * config.penalty_growth if violation > 0.25 * prev_violation else penalty.sigma
        penalty = PenaltyState(mu=mu, sigma=sigma)
        prev_violation = violation

    return _result(problem, x, ev, converged, restart_index, iterations, traces)


def _result(problem, x, ev, converged, restart_index, iterations=0, traces=None):
    residuals = tuple(n - t for n, t in zip(ev.densities, problem.targets))
    return OptimResult(
        ansatz=unpack(x, problem.layout), energy=ev.energy, densities=tuple(ev.densities),
        constraint_residuals=residuals, iterations=iterations, converged=converged and ev.gap > 1e-6,
        gap=ev.gap, layout=problem.layout, observables=ev.observables, objective_trace=traces or [],
        restart_index=restart_index,
    )


def _better(a, b):
    """True if result a beats result b"""
    if b is None:
        return True
    if a.converged != b.converged:
        return a.converged
    return a.energy < b.energy


def minimize(initial, params, config, layout=None, tol=None, strict=False) -> OptimResult:
    """
    Best-of-restarts density-constrained minimization. `initial` is None, a
    ParamVector or a list of them; restart i starts from initial[i] and the
    remaining restarts from random draws. Restart seeds are spawned from config.seed.
    """
    if isinstance(initial, ParamVector):
        initial = [initial]
    starts = list(initial or ())
    if starts:
        layout = starts[0].layout
        if any(s.layout != layout for s in starts):
            raise LayoutMismatch("initial vectors must share one layout")
    if layout is None:
        raise LayoutMismatch("minimize needs an initial vector or a layout")
    problem = make_problem(params, layout, tol)

    best = None
    restarts = max(config.restarts, len(starts))
    children = np.random.SeedSequence(config.seed).spawn(restarts)
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        try:
            if i < len(starts):
                x0 = np.array(starts[i].values, dtype=float)
            else:
                x0 = random_parameters(problem, rng, config.init_scale)
            result = _run(problem, x0, config, i)
        except InfeasiblePoint as e:
            logger.warning(f"restart {i} infeasible: {e}")
            continue
        logger.debug(f"restart {i}: e={result.energy:.12g} converged={result.converged}")
        if _better(result, best):
            best = result

    if best is None:
        raise AllRestartsInfeasible(f"all {restarts} restarts infeasible")
    if not best.converged:
        logger.warning(f"best restart did not converge: residuals={best.constraint_residuals}")
        if strict:
            raise NotConverged(best)
    return best


def _random_pairs(D, P, z_scale, rng):
    Z = []
    for _ in range(P):
        pair = []
        for _ in range(2):
            a = rng.uniform(-z_scale, z_scale, (D, D)) + 1j * rng.uniform(-z_scale, z_scale, (D, D))
            pair.append(0.5 * (a + a.conj().T))
        Z.append(tuple(pair))
    return Z


def warm_start_coupled(single1, single2, P, z_scale=None, seed=0) -> ParamVector:
    """
    Coupled starting vector from two converged single-field results: K1, K2,
    R1, R2 from the singles and zero-mean uniform Z blocks of magnitude z_scale.
    """
    if not (single1.converged and single2.converged):
        raise ValueError("warm start needs two converged single-field results")
    if single1.ansatz.D != single2.ansatz.D:
        raise ValueError("warm start needs equal bond dimensions")
    z_scale = Config.WARM_START_Z_SCALE if z_scale is None else z_scale
    D = single1.ansatz.D
    Z = _random_pairs(D, P, z_scale, np.random.default_rng(seed))
    ansatz = gauge_fix_coupled(from_singles(single1.ansatz, single2.ansatz, Z))
    return pack(ansatz, ParamLayout('coupled', D, P))


def embed_pairs(vector, P, z_scale=0.0, seed=0) -> ParamVector:
    """
    P = 0 coupled vector extended by P Z pairs. With z_scale = 0 the pairs
    vanish and the embedded state is identical to the original.
    """
    layout = vector.layout
    if layout.kind != 'coupled' or layout.P != 0:
        raise LayoutMismatch(f"pair embedding needs a P=0 coupled vector, got {layout}")
    D = layout.D
    extra = [hermitian_to_reals(z) for pair in _random_pairs(D, P, z_scale, np.random.default_rng(seed))
             for z in pair]
    values = np.concatenate([np.asarray(vector.values, dtype=float)] + extra)
    return ParamVector(values=values, layout=ParamLayout('coupled', D, P))


def refine_pairs(plain, params, config, P, z_scale=None, seed=0, tol=None) -> OptimResult:
    """
    P-pair optimization seeded from a converged P = 0 coupled optimum.

    Restart 0 starts from the optimum with vanishing Z, restart 1 from small
    random Z pairs. The embedded optimum is returned when no restart beats it,
    so the energy never exceeds plain.energy.
    """
    if not plain.converged or plain.layout.kind != 'coupled' or plain.layout.P != 0:
        raise ValueError("pair refinement needs a converged P=0 coupled result")
    z_scale = Config.WARM_START_Z_SCALE if z_scale is None else z_scale
    nested = embed_pairs(plain.params(), P)
    seeded = embed_pairs(plain.params(), P, z_scale, seed)
    best = minimize([nested, seeded], params, config, tol=tol)

    problem = make_problem(params, nested.layout, tol)
    x = np.array(nested.values, dtype=float)
    baseline = _result(problem, x, problem.evaluate(x), True, -1)
    if _better(best, baseline):
        return best
    logger.info(f"P={P} restarts stayed above the P=0 optimum; keeping the embedded state")
    return baseline


def with_restarts(config, restarts):
    return replace(config, restarts=restarts)


def sweep_warm_start(result, layout):
    """Parameters of a neighbouring sweep point, or None when it cannot seed `layout`"""
    if result is None or result.layout != layout:
        return None
    return result.params()
