# -*- coding: utf-8 -*-
"""
Bethe Oracle
Exact Lieb-Liniger ground-state energy from the integral equation

    g(x) - 1/(2 pi) int_{-1}^{1} 2 lam / (lam^2 + (x - y)^2) g(y) dy = 1/(2 pi)

with gamma = lam / int g and e(gamma) = (gamma/lam)^3 int x^2 g.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from config import Config
from core.exceptions import BetheNoConvergence
from core.luttinger import density_grid, luttinger_single, surface_from_function

logger = logging.getLogger(__name__)

TONKS_ENERGY = math.pi ** 2 / 3
MIN_NODES = 64
MAX_BRACKET_STEPS = 80


@dataclass(frozen=True)
class BetheSolution:
    """e(gamma) such that e0 = e(gamma) rho^3 in units hbar = 2M = 1"""
    gamma: float
    e_dimensionless: float
    quad_nodes: int
    residual: float
    lam: float
    moments: dict = field(default_factory=dict)


@lru_cache(maxsize=16)
def _quadrature(n):
    return np.polynomial.legendre.leggauss(n)


@lru_cache(maxsize=4096)
def _moments(lam, n):
    """(int g, int x^2 g) of the Nystrom solution at Fermi rapidity lam"""
    x, w = _quadrature(n)
    diff = x[:, None] - x[None, :]
    kernel = (lam / math.pi) / (lam * lam + diff * diff)
    A = np.eye(n) - kernel * w[None, :]
    try:
        g = scipy.linalg.solve(A, np.full(n, 1.0 / (2.0 * math.pi)))
    except (np.linalg.LinAlgError, ValueError) as e:
        raise BetheNoConvergence(f"Nystrom system singular at lam={lam:.6g}: {e}") from e
    return float(w @ g), float(w @ (x * x * g))


def _gamma_of(lam, n):
    norm, _ = _moments(lam, n)
    return lam / norm


def _energy_of(lam, n):
    norm, x2 = _moments(lam, n)
    return (1.0 / norm) ** 3 * x2


def _solve_lam(gamma, n):
    """lam with gamma(lam) = gamma by Brent search inside an expanding bracket"""
    guess = max(math.sqrt(gamma) / 2.0, gamma / math.pi)

    def f(lam):
        return _gamma_of(lam, n) - gamma

    lo, hi = guess / 2.0, guess * 2.0
    steps = 0
    while f(lo) > 0:
        lo /= 2.0
        steps += 1
        if steps > MAX_BRACKET_STEPS:
            raise BetheNoConvergence(f"no lower bracket for gamma={gamma}")
    while f(hi) < 0:
        hi *= 2.0
        steps += 1
        if steps > MAX_BRACKET_STEPS:
            raise BetheNoConvergence(f"no upper bracket for gamma={gamma}")
    try:
        return brentq(f, lo, hi, xtol=1e-15, rtol=4e-15, maxiter=300)
    except (RuntimeError, ValueError) as e:
        raise BetheNoConvergence(f"root search failed for gamma={gamma}: {e}") from e


@lru_cache(maxsize=1024)
def _solve(gamma, n):
    lam = _solve_lam(gamma, n)
    norm, x2 = _moments(lam, n)
    return lam, _energy_of(lam, n), norm, x2


def solve_bethe(gamma, n_nodes=None, tol=None) -> BetheSolution:
    """e(gamma) with discretization residual |e(n) - e(2n)|"""
    n = Config.BETHE_NODES if n_nodes is None else int(n_nodes)
    tol = Config.BETHE_TOL if tol is None else tol
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    if n < MIN_NODES:
        raise ValueError(f"n_nodes must be >= {MIN_NODES}, got {n}")

    gamma = float(gamma)
    lam, e, norm, x2 = _solve(gamma, n)
    _, e_fine, _, _ = _solve(gamma, 2 * n)
    residual = abs(e - e_fine)
    logger.debug(f"bethe gamma={gamma:.6g}: lam={lam:.12g} e={e:.15g} residual={residual:.3e}")
    if not math.isfinite(e) or residual > tol:
        raise BetheNoConvergence(f"gamma={gamma}: residual {residual:.3e} above tolerance {tol:.3e} "
                                 f"with {n} nodes")
    return BetheSolution(gamma=gamma, e_dimensionless=e, quad_nodes=n, residual=residual, lam=lam,
                         moments={'norm': norm, 'x2': x2})


def energy_density_exact(rho, params, n_nodes=None) -> float:
    """e0(rho) = e(gamma(rho)) rho^3 / (2M), gamma(rho) = 2Mc/rho"""
    if not rho > 0:
        raise ValueError(f"rho must be > 0, got {rho}")
    if params.c == 0:
        return 0.0
    gamma = 2.0 * params.M * params.c / rho
    return solve_bethe(gamma, n_nodes).e_dimensionless * rho ** 3 / (2.0 * params.M)


def weak_coupling_energy(gamma) -> float:
    """gamma - 4 gamma^(3/2) / (3 pi)"""
    return gamma - 4.0 * gamma ** 1.5 / (3.0 * math.pi)


def luttinger_exact(params, n_nodes=None, nodes=None, span=None, bc=None):
    """v and K from the oracle surface through the same spline pipeline as the cMPS sweeps"""
    grid = density_grid(params.rho0, nodes, span)
    surface = surface_from_function(lambda r: energy_density_exact(r, params, n_nodes), grid, bc)
    return luttinger_single(surface, params.rho0, params.M)
