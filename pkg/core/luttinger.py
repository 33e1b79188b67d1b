# -*- coding: utf-8 -*-
"""
Luttinger Extractor
Energy-density surfaces e0(rho) and e0(rho1, rho2) from warm-started
optimization sweeps, spline interpolation and the second-derivative
relations for the Luttinger velocity v and parameter K.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from config import Config
from core.exceptions import (
    AllRestartsInfeasible, NegativeCompressibility, OutOfHull, SurfaceError,
    SweepPointFailed, UnequalFilling,
)
from core.param_layout import ParamLayout
from core.variational import minimize, sweep_warm_start, with_restarts

logger = logging.getLogger(__name__)

CHANNELS = ('single', 'plus', 'minus')
RHO_REF_POLICIES = ('total', 'species', 'normal')
SPLINE_BCS = ('not-a-knot', 'natural')
HULL_ATOL = 1e-12


# ========================= Types =========================
@dataclass(frozen=True)
class SurfaceSample:
    point: Tuple[float, ...]
    energy: float
    converged: bool = True
    gap: float = math.inf


@dataclass(frozen=True)
class EnergySurface:
    """Sampled energy densities plus their interpolating spline"""
    dims: int
    samples: Tuple[SurfaceSample, ...]
    axes: Tuple[np.ndarray, ...]
    interpolant: object
    bc: str = Config.SPLINE_BC

    @classmethod
    def from_samples(cls, samples, dims=1, bc=None):
        bc = bc or Config.SPLINE_BC
        if bc not in SPLINE_BCS:
            raise SurfaceError(f"unknown spline boundary condition {bc!r}")
        samples = tuple(samples)
        failed = [s.point for s in samples if not s.converged]
        if failed:
            raise SurfaceError(f"surface contains unconverged samples at {failed}")

        if dims == 1:
            pts = sorted(samples, key=lambda s: s.point[0])
            x = np.array([s.point[0] for s in pts])
            if len(x) < 3 or np.any(np.diff(x) <= 0):
                raise SurfaceError("1-D surface needs at least 3 distinct densities")
            e = np.array([s.energy for s in pts])
            return cls(dims=1, samples=tuple(pts), axes=(x,), interpolant=CubicSpline(x, e, bc_type=bc), bc=bc)

        if dims != 2:
            raise SurfaceError(f"surfaces are 1-D or 2-D, got dims={dims}")
        x = np.unique([s.point[0] for s in samples])
        y = np.unique([s.point[1] for s in samples])
        if len(x) < 4 or len(y) < 4:
            raise SurfaceError("2-D surface needs at least 4 nodes per axis")
        E = np.full((len(x), len(y)), np.nan)
        for s in samples:
            E[np.searchsorted(x, s.point[0]), np.searchsorted(y, s.point[1])] = s.energy
        if np.any(np.isnan(E)):
            raise SurfaceError("2-D samples do not fill a tensor-product grid")
        spline = RectBivariateSpline(x, y, E, kx=3, ky=3, s=0)
        return cls(dims=2, samples=tuple(samples), axes=(x, y), interpolant=spline, bc=bc)

    def __call__(self, *point) -> float:
        if self.dims == 1:
            return float(self.interpolant(point[0]))
        return float(self.interpolant.ev(point[0], point[1]))

    def node_residual(self) -> float:
        """Largest |spline - sample| at the nodes"""
        return max(abs(self(*s.point) - s.energy) for s in self.samples)

    def decimated(self, start):
        """Surface rebuilt from every other node per axis, beginning at `start`"""
        keep = [set(a[start::2].tolist()) for a in self.axes]
        samples = [s for s in self.samples
                   if all(p in k for p, k in zip(s.point, keep))]
        return EnergySurface.from_samples(samples, self.dims, self.bc)

    def shifted(self, offset):
        return EnergySurface.from_samples(
            [SurfaceSample(s.point, s.energy + offset, s.converged, s.gap) for s in self.samples],
            self.dims, self.bc)


@dataclass(frozen=True)
class LuttingerResult:
    v: float
    K: float
    channel: str
    second_derivative: float
    rho_ref: float
    rho_ref_policy: Optional[str] = None
    uncertainty: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            'channel': self.channel, 'v': self.v, 'K': self.K,
            'second_derivative': self.second_derivative, 'rho_ref': self.rho_ref,
            'rho_ref_policy': self.rho_ref_policy,
            'v_uncertainty': self.uncertainty.get('v'), 'K_uncertainty': self.uncertainty.get('K'),
        }


# ==================== Grids ====================
def density_grid(rho0, nodes=None, span=None) -> np.ndarray:
    """`nodes` densities evenly spaced over rho0 * [1 - span, 1 + span]"""
    nodes = Config.SURFACE_NODES if nodes is None else nodes
    span = Config.SURFACE_MIN_SPAN if span is None else span
    if rho0 <= 0 or not 0 < span < 1 or nodes < 2:
        raise ValueError(f"invalid density grid rho0={rho0}, nodes={nodes}, span={span}")
    return np.linspace(rho0 * (1 - span), rho0 * (1 + span), nodes)


def validate_surface(surface, center):
    """Sampling requirements around the target density point"""
    for axis, c in zip(surface.axes, center):
        if len(axis) < Config.SURFACE_MIN_NODES:
            raise SurfaceError(f"{len(axis)} nodes per axis, need {Config.SURFACE_MIN_NODES}")
        lo = c * (1 - Config.SURFACE_MIN_SPAN) * (1 + 1e-9)
        hi = c * (1 + Config.SURFACE_MIN_SPAN) * (1 - 1e-9)
        if axis[0] > lo or axis[-1] < hi:
            raise SurfaceError(f"nodes [{axis[0]:.6g}, {axis[-1]:.6g}] do not span +/-"
                               f"{Config.SURFACE_MIN_SPAN:.0%} around {c:.6g}")


def surface_from_function(f, grid, bc=None) -> EnergySurface:
    """Surface sampled from an analytic or oracle energy function"""
    if isinstance(grid, tuple):
        xs, ys = grid
        samples = [SurfaceSample((float(a), float(b)), float(f(a, b))) for a in xs for b in ys]
        return EnergySurface.from_samples(samples, 2, bc)
    return EnergySurface.from_samples([SurfaceSample((float(a),), float(f(a))) for a in grid], 1, bc)


# ==================== Sweeps ====================
def _center_out(n, center):
    """Indices ordered outward from `center`, each with the neighbour it warm-starts from"""
    order = [(center, None)]
    for k in range(1, n):
        if center + k < n:
            order.append((center + k, center + k - 1))
        if center - k >= 0:
            order.append((center - k, center - k + 1))
    return order


def _solve_point(params, initial, config, layout):
    """Warm start first; the full restart set only if the warm start does not converge"""
    if initial is None:
        return minimize(None, params, config, layout=layout)
    result = minimize(initial, params, with_restarts(config, 1))
    if result.converged:
        return result
    logger.info("warm start did not converge; retrying with random restarts")
    retry = minimize(initial, params, config)
    return retry if retry.converged or retry.energy < result.energy else result


def sweep_single(params, densities, config, D, initial=None, known=None, on_point=None, gauge=False, bc=None):
    """
    Single-field surface e0(rho). Points are solved outward from the density
    closest to params.rho0, each warm-started from its already solved neighbour.
    `known` maps node index to an earlier OptimResult; `on_point(index, rho, result)`
    sees every newly solved point.
    """
    densities = np.asarray(densities, dtype=float)
    if np.any(densities <= 0) or np.any(np.diff(densities) <= 0):
        raise ValueError("densities must be positive and strictly increasing")
    layout = ParamLayout('single-gauge' if gauge else 'single', D)
    known = dict(known or {})
    results = {}
    failed = []
    center = int(np.argmin(np.abs(densities - params.rho0)))

    for i, neighbour in _center_out(len(densities), center):
        rho = float(densities[i])
        if i in known:
            results[i] = known[i]
            continue
        start = initial if neighbour is None else sweep_warm_start(results.get(neighbour), layout)
        try:
            result = _solve_point(params.with_density(rho), start, config, layout)
        except AllRestartsInfeasible as e:
            logger.error(f"sweep point rho={rho:.6g} infeasible: {e}")
            failed.append(rho)
            continue
        logger.info(f"sweep rho={rho:.6g}: e={result.energy:.12g} converged={result.converged}")
        results[i] = result
        if on_point is not None:
            on_point(i, (rho,), result)

    samples = []
    for i, rho in enumerate(densities):
        r = results.get(i)
        if r is None:
            continue
        if not r.converged and float(rho) not in failed:
            failed.append(float(rho))
        samples.append(SurfaceSample((float(rho),), r.energy, r.converged, r.gap))
    if failed:
        raise SweepPointFailed(sorted(failed))
    return EnergySurface.from_samples(samples, 1, bc)


def _ring_order(shape, center):
    """Grid indices by Manhattan distance from `center`, each with its inward neighbour"""
    ci, cj = center
    cells = sorted(((i, j) for i in range(shape[0]) for j in range(shape[1])),
                   key=lambda ij: (abs(ij[0] - ci) + abs(ij[1] - cj), ij))
    order = []
    for i, j in cells:
        if (i, j) == (ci, cj):
            order.append(((i, j), None))
        elif i != ci:
            order.append(((i, j), (i - int(np.sign(i - ci)), j)))
        else:
            order.append(((i, j), (i, j - int(np.sign(j - cj)))))
    return order


def sweep_coupled(params, grid, config, D, P, initial=None, known=None, on_point=None, bc=None):
    """Coupled surface e0(rho1, rho2) on a tensor grid, warm-started from inward neighbours"""
    xs, ys = (np.asarray(a, dtype=float) for a in grid)
    for a in (xs, ys):
        if np.any(a <= 0) or np.any(np.diff(a) <= 0):
            raise ValueError("grid densities must be positive and strictly increasing")
    layout = ParamLayout('coupled', D, P)
    known = dict(known or {})
    results = {}
    failed = []
    center = (int(np.argmin(np.abs(xs - params.rho01))), int(np.argmin(np.abs(ys - params.rho02))))

    for (i, j), neighbour in _ring_order((len(xs), len(ys)), center):
        point = (float(xs[i]), float(ys[j]))
        if (i, j) in known:
            results[(i, j)] = known[(i, j)]
            continue
        start = initial if neighbour is None else sweep_warm_start(results.get(neighbour), layout)
        try:
            result = _solve_point(params.with_densities(*point), start, config, layout)
        except AllRestartsInfeasible as e:
            logger.error(f"sweep point {point} infeasible: {e}")
            failed.append(point)
            continue
        logger.info(f"sweep rho={point}: e={result.energy:.12g} converged={result.converged}")
        results[(i, j)] = result
        if on_point is not None:
            on_point((i, j), point, result)

    samples = []
    for (i, j), r in sorted(results.items()):
        point = (float(xs[i]), float(ys[j]))
        if not r.converged:
            failed.append(point)
        samples.append(SurfaceSample(point, r.energy, r.converged, r.gap))
    if failed:
        raise SweepPointFailed(sorted(failed))
    return EnergySurface.from_samples(samples, 2, bc)


# ==================== Derivatives ====================
def _check_hull(surface, at):
    for axis, p in zip(surface.axes, at):
        if not axis[0] - HULL_ATOL <= p <= axis[-1] + HULL_ATOL:
            raise OutOfHull(f"{p:.6g} outside sampled range [{axis[0]:.6g}, {axis[-1]:.6g}]")


def second_derivative(surface, at, direction=None) -> float:
    """
    Analytic second derivative of the spline. 1-D surfaces ignore `direction`;
    2-D surfaces take 'x', 'y', or the normal modes 'plus' / 'minus' along
    (1, +-1)/sqrt(2).
    """
    at = (at,) if np.isscalar(at) else tuple(at)
    if len(at) != surface.dims:
        raise SurfaceError(f"point {at} does not match a {surface.dims}-D surface")
    _check_hull(surface, at)
    if surface.dims == 1:
        return float(surface.interpolant(at[0], 2))

    s = surface.interpolant
    fxx = float(s.ev(at[0], at[1], dx=2))
    fyy = float(s.ev(at[0], at[1], dy=2))
    if direction == 'x':
        return fxx
    if direction == 'y':
        return fyy
    fxy = float(s.ev(at[0], at[1], dx=1, dy=1))
    if direction == 'plus':
        return 0.5 * (fxx + 2 * fxy + fyy)
    if direction == 'minus':
        return 0.5 * (fxx - 2 * fxy + fyy)
    raise ValueError(f"unknown direction {direction!r}")


# ==================== Luttinger parameters ====================
def _single_from_d2(d2, rho0, M):
    if d2 <= 0:
        raise NegativeCompressibility(f"e0'' = {d2:.6g} <= 0 at rho = {rho0:.6g}")
    return math.sqrt(rho0 / M * d2), math.sqrt(math.pi ** 2 * rho0 / M / d2)


def luttinger_single(surface, rho0, M, uncertainty=True, strict=True) -> LuttingerResult:
    """v = sqrt(rho0/M e0''), K = sqrt(pi^2 rho0/M / e0'')"""
    if strict:
        validate_surface(surface, (rho0,))
    d2 = second_derivative(surface, rho0)
    v, K = _single_from_d2(d2, rho0, M)
    spread = extraction_uncertainty(surface, lambda s: luttinger_single(s, rho0, M, False, False), v, K) \
        if uncertainty else {}
    return LuttingerResult(v=v, K=K, channel='single', second_derivative=d2, rho_ref=rho0, uncertainty=spread)


def reference_density(rho01, rho02, policy) -> float:
    if policy == 'total':
        return rho01 + rho02
    if policy == 'species':
        return rho01
    if policy == 'normal':
        return (rho01 + rho02) / math.sqrt(2.0)
    raise ValueError(f"unknown rho_ref policy {policy!r}")


def luttinger_coupled(surface, rho01, rho02, M, channel, rho_ref_policy=None,
                      uncertainty=True, strict=True) -> LuttingerResult:
    """
    Normal-mode parameters: v^2 = (2 rho_ref/M) e0'', K^2 = (pi^2 rho_ref/2M) / e0''
    with e0'' along (1, +-1)/sqrt(2).
    """
    policy = rho_ref_policy or Config.RHO_REF_POLICY
    if channel not in ('plus', 'minus'):
        raise ValueError(f"coupled channel must be 'plus' or 'minus', got {channel!r}")
    if abs(rho01 - rho02) > 1e-12 * max(rho01, rho02):
        raise UnequalFilling(f"normal-mode extraction needs rho01 == rho02, got {rho01}, {rho02}")
    if surface.dims != 2:
        raise SurfaceError("coupled extraction needs a 2-D surface")
    if strict:
        validate_surface(surface, (rho01, rho02))

    d2 = second_derivative(surface, (rho01, rho02), channel)
    if d2 <= 0:
        raise NegativeCompressibility(f"{channel} channel e0'' = {d2:.6g} <= 0")
    rho_ref = reference_density(rho01, rho02, policy)
    v = math.sqrt(2.0 * rho_ref / M * d2)
    K = math.sqrt(math.pi ** 2 * rho_ref / (2.0 * M) / d2)

    def again(s):
        return luttinger_coupled(s, rho01, rho02, M, channel, policy, False, False)

    spread = extraction_uncertainty(surface, again, v, K) if uncertainty else {}
    return LuttingerResult(v=v, K=K, channel=channel, second_derivative=d2, rho_ref=rho_ref,
                           rho_ref_policy=policy, uncertainty=spread)


def extraction_uncertainty(surface, extract, v, K) -> dict:
    """Largest deviation of v and K re-extracted from the two node-decimated surfaces"""
    dv, dK = 0.0, 0.0
    for start in (0, 1):
        try:
            r = extract(surface.decimated(start))
        except (SurfaceError, OutOfHull, NegativeCompressibility, ValueError) as e:
            logger.debug(f"decimated extraction {start} failed: {e}")
            return {'v': math.nan, 'K': math.nan}
        dv = max(dv, abs(r.v - v))
        dK = max(dK, abs(r.K - K))
    return {'v': dv, 'K': dK}
