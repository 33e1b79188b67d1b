# -*- coding: utf-8 -*-
"""
Single-field cMPS
Gauge-fixed ansatz, transfer operator, steady state and the local
observables entering the Lieb-Liniger energy functional (L -> infinity).
"""

import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from config import Config
from core.exceptions import DegenerateNullSpace, NonPositiveSteadyState
from core.kernel import (
    adjoint, as_cmatrix, commutator, hermitize, kron, null_threshold,
    select_null, spectrum, trace_product, unvec, vec,
)

logger = logging.getLogger(__name__)


# ========================= Types =========================
@dataclass(frozen=True)
class ModelParams:
    """Lieb-Liniger couplings: mass M, contact repulsion c, target density rho0"""
    M: float
    c: float
    rho0: float

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"M must be > 0, got {self.M}")
        if not self.c >= 0:
            raise ValueError(f"c must be >= 0, got {self.c}")
        if not self.rho0 > 0:
            raise ValueError(f"rho0 must be > 0, got {self.rho0}")

    @property
    def gamma(self) -> float:
        """Dimensionless coupling 2Mc/rho0 (= c/rho0 at M = 1/2)"""
        return 2.0 * self.M * self.c / self.rho0

    @classmethod
    def from_gamma(cls, gamma, rho0=1.0, M=0.5):
        return cls(M=M, c=gamma * rho0 / (2.0 * M), rho0=rho0)

    def with_density(self, rho):
        return replace(self, rho0=rho)


@dataclass(frozen=True)
class CmpsAnsatz:
    """Single-field ansatz: Hermitian ancilla Hamiltonian K and jump matrix R"""
    K: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        K = as_cmatrix(self.K)
        R = as_cmatrix(self.R)
        if K.shape != R.shape or K.shape[0] != K.shape[1]:
            raise ValueError(f"K and R must be square and equal-shaped, got {K.shape}, {R.shape}")
        scale = max(1.0, float(np.linalg.norm(K)))
        if np.linalg.norm(K - K.conj().T) > 1e-12 * scale:
            raise ValueError("K must be Hermitian")
        object.__setattr__(self, 'K', K)
        object.__setattr__(self, 'R', R)

    @property
    def D(self) -> int:
        return self.K.shape[0]


@dataclass(frozen=True)
class SteadyState:
    """Right fixed point of the transfer Lindbladian"""
    rho: np.ndarray
    residual: float
    gap: float
    eigenvalue: complex = 0.0

    @property
    def correlation_length(self) -> float:
        return math.inf if self.gap <= 0 or math.isinf(self.gap) else 1.0 / self.gap


@dataclass(frozen=True)
class LocalObservables:
    density: float
    kinetic: float
    pair: float
    energy: float
    gap: float
    residual: float


# ==================== Ansatz construction ====================
def random_ansatz(D, rng, scale=0.5) -> CmpsAnsatz:
    """K and R entries uniform in [-scale, scale], complex parts drawn independently"""
    a = rng.uniform(-scale, scale, size=(D, D)) + 1j * rng.uniform(-scale, scale, size=(D, D))
    K = hermitize(a)
    R = rng.uniform(-scale, scale, size=(D, D)) + 1j * rng.uniform(-scale, scale, size=(D, D))
    return CmpsAnsatz(K=K, R=R)


def coherent_ansatz(rho0, kappa=0.0) -> CmpsAnsatz:
    """D = 1 mean-field state R = [[sqrt(rho0)]]"""
    return CmpsAnsatz(K=np.array([[kappa]]), R=np.array([[math.sqrt(rho0)]]))


def gauge_transform(ansatz, g) -> CmpsAnsatz:
    """(g K g^dagger, g R g^dagger) for unitary g"""
    g = as_cmatrix(g)
    gd = adjoint(g)
    return CmpsAnsatz(K=hermitize(g @ ansatz.K @ gd), R=g @ ansatz.R @ gd)


# ==================== Transfer operator ====================
def build_Q(ansatz) -> np.ndarray:
    """Q = -iK - R^dagger R / 2"""
    return -1j * ansatz.K - 0.5 * (adjoint(ansatz.R) @ ansatz.R)


def gauge_residual(ansatz) -> float:
    """||Q + Q^dagger + R^dagger R||"""
    Q = build_Q(ansatz)
    return float(np.linalg.norm(Q + adjoint(Q) + adjoint(ansatz.R) @ ansatz.R))


def lindblad_transfer(Q, jumps) -> np.ndarray:
    """T = Q (x) 1 + 1 (x) Q* + sum_a R_a (x) R_a*"""
    eye = np.eye(Q.shape[0], dtype=np.complex128)
    T = kron(Q, eye) + kron(eye, Q.conj())
    for R in jumps:
        T = T + kron(R, R.conj())
    return T


def build_transfer(ansatz) -> np.ndarray:
    return lindblad_transfer(build_Q(ansatz), [ansatz.R])


def solve_steady_state(T, dim, tol=None) -> SteadyState:
    """
    Unit-trace Hermitian PSD null vector of a transfer operator, mapped back
    to a density matrix through |a>|b> -> |a><b*|.
    """
    tol = Config.NULL_TOL if tol is None else tol
    values, vr = spectrum(T)
    threshold = null_threshold(T, tol)
    null = select_null(values, vr, threshold)

    rest = np.delete(values, int(np.argmin(np.abs(values))))
    gap = math.inf if len(rest) == 0 else float(-np.max(rest.real))
    if gap < threshold:
        raise DegenerateNullSpace(2, threshold)

    rho = unvec(null.right_vector[:, 0], dim)
    tr = np.trace(rho)
    if abs(tr) < 1e-14:
        raise NonPositiveSteadyState("steady state has vanishing trace")
    rho = hermitize(rho / tr)

    lowest = float(np.linalg.eigvalsh(rho)[0])
    if lowest < Config.STEADY_STATE_NEG_TOL:
        raise NonPositiveSteadyState(f"steady state eigenvalue {lowest:.3e} below {Config.STEADY_STATE_NEG_TOL}")

    residual = float(np.linalg.norm(T @ vec(rho)))
    return SteadyState(rho=rho, residual=residual, gap=gap, eigenvalue=null.value)


def steady_state(ansatz, tol=None) -> SteadyState:
    return solve_steady_state(build_transfer(ansatz), ansatz.D, tol)


# ==================== Local observables ====================
def clip_observable(value, imag, name) -> float:
    """Take the real part; clip noise in [-1e-9, 0), reject anything below"""
    if abs(imag) > 1e-10 * max(1.0, abs(value)):
        logger.debug(f"{name}: imaginary residue {imag:.3e}")
    if value < Config.OBSERVABLE_NEG_TOL:
        raise NonPositiveSteadyState(f"{name} = {value:.3e} is negative")
    return max(value, 0.0)


def expectation(op, ss, name) -> float:
    """Re tr(op rho*), clipped at numerical noise"""
    value, imag = trace_product(op, ss.rho)
    return clip_observable(value, imag, name)


def density(ansatz, ss) -> float:
    """<psi^dagger psi> = tr(R^dagger R rho)"""
    R = ansatz.R
    return expectation(adjoint(R) @ R, ss, "density")


def kinetic_density(ansatz, ss) -> float:
    """<d psi^dagger d psi> = tr([Q,R]^dagger [Q,R] rho)"""
    C = commutator(build_Q(ansatz), ansatz.R)
    return expectation(adjoint(C) @ C, ss, "kinetic_density")


def pair_density(ansatz, ss) -> float:
    """<psi^dagger psi^dagger psi psi> = tr((R^dagger)^2 R^2 rho)"""
    R2 = ansatz.R @ ansatz.R
    return expectation(adjoint(R2) @ R2, ss, "pair_density")


def local_observables(ansatz, params, tol=None) -> LocalObservables:
    """All local observables and the energy density from a single steady-state solve"""
    ss = steady_state(ansatz, tol)
    n = density(ansatz, ss)
    kin = kinetic_density(ansatz, ss)
    pair = pair_density(ansatz, ss)
    e = kin / (2.0 * params.M) + params.c * pair
    return LocalObservables(density=n, kinetic=kin, pair=pair, energy=e, gap=ss.gap, residual=ss.residual)


def energy_density(ansatz, params, tol=None) -> float:
    """e = kinetic/(2M) + c * pair on the steady state"""
    return local_observables(ansatz, params, tol).energy
