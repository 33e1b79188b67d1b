# -*- coding: utf-8 -*-
"""
Coupled-field cMPS
Two bosonic species on the product ancilla space: K~ = K1(x)1 + 1(x)K2 + sum_p Z1(p)(x)Z2(p),
R~1 = R1(x)1, R~2 = 1(x)R2, and the density-density coupled Lieb-Liniger functional.
"""

import logging
from dataclasses import dataclass, replace
from typing import Tuple

import numpy as np

from core.cmps_single import (
    ModelParams, SteadyState, expectation, lindblad_transfer, solve_steady_state,
)
from core.kernel import adjoint, as_cmatrix, commutator, kron

logger = logging.getLogger(__name__)


# ========================= Types =========================
def _hermitian(m, name):
    m = as_cmatrix(m)
    scale = max(1.0, float(np.linalg.norm(m)))
    if m.shape[0] != m.shape[1] or np.linalg.norm(m - m.conj().T) > 1e-12 * scale:
        raise ValueError(f"{name} must be a square Hermitian matrix")
    return m


@dataclass(frozen=True)
class CoupledModelParams:
    """Two Lieb-Liniger gases with intra-species c and inter-species density coupling g"""
    M: float
    c: float
    g: float
    rho01: float
    rho02: float

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"M must be > 0, got {self.M}")
        if not self.c >= 0:
            raise ValueError(f"c must be >= 0, got {self.c}")
        if not (self.rho01 > 0 and self.rho02 > 0):
            raise ValueError(f"densities must be > 0, got {self.rho01}, {self.rho02}")

    @property
    def targets(self) -> Tuple[float, float]:
        return (self.rho01, self.rho02)

    def species(self, alpha) -> ModelParams:
        """Single-field problem of species alpha (1 or 2)"""
        return ModelParams(M=self.M, c=self.c, rho0=self.targets[alpha - 1])

    def with_densities(self, rho1, rho2):
        return replace(self, rho01=rho1, rho02=rho2)

    def swapped(self):
        return replace(self, rho01=self.rho02, rho02=self.rho01)


@dataclass(frozen=True)
class CoupledAnsatz:
    """Per-field K1, K2, R1, R2 plus P Hermitian (Z1, Z2) pairs, all D x D"""
    K1: np.ndarray
    K2: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    Z: Tuple[Tuple[np.ndarray, np.ndarray], ...] = ()

    def __post_init__(self):
        K1 = _hermitian(self.K1, "K1")
        K2 = _hermitian(self.K2, "K2")
        R1 = as_cmatrix(self.R1)
        R2 = as_cmatrix(self.R2)
        Z = tuple((_hermitian(z1, f"Z1[{p}]"), _hermitian(z2, f"Z2[{p}]"))
                  for p, (z1, z2) in enumerate(self.Z))
        D = K1.shape[0]
        for m in (K2, R1, R2) + tuple(z for pair in Z for z in pair):
            if m.shape != (D, D):
                raise ValueError(f"all matrices must be {D}x{D}, got {m.shape}")
        for name, m in (('K1', K1), ('K2', K2), ('R1', R1), ('R2', R2), ('Z', Z)):
            object.__setattr__(self, name, m)

    @property
    def D(self) -> int:
        return self.K1.shape[0]

    @property
    def P(self) -> int:
        return len(self.Z)

    @property
    def realized_dim(self) -> int:
        return self.D * self.D


@dataclass(frozen=True)
class CoupledObservables:
    n1: float
    n2: float
    kin1: float
    kin2: float
    pair1: float
    pair2: float
    cross: float
    gap: float = float('inf')
    residual: float = 0.0

    @property
    def densities(self) -> Tuple[float, float]:
        return (self.n1, self.n2)

    @property
    def correlation(self) -> float:
        """|<rho1 rho2> - <rho1><rho2>|"""
        return abs(self.cross - self.n1 * self.n2)


# ==================== Construction ====================
def from_singles(a1, a2, Z=()) -> CoupledAnsatz:
    """Decoupled product construction from two single-field ansaetze"""
    return CoupledAnsatz(K1=a1.K, K2=a2.K, R1=a1.R, R2=a2.R, Z=tuple(Z))


def swap_species(ansatz) -> CoupledAnsatz:
    """(K1, R1) <-> (K2, R2) and Z1 <-> Z2"""
    return CoupledAnsatz(K1=ansatz.K2, K2=ansatz.K1, R1=ansatz.R2, R2=ansatz.R1,
                         Z=tuple((z2, z1) for z1, z2 in ansatz.Z))


def assemble_K(ansatz) -> np.ndarray:
    eye = np.eye(ansatz.D, dtype=np.complex128)
    K = kron(ansatz.K1, eye) + kron(eye, ansatz.K2)
    for z1, z2 in ansatz.Z:
        K = K + kron(z1, z2)
    return K


def assemble_R(ansatz) -> Tuple[np.ndarray, np.ndarray]:
    eye = np.eye(ansatz.D, dtype=np.complex128)
    return kron(ansatz.R1, eye), kron(eye, ansatz.R2)


def regularity_residual(ansatz) -> float:
    """||[R~1, R~2]||, zero by construction"""
    R1, R2 = assemble_R(ansatz)
    return float(np.linalg.norm(commutator(R1, R2)))


def build_Q_coupled(ansatz) -> np.ndarray:
    """Q~ = -iK~ - sum_a R~a^dagger R~a / 2"""
    R1, R2 = assemble_R(ansatz)
    return -1j * assemble_K(ansatz) - 0.5 * (adjoint(R1) @ R1 + adjoint(R2) @ R2)


def build_transfer_coupled(ansatz) -> np.ndarray:
    return lindblad_transfer(build_Q_coupled(ansatz), list(assemble_R(ansatz)))


def steady_state_coupled(ansatz, tol=None) -> SteadyState:
    return solve_steady_state(build_transfer_coupled(ansatz), ansatz.realized_dim, tol)


# ==================== Observables ====================
def observables_coupled(ansatz, ss) -> CoupledObservables:
    """Local densities, kinetic and pair terms per species plus <rho1 rho2>"""
    Q = build_Q_coupled(ansatz)
    R1, R2 = assemble_R(ansatz)
    values = {}
    for alpha, R in ((1, R1), (2, R2)):
        C = commutator(Q, R)
        RR = R @ R
        values[f'n{alpha}'] = expectation(adjoint(R) @ R, ss, f"n{alpha}")
        values[f'kin{alpha}'] = expectation(adjoint(C) @ C, ss, f"kin{alpha}")
        values[f'pair{alpha}'] = expectation(adjoint(RR) @ RR, ss, f"pair{alpha}")
    R21 = R2 @ R1
    values['cross'] = expectation(adjoint(R21) @ R21, ss, "cross")
    return CoupledObservables(gap=ss.gap, residual=ss.residual, **values)


def energy_from_observables(obs, params) -> float:
    return ((obs.kin1 + obs.kin2) / (2.0 * params.M)
            + params.c * (obs.pair1 + obs.pair2)
            + params.g * obs.cross)


def local_observables_coupled(ansatz, params, tol=None):
    """(observables, energy) from a single steady-state solve"""
    obs = observables_coupled(ansatz, steady_state_coupled(ansatz, tol))
    return obs, energy_from_observables(obs, params)


def energy_density_coupled(ansatz, params, tol=None) -> float:
    """e = (kin1+kin2)/(2M) + c (pair1+pair2) + g cross"""
    return local_observables_coupled(ansatz, params, tol)[1]


def density_correlation(ansatz, ss) -> float:
    """|Delta rho^2| = |cross - n1 n2|"""
    return observables_coupled(ansatz, ss).correlation


def mean_field_energy(e1, e2, params) -> float:
    """P = 0 reference: e1 + e2 + g rho01 rho02"""
    return e1 + e2 + params.g * params.rho01 * params.rho02
