# -*- coding: utf-8 -*-
"""Test helpers: random unitaries and hand-built states"""

import numpy as np

from core.cmps_single import CmpsAnsatz, coherent_ansatz, random_ansatz
from core.param_layout import ParamLayout
from core.variational import OptimResult


def random_unitary(D, rng):
    z = rng.normal(size=(D, D)) + 1j * rng.normal(size=(D, D))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def generic_ansatz(D, seed=0):
    return random_ansatz(D, np.random.default_rng(seed))


def diagonal_ansatz():
    """K and R diagonal: two decoupled blocks, so the steady state is not unique"""
    return CmpsAnsatz(K=np.diag([0.3, 0.7]), R=np.diag([1.0, 2.0]))


def converged_coherent(rho0, kappa=0.0):
    """OptimResult wrapping the D = 1 state R = sqrt(rho0)"""
    return OptimResult(ansatz=coherent_ansatz(rho0, kappa), energy=0.0, densities=(rho0,),
                       constraint_residuals=(0.0,), iterations=0, converged=True, gap=np.inf,
                       layout=ParamLayout('single', 1))
