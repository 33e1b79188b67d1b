# -*- coding: utf-8 -*-
"""
Parameter Layouts
Bijections between ansatz matrices and flat real vectors.

Layouts:
    single         K Hermitian (D diagonal, then real and imaginary parts of
                   the strict upper triangle) + R real block + R imaginary
                   block: 3 D^2 reals.
    single-gauge   K diagonal (D) + R real block + imaginary parts of the R
                   entries that are not gauge-fixed real: 2 D^2 reals.
    coupled        species 1 and species 2 in the single-gauge layout, then
                   each Z pair as two full Hermitian blocks: (4 + 2P) D^2 reals.

Gauge-fixed entries of R are (0, 0) and the superdiagonal (i, i+1); the
unitary ancilla gauge diagonalizes K, the diagonal-unitary and global U(1)
phase freedom makes those entries real.
"""

from dataclasses import dataclass
from typing import Dict

import numpy as np

from core.cmps_coupled import CoupledAnsatz
from core.cmps_single import CmpsAnsatz
from core.exceptions import LayoutMismatch

LAYOUT_KINDS = ('single', 'single-gauge', 'coupled')
GAUGE_ATOL = 1e-12


@dataclass(frozen=True)
class ParamLayout:
    """Slice descriptor of a flat parameter vector"""
    kind: str
    D: int
    P: int = 0

    def __post_init__(self):
        if self.kind not in LAYOUT_KINDS:
            raise LayoutMismatch(f"unknown layout kind {self.kind!r}")
        if self.D < 1 or self.P < 0:
            raise LayoutMismatch(f"invalid layout dimensions D={self.D}, P={self.P}")
        if self.kind != 'coupled' and self.P:
            raise LayoutMismatch("single-field layouts carry no Z pairs")

    @property
    def size(self) -> int:
        D2 = self.D * self.D
        if self.kind == 'single':
            return 3 * D2
        if self.kind == 'single-gauge':
            return 2 * D2
        return (4 + 2 * self.P) * D2

    def blocks(self) -> Dict[str, slice]:
        """Named slices of the flat vector"""
        D, D2 = self.D, self.D * self.D
        if self.kind == 'single':
            return {'K': slice(0, D2), 'R-real': slice(D2, 2 * D2), 'R-imag': slice(2 * D2, 3 * D2)}
        gauge = {'K': slice(0, D), 'R-real': slice(D, D + D2), 'R-imag': slice(D + D2, 2 * D2)}
        if self.kind == 'single-gauge':
            return gauge
        out = {}
        for alpha in (1, 2):
            offset = (alpha - 1) * 2 * D2
            for name, s in gauge.items():
                out[f'{name}{alpha}'] = slice(s.start + offset, s.stop + offset)
        for p in range(self.P):
            start = 4 * D2 + 2 * p * D2
            out[f'Z1({p})'] = slice(start, start + D2)
            out[f'Z2({p})'] = slice(start + D2, start + 2 * D2)
        return out


@dataclass(frozen=True)
class ParamVector:
    values: np.ndarray
    layout: ParamLayout


# ==================== Block codecs ====================
def _upper(D):
    return np.triu_indices(D, k=1)


def _fixed_mask(D):
    """Entries of R made real by the phase gauge"""
    mask = np.zeros((D, D), dtype=bool)
    mask[0, 0] = True
    idx = np.arange(D - 1)
    mask[idx, idx + 1] = True
    return mask


def hermitian_to_reals(H) -> np.ndarray:
    D = H.shape[0]
    iu = _upper(D)
    return np.concatenate([np.diag(H).real, H[iu].real, H[iu].imag])


def reals_to_hermitian(x, D) -> np.ndarray:
    iu = _upper(D)
    m = len(iu[0])
    H = np.diag(np.asarray(x[:D], dtype=np.complex128))
    H[iu] = x[D:D + m] + 1j * x[D + m:D + 2 * m]
    H[(iu[1], iu[0])] = x[D:D + m] - 1j * x[D + m:D + 2 * m]
    return H


def _gauge_species_to_reals(K, R):
    D = K.shape[0]
    off = K - np.diag(np.diag(K))
    mask = _fixed_mask(D)
    if np.max(np.abs(off), initial=0.0) > GAUGE_ATOL or np.max(np.abs(R[mask].imag)) > GAUGE_ATOL:
        raise LayoutMismatch("ansatz is not in the fixed gauge; apply gauge_fix first")
    return np.concatenate([np.diag(K).real, R.real.reshape(-1), R.imag[~mask]])


def _reals_to_gauge_species(x, D):
    D2 = D * D
    mask = _fixed_mask(D)
    K = np.diag(np.asarray(x[:D], dtype=np.complex128))
    imag = np.zeros((D, D))
    imag[~mask] = x[D + D2:2 * D2]
    R = np.asarray(x[D:D + D2]).reshape(D, D) + 1j * imag
    return K, R


# ==================== Gauge fixing ====================
def species_gauge(K, R):
    """
    Unitary g and phase so that g K g^dagger is diagonal and phase * g R g^dagger
    has real (0, 0) and superdiagonal entries.
    """
    w, U = np.linalg.eigh(K)
    Rp = U.conj().T @ R @ U
    D = K.shape[0]
    phi = -np.angle(Rp[0, 0])
    theta = np.zeros(D)
    for i in range(D - 1):
        # global phase phi also rotates the superdiagonal
        theta[i + 1] = theta[i] + np.angle(Rp[i, i + 1]) + phi
    W = np.diag(np.exp(1j * theta))
    g = W @ U.conj().T
    return g, np.exp(1j * phi)


def _apply_species_gauge(K, R, g, phase):
    D = K.shape[0]
    K2 = g @ K @ g.conj().T
    K2 = np.diag(np.diag(K2).real).astype(np.complex128)
    R2 = phase * (g @ R @ g.conj().T)
    mask = _fixed_mask(D)
    R2[mask] = R2[mask].real
    return K2, R2


def gauge_fix_single(ansatz) -> CmpsAnsatz:
    """Gauge-equivalent single-field ansatz in the fixed gauge"""
    g, phase = species_gauge(ansatz.K, ansatz.R)
    K, R = _apply_species_gauge(ansatz.K, ansatz.R, g, phase)
    return CmpsAnsatz(K=K, R=R)


def gauge_fix_coupled(ansatz) -> CoupledAnsatz:
    """Local-unitary gauge fix of both species; Z matrices follow their ancilla"""
    g1, ph1 = species_gauge(ansatz.K1, ansatz.R1)
    g2, ph2 = species_gauge(ansatz.K2, ansatz.R2)
    K1, R1 = _apply_species_gauge(ansatz.K1, ansatz.R1, g1, ph1)
    K2, R2 = _apply_species_gauge(ansatz.K2, ansatz.R2, g2, ph2)
    Z = []
    for z1, z2 in ansatz.Z:
        a = g1 @ z1 @ g1.conj().T
        b = g2 @ z2 @ g2.conj().T
        Z.append((0.5 * (a + a.conj().T), 0.5 * (b + b.conj().T)))
    return CoupledAnsatz(K1=K1, K2=K2, R1=R1, R2=R2, Z=tuple(Z))


# ==================== pack / unpack ====================
def layout_for(ansatz, gauge=False) -> ParamLayout:
    if isinstance(ansatz, CoupledAnsatz):
        return ParamLayout('coupled', ansatz.D, ansatz.P)
    return ParamLayout('single-gauge' if gauge else 'single', ansatz.D)


def pack(ansatz, layout=None) -> ParamVector:
    """Flatten an ansatz into the real vector of its layout"""
    layout = layout or layout_for(ansatz)
    D = layout.D
    if ansatz.D != D:
        raise LayoutMismatch(f"ansatz D={ansatz.D} does not match layout D={D}")

    if layout.kind == 'single':
        if not isinstance(ansatz, CmpsAnsatz):
            raise LayoutMismatch("single layout needs a CmpsAnsatz")
        values = np.concatenate([hermitian_to_reals(ansatz.K), ansatz.R.real.reshape(-1),
                                 ansatz.R.imag.reshape(-1)])
    elif layout.kind == 'single-gauge':
        if not isinstance(ansatz, CmpsAnsatz):
            raise LayoutMismatch("single-gauge layout needs a CmpsAnsatz")
        values = _gauge_species_to_reals(ansatz.K, ansatz.R)
    else:
        if not isinstance(ansatz, CoupledAnsatz) or ansatz.P != layout.P:
            raise LayoutMismatch(f"coupled layout needs a CoupledAnsatz with P={layout.P}")
        parts = [_gauge_species_to_reals(ansatz.K1, ansatz.R1),
                 _gauge_species_to_reals(ansatz.K2, ansatz.R2)]
        for z1, z2 in ansatz.Z:
            parts += [hermitian_to_reals(z1), hermitian_to_reals(z2)]
        values = np.concatenate(parts)
    return ParamVector(values=values.astype(float), layout=layout)


def unpack(values, layout):
    """Inverse of pack"""
    x = np.asarray(values.values if isinstance(values, ParamVector) else values, dtype=float)
    if x.ndim != 1 or x.size != layout.size:
        raise LayoutMismatch(f"vector of size {x.size} does not match layout size {layout.size}")
    D, D2 = layout.D, layout.D * layout.D

    if layout.kind == 'single':
        K = reals_to_hermitian(x[:D2], D)
        R = x[D2:2 * D2].reshape(D, D) + 1j * x[2 * D2:].reshape(D, D)
        return CmpsAnsatz(K=K, R=R)
    if layout.kind == 'single-gauge':
        K, R = _reals_to_gauge_species(x, D)
        return CmpsAnsatz(K=K, R=R)

    K1, R1 = _reals_to_gauge_species(x[:2 * D2], D)
    K2, R2 = _reals_to_gauge_species(x[2 * D2:4 * D2], D)
    Z = []
    for p in range(layout.P):
        start = 4 * D2 + 2 * p * D2
        Z.append((reals_to_hermitian(x[start:start + D2], D),
                  reals_to_hermitian(x[start + D2:start + 2 * D2], D)))
    return CoupledAnsatz(K1=K1, K2=K2, R1=R1, R2=R2, Z=tuple(Z))
