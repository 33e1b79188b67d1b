# -*- coding: utf-8 -*-
import numpy as np
import pytest
from numpy.testing import assert_allclose

from core.cmps_coupled import CoupledModelParams, energy_density_coupled, from_singles
from core.cmps_single import ModelParams, energy_density, gauge_transform
from core.exceptions import LayoutMismatch
from core.param_layout import (
    ParamLayout, gauge_fix_coupled, gauge_fix_single, hermitian_to_reals, layout_for, pack,
    reals_to_hermitian, unpack,
)
from tests.helpers import generic_ansatz, random_unitary


class TestLayoutSizes:

    @pytest.mark.parametrize('kind, D, P, size', [
        ('single', 1, 0, 3),
        ('single', 2, 0, 12),
        ('single-gauge', 2, 0, 8),
        ('coupled', 1, 0, 4),
        ('coupled', 2, 2, 32),
        ('coupled', 3, 0, 36),
    ])
    def test_size(self, kind, D, P, size):
        layout = ParamLayout(kind, D, P)
        assert layout.size == size
        covered = sum(s.stop - s.start for s in layout.blocks().values())
        assert covered == size

    def test_unknown_kind(self):
        with pytest.raises(LayoutMismatch):
            ParamLayout('mixed', 2)

    def test_single_layout_has_no_pairs(self):
        with pytest.raises(LayoutMismatch):
            ParamLayout('single', 2, 1)


class TestPacking:

    def test_hermitian_codec(self, rng):
        a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        h = 0.5 * (a + a.conj().T)
        x = hermitian_to_reals(h)
        assert x.size == 9
        assert_allclose(reals_to_hermitian(x, 3), h)

    def test_single_round_trip(self):
        ansatz = generic_ansatz(3, seed=8)
        v = pack(ansatz)
        assert v.layout == ParamLayout('single', 3)
        back = unpack(v, v.layout)
        assert_allclose(back.K, ansatz.K, atol=1e-15)
        assert_allclose(back.R, ansatz.R, atol=1e-15)

    def test_wrong_size(self):
        with pytest.raises(LayoutMismatch):
            unpack(np.zeros(11), ParamLayout('single', 2))

    def test_wrong_bond_dimension(self):
        with pytest.raises(LayoutMismatch):
            pack(generic_ansatz(2), ParamLayout('single', 3))

    def test_gauge_layout_needs_fixed_gauge(self):
        with pytest.raises(LayoutMismatch):
            pack(generic_ansatz(3, seed=1), ParamLayout('single-gauge', 3))


class TestGaugeFixing:

    def test_single_gauge_fix(self, rng):
        params = ModelParams(M=0.5, c=1.3, rho0=1.0)
        ansatz = gauge_transform(generic_ansatz(3, seed=2), random_unitary(3, rng))
        fixed = gauge_fix_single(ansatz)
        assert_allclose(fixed.K, np.diag(np.diag(fixed.K)), atol=1e-12)
        assert abs(fixed.R[0, 0].imag) < 1e-12
        assert np.all(np.abs(np.diag(fixed.R, 1).imag) < 1e-12)
        assert_allclose(energy_density(fixed, params), energy_density(ansatz, params), rtol=1e-9)

        v = pack(fixed, layout_for(fixed, gauge=True))
        assert v.values.size == 2 * 9
        back = unpack(v, v.layout)
        assert_allclose(back.R, fixed.R, atol=1e-14)

    def test_coupled_gauge_fix_preserves_energy(self, rng):
        a1, a2 = generic_ansatz(2, seed=5), generic_ansatz(2, seed=6)
        Z = []
        for _ in range(2):
            z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            w = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            Z.append((0.1 * (z + z.conj().T), 0.1 * (w + w.conj().T)))
        ansatz = from_singles(a1, a2, Z)
        params = CoupledModelParams(M=0.5, c=1.0, g=0.8, rho01=1.0, rho02=1.0)
        fixed = gauge_fix_coupled(ansatz)
        assert_allclose(energy_density_coupled(fixed, params), energy_density_coupled(ansatz, params), rtol=1e-9)

        v = pack(fixed)
        assert v.layout == ParamLayout('coupled', 2, 2)
        assert v.values.size == 32
        again = unpack(v, v.layout)
        assert_allclose(energy_density_coupled(again, params), energy_density_coupled(ansatz, params), rtol=1e-9)
