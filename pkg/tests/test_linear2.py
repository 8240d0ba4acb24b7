import math

import numpy as np
import pytest

from dimersim.core import DomainError, SpinorState, SystemParams, Variant, sphere_defect
from dimersim.linear2 import (
    bloch_rhs_linear,
    eigenvalues_decaying,
    eigenvalues_pt,
    fixed_points_linear,
    hamiltonian_matrix,
    is_exceptional,
    norm_rate_linear,
    propagate_linear,
    propagator,
    propagator_pt,
)
from dimersim.numerics import eig_complex, expm, sorted_spectrum


def pt(**kwargs):
    return SystemParams(variant=Variant.PT, **kwargs)


class TestEigenvalues:
    """Closed-form eigenvalues of the two-level matrix."""

    def test_real_phase(self):
        ev = eigenvalues_pt(pt(gamma=0.5))
        assert ev.lambda_plus == pytest.approx(0.866025, abs=1e-6)
        assert ev.lambda_minus == pytest.approx(-0.866025, abs=1e-6)
        assert not ev.is_ep

    def test_exceptional_point(self):
        params = pt(gamma=1.0)
        ev = eigenvalues_pt(params)
        assert abs(ev.lambda_plus) < 1e-12
        assert ev.is_ep
        assert is_exceptional(params)

    def test_broken_phase(self):
        ev = eigenvalues_pt(pt(gamma=2.0))
        assert sorted([ev.lambda_plus.imag, ev.lambda_minus.imag]) == pytest.approx(
            [-math.sqrt(3), math.sqrt(3)])
        assert ev.lambda_plus.real == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("variant", list(Variant))
    @pytest.mark.parametrize("gamma", [0.0, 0.3, 2.0])
    def test_matches_matrix(self, variant, gamma):
        params = SystemParams(epsilon=0.2, gamma=gamma, variant=variant)
        ev = eigenvalues_pt(params)
        numeric = sorted_spectrum(eig_complex(hamiltonian_matrix(params)).eigenvalues)
        closed = sorted_spectrum([ev.lambda_plus, ev.lambda_minus])
        np.testing.assert_allclose(numeric, closed, atol=1e-12)

    def test_decaying_offset(self):
        ev = eigenvalues_decaying(pt(gamma=0.5))
        assert ev.lambda_plus.imag == pytest.approx(-0.5)


class TestPropagator:
    """Closed-form time evolution operators."""

    def test_identity(self):
        np.testing.assert_allclose(propagator_pt(pt(gamma=0.5), 0.0), np.eye(2))

    def test_exceptional_norm(self):
        u = propagator_pt(pt(gamma=1.0), 0.5)
        psi = u @ np.array([1.0, 0.0])
        assert np.vdot(psi, psi).real == pytest.approx(0.5)

    @pytest.mark.parametrize("gamma", [0.5, 1.0, 1.0 + 1e-7, 1.0 + 1e-4, 1.5])
    def test_matches_expm(self, gamma):
        params = pt(gamma=gamma)
        t = 2.0
        np.testing.assert_allclose(propagator_pt(params, t),
                                   expm(-1j * hamiltonian_matrix(params) * t), atol=1e-10)

    def test_decaying_matches_expm(self):
        params = SystemParams(epsilon=0.3, gamma=0.4)
        np.testing.assert_allclose(propagator(params, 1.7),
                                   expm(-1j * hamiltonian_matrix(params) * 1.7), atol=1e-10)

    def test_hermitian_is_unitary(self):
        u = propagator(SystemParams(epsilon=0.4), 3.0)
        np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-12)

    def test_random_parameters(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            params = SystemParams(
                epsilon=rng.uniform(-0.5, 0.5), v=rng.uniform(0.5, 1.5),
                gamma=rng.uniform(0.0, 2.0),
                variant=Variant.PT if rng.random() < 0.5 else Variant.DECAYING)
            t = rng.uniform(0.0, 3.0)
            np.testing.assert_allclose(propagator(params, t),
                                       expm(-1j * hamiltonian_matrix(params) * t),
                                       rtol=1e-9, atol=1e-10)

    @pytest.mark.parametrize("t", [math.inf, -math.inf, math.nan])
    def test_infinite_time(self, t):
        with pytest.raises(DomainError):
            propagator_pt(pt(gamma=0.5), t)


class TestBlochFlow:
    """Renormalized linear Bloch equations and the norm rate."""

    def test_hermitian_fixed_point(self):
        np.testing.assert_allclose(bloch_rhs_linear((0.5, 0.0, 0.0), SystemParams()), 0.0)

    def test_north_pole(self):
        rhs = bloch_rhs_linear((0.0, 0.0, 0.5), SystemParams(gamma=0.5))
        np.testing.assert_allclose(rhs, [0.0, -1.0, 0.0], atol=1e-15)

    def test_orthogonality(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            s = rng.normal(size=3)
            s = 0.5 * s / np.linalg.norm(s)
            params = SystemParams(epsilon=rng.normal(), v=rng.uniform(0.1, 2.0),
                                  gamma=rng.uniform(0.0, 2.0))
            assert abs(np.dot(s, bloch_rhs_linear(s, params))) < 1e-13

    def test_norm_rates(self):
        params = SystemParams(gamma=0.1)
        assert norm_rate_linear((0.0, 0.0, -0.5), params) == 0.0
        assert norm_rate_linear((0.0, 0.0, 0.5), params) == pytest.approx(-0.4)
        assert norm_rate_linear((0.5, 0.0, 0.0), params, Variant.PT) == 0.0


class TestFixedPoints:
    """Fixed points of the linear flow."""

    def test_unbroken(self):
        points = fixed_points_linear(SystemParams(gamma=0.75))
        assert len(points) == 2
        assert sorted(p.sx for p in points) == pytest.approx([-0.330719, 0.330719], abs=1e-6)
        for p in points:
            assert p.sy == pytest.approx(0.375)
            assert p.sz == pytest.approx(0.0, abs=1e-12)
            assert np.linalg.norm(bloch_rhs_linear(p, SystemParams(gamma=0.75))) <= 1e-10

    def test_exceptional_point(self):
        points = fixed_points_linear(SystemParams(gamma=1.0))
        assert len(points) == 1
        assert points[0] == pytest.approx((0.0, 0.5, 0.0), abs=1e-8)

    def test_broken(self):
        params = SystemParams(gamma=2.0)
        points = fixed_points_linear(params)
        assert sorted(p.sz for p in points) == pytest.approx([-0.433013, 0.433013], abs=1e-6)
        for p in points:
            assert sphere_defect(p) < 1e-12
            assert np.linalg.norm(bloch_rhs_linear(p, params)) <= 1e-10

    def test_biased(self):
        params = SystemParams(epsilon=0.1, gamma=0.75)
        points = fixed_points_linear(params)
        assert len(points) == 2
        for p in points:
            assert np.linalg.norm(bloch_rhs_linear(p, params)) <= 1e-10


class TestPropagateLinear:
    """Tabulated two-level dynamics."""

    def test_columns_and_norm(self):
        t_grid = np.linspace(0.0, 5.0, 11)
        df = propagate_linear(SpinorState(1.0 + 0j, 0j), pt(gamma=0.5), t_grid)
        assert list(df.columns) == ["t", "pop1", "pop2", "norm", "sx", "sy", "sz"]
        np.testing.assert_allclose(df["norm"], df["pop1"] + df["pop2"])
        assert df["norm"].iloc[0] == pytest.approx(1.0)

    def test_decaying_norm_decreases(self):
        t_grid = np.linspace(0.0, 5.0, 21)
        df = propagate_linear(SpinorState(1.0 + 0j, 0j), SystemParams(gamma=0.5), t_grid)
        assert np.all(np.diff(df["norm"]) <= 1e-14)

    def test_bloch_matches_flow(self):
        params = SystemParams(gamma=0.3)
        df = propagate_linear(SpinorState(1.0 + 0j, 0j), params, [0.0, 1e-6])
        s0 = df[["sx", "sy", "sz"]].iloc[0].to_numpy()
        s1 = df[["sx", "sy", "sz"]].iloc[1].to_numpy()
        np.testing.assert_allclose((s1 - s0) / 1e-6, bloch_rhs_linear(s0, params), atol=1e-5)
