import logging
import math

import numpy as np
import pytest

from dimersim import manybody
from dimersim.core import (
    BlochVector,
    DomainError,
    PreconditionError,
    SystemParams,
    Variant,
    angles_from_bloch,
    bloch_from_angles,
    spinor_from_bloch,
)
from dimersim.linear2 import hamiltonian_matrix, propagate_linear, propagator_pt
from dimersim.manybody import (
    ROUNDING_TOLERANCE,
    AmplificationMonitor,
    FockVector,
    angular_momentum_operators,
    anticommutator_expectations,
    build_hamiltonian,
    coherent_overlap,
    coherent_state,
    covariance_check,
    expectation_table,
    expectations,
    linear_spectrum_closed_form,
    norm_rate,
    propagate,
    rescaled_norm,
)
from dimersim.meanfield import integrate_meanfield
from dimersim.numerics import eig_complex


def fock_state(k, n_particles):
    amps = np.zeros(n_particles + 1, dtype=complex)
    amps[k] = 1.0
    return FockVector(amps)


def assert_same_spectrum(numeric, closed, atol):
    numeric = np.asarray(numeric)
    for value in closed:
        assert np.min(np.abs(numeric - value)) <= atol
    assert numeric.size == len(closed)


def random_state(rng, n_particles):
    amps = rng.normal(size=n_particles + 1) + 1j * rng.normal(size=n_particles + 1)
    return FockVector(amps / np.linalg.norm(amps))


class TestHamiltonian:
    """Many-particle Hamiltonian and its spectrum."""

    @pytest.mark.parametrize("variant", list(Variant))
    def test_single_particle(self, variant):
        params = SystemParams(epsilon=0.3, gamma=0.4, g=1.0, variant=variant)
        ham = build_hamiltonian(params, 1)
        # Fock index k counts particles in mode 1, so the 2x2 ordering is reversed
        expected = hamiltonian_matrix(params) + 0.5 * params.g * np.eye(2)
        np.testing.assert_allclose(ham[::-1, ::-1], expected, atol=1e-15)

    def test_hermitian_levels(self):
        spectrum = eig_complex(build_hamiltonian(SystemParams(), 2)).eigenvalues
        assert_same_spectrum(spectrum, [-2.0, 0.0, 2.0], atol=1e-12)

    def test_exceptional_point(self):
        params = SystemParams(gamma=1.0)
        closed = linear_spectrum_closed_form(params, 13)
        np.testing.assert_allclose(closed, -13j, atol=1e-12)
        numeric = eig_complex(build_hamiltonian(params, 13), vectors=False).eigenvalues
        # the 14-fold defective eigenvalue splits under rounding; its mean does not
        assert np.mean(numeric) == pytest.approx(-13j, abs=1e-10)
        assert np.max(np.abs(numeric + 13j)) < 1.5

    def test_closed_form_examples(self):
        np.testing.assert_allclose(linear_spectrum_closed_form(SystemParams(), 1), [-1.0, 1.0])
        expected = [-2j + (2 * k - 4) * math.sqrt(0.75) for k in range(5)]
        np.testing.assert_allclose(linear_spectrum_closed_form(SystemParams(gamma=0.5), 4),
                                   expected, atol=1e-12)

    @pytest.mark.parametrize("n_particles", [1, 5, 12])
    @pytest.mark.parametrize("gamma", [0.0, 0.3, 1.5])
    @pytest.mark.parametrize("variant", list(Variant))
    def test_linear_spectrum(self, n_particles, gamma, variant):
        params = SystemParams(gamma=gamma, variant=variant)
        numeric = eig_complex(build_hamiltonian(params, n_particles), vectors=False).eigenvalues
        closed = linear_spectrum_closed_form(params, n_particles)
        assert_same_spectrum(numeric, closed, atol=1e-7)

    def test_closed_form_needs_no_interaction(self):
        with pytest.raises(PreconditionError):
            linear_spectrum_closed_form(SystemParams(g=1.0), 4)

    def test_needs_particles(self):
        with pytest.raises(PreconditionError):
            build_hamiltonian(SystemParams())

    def test_operators_commutator(self):
        ops = angular_momentum_operators(6)
        lx, ly, lz = (ops[name].toarray() for name in ("lx", "ly", "lz"))
        np.testing.assert_allclose(lx @ ly - ly @ lx, 1j * lz, atol=1e-12)
        casimir = lx @ lx + ly @ ly + lz @ lz
        np.testing.assert_allclose(casimir, 3.0 * 4.0 * np.eye(7), atol=1e-12)


class TestCoherentStates:
    """SU(2) coherent states and expectation values."""

    def test_poles(self):
        north = coherent_state(0.0, 0.0, 8)
        south = coherent_state(math.pi, 0.0, 8)
        assert abs(north.amplitudes[8]) == pytest.approx(1.0)
        assert abs(south.amplitudes[0]) == pytest.approx(1.0)
        assert expectations(north).lz == pytest.approx(4.0)

    @pytest.mark.parametrize("theta,phi", [(0.3, 0.0), (1.2, 2.5), (2.9, -1.0), (math.pi / 2, 4.0)])
    def test_bloch_image(self, theta, phi):
        psi = coherent_state(theta, phi, 10)
        assert psi.norm() == pytest.approx(1.0)
        exp = expectations(psi)
        assert exp.n_expect == 10
        np.testing.assert_allclose(exp.bloch(), bloch_from_angles(theta, phi), atol=1e-12)

    def test_large_particle_number(self):
        psi = coherent_state(1.0, 0.3, 400)
        assert np.all(np.isfinite(psi.amplitudes))
        np.testing.assert_allclose(expectations(psi).bloch(), bloch_from_angles(1.0, 0.3),
                                   atol=1e-10)

    def test_overlap(self):
        psi = coherent_state(1.0, 0.5, 6)
        assert coherent_overlap(psi, 1.0, 0.5) == pytest.approx(1.0)
        assert coherent_overlap(psi, math.pi - 1.0, 0.5 + math.pi) < 1e-6

    def test_zero_norm(self):
        with pytest.raises(DomainError):
            expectations(FockVector(np.zeros(3, dtype=complex)))


class TestCovariances:
    """Generalized Heisenberg equations and anti-commutator factorization."""

    def test_factorization_for_coherent_states(self):
        params = SystemParams(epsilon=0.2, gamma=0.3, g=1.0)
        for theta, phi in [(0.4, 0.1), (2.0, -2.0), (math.pi / 2, 1.0)]:
            report = covariance_check(coherent_state(theta, phi, 10), params)
            assert report.factorization_residual <= 1e-10

    def test_heisenberg_for_random_states(self):
        rng = np.random.default_rng(5)
        params = SystemParams(epsilon=0.1, gamma=0.4, g=2.0, n_particles=6)
        for _ in range(5):
            report = covariance_check(random_state(rng, 6), params)
            assert report.heisenberg_residual <= 1e-5

    @pytest.mark.slow
    def test_heisenberg_for_random_parameters(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            n = int(rng.integers(2, 11))
            params = SystemParams(epsilon=rng.uniform(-0.5, 0.5), v=rng.uniform(0.5, 1.5),
                                  gamma=rng.uniform(0.0, 1.0), g=rng.uniform(-2.0, 2.0),
                                  variant=Variant.PT if rng.random() < 0.5 else Variant.DECAYING)
            report = covariance_check(random_state(rng, n), params)
            assert report.heisenberg_residual <= 1e-5

    @pytest.mark.slow
    @pytest.mark.parametrize("n_particles", [2, 10, 40])
    def test_factorization_on_random_points(self, n_particles):
        rng = np.random.default_rng(n_particles)
        params = SystemParams(gamma=0.3, g=1.0)
        for _ in range(20):
            psi = coherent_state(rng.uniform(0.0, math.pi), rng.uniform(0.0, 2 * math.pi),
                                 n_particles)
            assert covariance_check(psi, params).factorization_residual <= 1e-10

    def test_number_operator_enters_factorization(self, monkeypatch):
        psi = coherent_state(0.7, 0.3, 8)
        params = SystemParams(gamma=0.2, g=1.0)
        assert covariance_check(psi, params).factorization_residual <= 1e-10
        original = manybody.angular_momentum_operators

        def shifted(n_particles):
            ops = original(n_particles)
            ops["n"] = ops["n"] + 0.1 * ops["lz"]
            return ops

        monkeypatch.setattr(manybody, "angular_momentum_operators", shifted)
        assert covariance_check(psi, params).factorization_residual > 1e-3

    def test_fock_anticommutator(self):
        n = 7
        psi = fock_state(n, n)
        anti = anticommutator_expectations(psi)
        assert anti[2, 2] == pytest.approx(2.0 * (n / 2) ** 2)
        assert anti[0, 0] == pytest.approx(0.5 * n)
        np.testing.assert_allclose(expectations(psi).bloch(), [0.0, 0.0, 0.5], atol=1e-15)


class TestPropagation:
    """Propagation with the matrix exponential."""

    def test_linear_limit_matches_mean_field(self):
        params = SystemParams(epsilon=0.2, gamma=0.3)
        theta, phi = 1.0, 0.4
        times = np.linspace(0.0, 5.0, 11)
        states = propagate(coherent_state(theta, phi, 12), params, times)
        bloch, norms = expectation_table(states)
        spinor = spinor_from_bloch(bloch_from_angles(theta, phi))
        exact = propagate_linear(spinor, params, times)
        np.testing.assert_allclose(bloch, exact[["sx", "sy", "sz"]].to_numpy(), atol=1e-8)
        np.testing.assert_allclose(norms, exact["norm"], rtol=1e-8)

    @pytest.mark.slow
    @pytest.mark.parametrize("gamma", [0.1, 0.5, 1.5])
    def test_linear_limit_on_random_points(self, gamma):
        rng = np.random.default_rng(int(10 * gamma))
        params = SystemParams(gamma=gamma)
        times = np.linspace(0.0, 10.0, 101)
        for _ in range(10):
            # southern starts; near the repelling node of the broken phase the
            # N-fold product state is not resolved in double precision
            theta, phi = rng.uniform(0.5 * math.pi, math.pi), rng.uniform(0.0, 2 * math.pi)
            bloch, _ = expectation_table(propagate(coherent_state(theta, phi, 20), params, times))
            trajectory = integrate_meanfield(bloch_from_angles(theta, phi), params, times,
                                             rtol=1e-11, atol=1e-12)
            np.testing.assert_allclose(bloch, trajectory.states, atol=1e-7)

    def test_linear_limit_stays_coherent(self):
        params = SystemParams(gamma=0.5)
        states = propagate(coherent_state(0.8, 0.0, 10), params, np.linspace(0.0, 3.0, 7))
        for state in states:
            theta, phi = angles_from_bloch(BlochVector.from_array(expectations(state).bloch()))
            assert coherent_overlap(state, theta, phi) == pytest.approx(1.0, abs=1e-8)

    def test_single_particle(self):
        params = SystemParams(gamma=0.6, variant=Variant.PT)
        psi0 = FockVector(np.array([0.0, 1.0], dtype=complex))
        for state, t in zip(propagate(psi0, params, [0.0, 0.7, 1.9]), [0.0, 0.7, 1.9]):
            expected = propagator_pt(params, t) @ np.array([1.0, 0.0])
            np.testing.assert_allclose(state.to_array()[::-1], expected, atol=1e-12)

    def test_pt_equals_shifted_decaying(self):
        n, gamma, t = 6, 0.4, 2.5
        psi0 = coherent_state(1.3, 0.2, n)
        decaying = propagate(psi0, SystemParams(gamma=gamma, g=1.5), [0.0, t])[-1]
        pt = propagate(psi0, SystemParams(gamma=gamma, g=1.5, variant=Variant.PT), [0.0, t])[-1]
        np.testing.assert_allclose(pt.to_array(), decaying.to_array() * math.exp(gamma * n * t),
                                   rtol=1e-9, atol=1e-12)

    def test_norm_derivative(self):
        params = SystemParams(epsilon=0.1, gamma=0.2, g=1.0)
        psi0 = coherent_state(0.9, 0.3, 8)
        dt = 1e-6
        forward = propagate(psi0, params, [0.0, dt])[-1]
        rate = (forward.log_norm() - psi0.log_norm()) / dt
        assert rate == pytest.approx(norm_rate(psi0, params), abs=1e-5)
        assert norm_rate(psi0, params) == pytest.approx(
            -2.0 * params.gamma * (2.0 * expectations(psi0).lz + 8))

    def test_hermitian_norm_conserved(self):
        states = propagate(coherent_state(0.5, 0.0, 15), SystemParams(g=2.0),
                           np.linspace(0.0, 50.0, 11))
        for state in states:
            assert state.norm() == pytest.approx(1.0, abs=1e-10)
            assert expectations(state).n_expect == 15

    def test_deep_decay(self):
        params = SystemParams(gamma=1.5)
        states = propagate(coherent_state(0.0, 0.0, 30), params, np.linspace(0.0, 40.0, 41))
        assert states[-1].log_norm() < math.log(1e-300)
        assert np.isfinite(rescaled_norm(states[-1]))
        assert rescaled_norm(states[-1]) > 0.0

    def test_decreasing_grid(self):
        with pytest.raises(PreconditionError):
            propagate(coherent_state(0.0, 0.0, 3), SystemParams(), [1.0, 0.0])


class TestRoundingAmplification:
    """Detection of rounding errors amplified by non-unitary propagation."""

    def test_monitor(self):
        monitor = AmplificationMonitor(2)
        for k in range(60):
            monitor.step(np.diag([1.0, 0.5]))
            monitor.record((k + 1) * math.log(0.5))
        assert monitor.log_amplification > 35.0
        assert monitor.relative_error > ROUNDING_TOLERANCE
        assert not monitor.check("diagonal decay")

    def test_unitary_steps(self):
        monitor = AmplificationMonitor(5)
        for _ in range(100):
            monitor.step(np.eye(5))
            monitor.record(0.0)
        assert monitor.log_amplification == pytest.approx(0.0, abs=1e-12)
        assert monitor.check("identity")

    def test_hermitian_propagation_is_not_flagged(self, caplog):
        with caplog.at_level(logging.WARNING, logger="dimersim.manybody"):
            propagate(coherent_state(1.3, 0.7, 300), SystemParams(g=1.0),
                      np.linspace(0.0, 4.0, 41))
        assert not caplog.records

    def test_large_decaying_propagation_is_flagged(self, caplog):
        params = SystemParams(gamma=0.1, g=1.0)
        with caplog.at_level(logging.WARNING, logger="dimersim.manybody"):
            propagate(coherent_state(1.3, 0.7, 300), params, np.linspace(0.0, 4.0, 81))
        assert any("rounding errors" in record.getMessage() for record in caplog.records)


class TestRescaledNorm:
    """The rescaled norm <Psi|Psi>^(1/N)."""

    def test_unit(self):
        assert rescaled_norm(coherent_state(0.7, 0.0, 5)) == pytest.approx(1.0)

    def test_tiny_norm(self):
        amps = coherent_state(0.7, 0.0, 20).amplitudes
        psi = FockVector(amps, 0.5 * math.log(1e-20))
        assert rescaled_norm(psi) == pytest.approx(0.1)

    def test_rescaled_preserves_state(self):
        psi = FockVector(np.array([3.0, 4.0j]), 0.0)
        np.testing.assert_allclose(psi.rescaled().to_array(), psi.to_array())
