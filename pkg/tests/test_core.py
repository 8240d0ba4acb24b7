import math

import numpy as np
import pytest

from dimersim.core import (
    BlochVector,
    CanonicalPoint,
    ConsistencyError,
    DomainError,
    PreconditionError,
    SpinorState,
    SystemParams,
    Trajectory,
    Variant,
    angles_from_bloch,
    bloch_from_angles,
    bloch_from_canonical,
    bloch_from_spinor,
    canonical_from_bloch,
    project_to_sphere,
    sphere_defect,
    spinor_from_bloch,
)


class TestSystemParams:
    """Validation of the physical parameters."""

    def test_defaults(self):
        params = SystemParams()
        assert params.v == 1.0
        assert params.gamma == 0.0
        assert params.variant is Variant.DECAYING
        assert params.n_particles is None

    @pytest.mark.parametrize("field,value", [
        ("v", 0.0),
        ("v", -1.0),
        ("gamma", -0.1),
        ("g", math.inf),
        ("n_particles", 0),
    ])
    def test_invalid(self, field, value):
        with pytest.raises(ValueError):
            SystemParams(**{field: value})

    def test_microscopic_interaction(self):
        params = SystemParams.from_microscopic(0.5, 13)
        assert params.g == 0.5
        assert params.c == pytest.approx(0.5 / 13)

    def test_c_needs_particles(self):
        with pytest.raises(PreconditionError):
            SystemParams(g=1.0).c

    def test_with_validates(self):
        params = SystemParams(gamma=0.5)
        assert params.with_(g=2.0).g == 2.0
        assert params.with_(g=2.0).gamma == 0.5
        with pytest.raises(ValueError):
            params.with_(v=-1.0)

    def test_frozen(self):
        params = SystemParams()
        with pytest.raises(Exception):
            params.v = 2.0

    def test_variant_from_string(self):
        assert SystemParams(variant="pt").variant is Variant.PT


class TestCanonicalChart:
    """Conversions between (p, q) and the Bloch vector."""

    def test_north_pole(self):
        s = bloch_from_canonical(CanonicalPoint(1.0, 0.3))
        assert s == pytest.approx((0.0, 0.0, 0.5))

    def test_equator(self):
        s = bloch_from_canonical(CanonicalPoint(0.0, 0.0))
        assert s == pytest.approx((0.5, 0.0, 0.0))

    def test_generic_point(self):
        s = bloch_from_canonical(CanonicalPoint(0.5, math.pi / 6))
        assert s.sx == pytest.approx(0.2165, abs=1e-4)
        assert s.sy == pytest.approx(0.3750, abs=1e-4)
        assert s.sz == pytest.approx(0.25)
        assert sphere_defect(s) < 1e-15

    def test_outside_domain(self):
        with pytest.raises(DomainError):
            bloch_from_canonical(CanonicalPoint(1.5, 0.0))

    def test_round_trip(self):
        for p, q in [(0.3, 0.1), (-0.7, 2.9), (0.0, 1.5)]:
            back = canonical_from_bloch(bloch_from_canonical(CanonicalPoint(p, q)))
            assert back.p == pytest.approx(p, abs=1e-12)
            assert back.q == pytest.approx(q, abs=1e-12)
            assert not back.at_pole

    def test_pole_flag(self):
        pt = canonical_from_bloch(BlochVector(0.0, 0.0, -0.5))
        assert pt.at_pole
        assert pt.p == -1.0
        assert pt.q == 0.0

    def test_q_range(self):
        pt = canonical_from_bloch(BlochVector(0.0, -0.5, 0.0))
        assert 0.0 <= pt.q < math.pi
        assert pt.q == pytest.approx(3 * math.pi / 4)


class TestSpinors:
    """Spinor to Bloch vector conversions."""

    def test_level_one_is_north_pole(self):
        s = bloch_from_spinor(SpinorState(1.0 + 0j, 0j))
        assert s == pytest.approx((0.0, 0.0, 0.5))

    def test_unnormalized(self):
        s = bloch_from_spinor(SpinorState(2.0 + 0j, 2.0 + 0j))
        assert s == pytest.approx((0.5, 0.0, 0.0))

    def test_zero_spinor(self):
        with pytest.raises(DomainError):
            bloch_from_spinor(SpinorState(0j, 0j))
        with pytest.raises(DomainError):
            SpinorState(0j, 0j).normalized()

    def test_normalized(self):
        psi = SpinorState(3.0 + 0j, 4j).normalized()
        assert psi.norm == pytest.approx(1.0)

    def test_inverse(self):
        s = bloch_from_angles(1.1, -2.0)
        psi = spinor_from_bloch(s, norm=0.3)
        assert psi.norm == pytest.approx(0.3)
        assert psi.psi2.imag == 0.0
        assert bloch_from_spinor(psi) == pytest.approx(s, abs=1e-14)


class TestSphere:
    """Angles, projection and trajectories."""

    def test_angles(self):
        theta, phi = angles_from_bloch(bloch_from_angles(0.4, 1.2))
        assert theta == pytest.approx(0.4)
        assert phi == pytest.approx(1.2)

    def test_projection(self):
        projected, defect = project_to_sphere([1.0, 0.0, 0.0])
        np.testing.assert_allclose(projected, [0.5, 0.0, 0.0])
        assert defect == pytest.approx(0.75)

    def test_project_zero(self):
        with pytest.raises(DomainError):
            project_to_sphere([0.0, 0.0, 0.0])

    def test_trajectory_validation(self):
        times = np.array([0.0, 1.0])
        states = np.array([[0.0, 0.0, 0.5], [0.5, 0.0, 0.0]])
        Trajectory(times, states, np.array([1.0, 0.9])).validate()
        with pytest.raises(ConsistencyError):
            Trajectory(times[::-1], states, np.array([1.0, 0.9])).validate()
        with pytest.raises(ConsistencyError):
            Trajectory(times, 2 * states, np.array([1.0, 0.9])).validate()

    def test_trajectory_frame(self):
        times = np.array([0.0, 1.0])
        states = np.array([[0.0, 0.0, 0.5], [0.5, 0.0, 0.0]])
        df = Trajectory(times, states, np.array([1.0, 0.9])).to_frame()
        assert list(df.columns) == ["t", "sx", "sy", "sz", "norm"]
        assert len(df) == 2
