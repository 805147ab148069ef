import numpy as np
import pytest

from ksmelnikov.errors import ValidationError
from ksmelnikov.spectral import (
    DomainConfig,
    ModalState,
    RealField,
    from_physical,
    growth_rates,
    ks_rhs,
    linear_growth_rate,
    odd_coordinates,
    project_modes,
    real_coordinates,
    sine_state,
    state_from_odd,
    state_from_real,
    to_physical,
    zero_state,
)


def random_state(dom, rng, amplitude=0.3, odd=False):
    c = np.zeros(dom.n_modes + 1, dtype=np.complex128)
    if odd:
        c[1:] = 1j * rng.normal(0, amplitude, dom.n_modes)
    else:
        c[1:] = rng.normal(0, amplitude, dom.n_modes) + 1j * rng.normal(0, amplitude, dom.n_modes)
    return ModalState(c)


def pseudo_spectral_rhs(state, dom, grid_factor=4):
    """Independent oracle: dealiased grid evaluation of -u_xx - u_xxxx - u u_x."""
    n = dom.n_modes
    m = grid_factor * n  # > 3N+1, so the quadratic product cannot alias
    spec = np.zeros(m // 2 + 1, dtype=np.complex128)
    spec[: n + 1] = state.coeffs
    u = m * np.fft.irfft(spec, n=m)
    k_grid = np.arange(m // 2 + 1) * dom.q
    ux = m * np.fft.irfft(spec * (1j * k_grid), n=m)
    nonlin_hat = np.fft.rfft(-u * ux) / m
    out = growth_rates(dom) * state.coeffs + nonlin_hat[: n + 1]
    out[0] = 0.0
    return out


class TestDomainConfig:
    def test_q_recomputed_from_length(self):
        dom = DomainConfig(22.0, 32)
        assert dom.q == 2 * np.pi / 22.0

    @pytest.mark.parametrize("length,n", [(-1.0, 32), (0.0, 32), (22.0, 0)])
    def test_invalid(self, length, n):
        with pytest.raises(ValidationError):
            DomainConfig(length, n)


class TestGrowthRate:
    def test_zero_mode(self):
        assert linear_growth_rate(0, DomainConfig(17.0, 8)) == 0.0

    def test_first_mode_at_22(self):
        dom = DomainConfig(22.0, 32)
        q = dom.q
        val = linear_growth_rate(1, dom)
        assert val == pytest.approx(q**2 - q**4, rel=1e-15)
        assert val == pytest.approx(0.07492, abs=1e-5)

    def test_fourth_mode_damped(self):
        # kq = 8 pi / 22 > 1, so the fourth derivative wins
        assert linear_growth_rate(4, DomainConfig(22.0, 32)) < 0

    def test_out_of_range(self):
        with pytest.raises(ValidationError):
            linear_growth_rate(33, DomainConfig(22.0, 32))


class TestKsRhs:
    def test_origin_is_steady(self, dom):
        assert np.all(ks_rhs(zero_state(dom), dom) == 0)

    def test_single_mode_expansion(self, dom):
        # a_1 = c feeds a_1 linearly and a_2 through the only surviving
        # convolution pair (m=1, k-m=1)
        c = 0.3 - 0.2j
        st = np.zeros(dom.n_modes + 1, dtype=np.complex128)
        st[1] = c
        out = ks_rhs(ModalState(st), dom)
        q = dom.q
        assert out[1] == pytest.approx((q**2 - q**4) * c, rel=1e-14)
        assert out[2] == pytest.approx(-1j * q * c * c, rel=1e-14)
        assert np.all(out[3:] == 0)
        assert out[0] == 0

    def test_matches_dealiased_grid_oracle(self, dom, rng):
        for _ in range(5):
            st = random_state(dom, rng)
            mine = ks_rhs(st, dom)
            ref = pseudo_spectral_rhs(st, dom)
            scale = np.max(np.abs(ref))
            assert np.max(np.abs(mine - ref)) <= 1e-10 * scale

    def test_zero_mean_conserved(self, dom, rng):
        for _ in range(20):
            assert ks_rhs(random_state(dom, rng), dom)[0] == 0.0

    def test_odd_subspace_invariant(self, dom, rng):
        for _ in range(100):
            st = random_state(dom, rng, odd=True)
            out = ks_rhs(st, dom)
            assert np.max(np.abs(out.real)) <= 1e-12 * max(1.0, np.max(np.abs(out)))

    def test_energy_balance(self, dom, rng):
        # nonlinear term conserves sum |a_k|^2 over the full line exactly
        # in the symmetric truncation
        for _ in range(10):
            st = random_state(dom, rng)
            out = ks_rhs(st, dom)
            # d/dt (1/2) sum_{-N..N} |a_k|^2 = 2 Re sum_{k>=1} conj(a_k) adot_k
            rate = 2.0 * np.sum(np.real(np.conj(st.coeffs[1:]) * out[1:]))
            linear = 2.0 * np.sum(growth_rates(dom)[1:] * np.abs(st.coeffs[1:]) ** 2)
            assert rate == pytest.approx(linear, rel=1e-10, abs=1e-12)


class TestPhysicalTransforms:
    def test_single_sine_convention(self):
        dom = DomainConfig(22.0, 8)
        field = to_physical(sine_state(dom, 1, 1.0), 64)
        x = np.arange(64) * dom.length / 64
        assert np.max(np.abs(field.samples - np.sin(dom.q * x))) <= 1e-12

    def test_zero_state(self, dom):
        assert np.all(to_physical(zero_state(dom), 128).samples == 0)

    def test_round_trip(self, dom, rng):
        for _ in range(10):
            st = random_state(dom, rng)
            back = from_physical(to_physical(st, 4 * dom.n_modes), dom)
            scale = np.max(np.abs(st.coeffs))
            assert np.max(np.abs(back.coeffs - st.coeffs)) <= 1e-12 * scale

    def test_rejects_lossy_grid(self, dom):
        with pytest.raises(ValidationError):
            to_physical(zero_state(dom), 2 * dom.n_modes)
        field = RealField(np.zeros(2 * dom.n_modes - 1))
        with pytest.raises(ValidationError):
            from_physical(field, dom)

    def test_rejects_nonzero_mean(self, dom):
        field = RealField(np.ones(4 * dom.n_modes))
        with pytest.raises(ValidationError):
            from_physical(field, dom)


class TestProjection:
    def test_zero(self, dom):
        assert project_modes(zero_state(dom)) == (0.0, 0.0)

    def test_sine_amplitude(self, dom):
        assert project_modes(sine_state(dom, 1, 1.0)) == (1.0, 0.0)

    def test_steady_state_projection_constant(self, anchor, odd_system):
        # integrating from an equilibrium leaves the projection fixed
        from ksmelnikov.integrators import IntegrationConfig

        st, _ = anchor
        path = odd_system.integrate(st.x, IntegrationConfig(dt=1e-3, horizon=10.0, sample_stride=100))
        m = np.array([odd_system.project_modes(s) for s in path.states])
        assert np.max(np.abs(m - m[0])) <= 1e-8


class TestCoordinates:
    def test_modal_state_rejects_nonzero_mean(self, dom):
        c = np.zeros(dom.n_modes + 1, dtype=np.complex128)
        c[0] = 0.1
        with pytest.raises(ValidationError):
            ModalState(c)

    def test_imag_slot(self, dom):
        x = real_coordinates(sine_state(dom, 1, 1.0))
        expected = np.zeros(2 * dom.n_modes)
        expected[1] = -0.5
        assert np.array_equal(x, expected)

    def test_real_round_trip_exact(self, dom, rng):
        st = random_state(dom, rng)
        back = state_from_real(real_coordinates(st), dom)
        assert np.array_equal(back.coeffs, st.coeffs)

    def test_odd_round_trip_exact(self, dom, rng):
        st = random_state(dom, rng, odd=True)
        back = state_from_odd(odd_coordinates(st), dom)
        assert np.array_equal(back.coeffs, st.coeffs)

    def test_odd_coordinates_reject_full_state(self, dom, rng):
        st = random_state(dom, rng, odd=False)
        with pytest.raises(ValidationError):
            odd_coordinates(st)
