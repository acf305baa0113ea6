import numpy as np
import pytest

from donorspin import constants as const
from donorspin.errors import BasisMismatchError, CapacityError
from donorspin.spincore import (
    ChargeState,
    DonorNucleus,
    NuclearSite,
    QuantumState,
    SpinRegister,
    build_hamiltonian,
    coherence,
    dipolar_coupling,
    evolve,
    expectation,
    find_transition,
    register_basis,
    transition_frequencies,
)

B_ENDOR = 0.3442


def p31_register():
    return SpinRegister(sites=())


def site_at(pos, azz=0.0, azx=0.0):
    return NuclearSite(position=pos, hyperfine_zz=azz, hyperfine_zx=azx)


class TestBuildHamiltonian:
    def test_electron_zeeman_splitting(self):
        reg = SpinRegister(donor_nucleus=None)
        ham = build_hamiltonian(reg, 0.3462)
        evals = np.linalg.eigvalsh(ham.matrix)
        # gamma_e * B = 27972 * 0.3462
        assert evals[1] - evals[0] == pytest.approx(9683.9064, abs=1e-6)

    def test_zero_field_isotropic_coupling_spectrum(self):
        reg = p31_register()
        ham = build_hamiltonian(reg, 0.0)
        evals = np.sort(np.linalg.eigvalsh(ham.matrix))
        a = const.A_P31_MHZ
        assert evals[0] == pytest.approx(-0.75 * a, abs=1e-9)
        assert np.allclose(evals[1:], 0.25 * a, atol=1e-9)

    def test_dimension_with_two_sites(self):
        reg = SpinRegister(sites=(site_at((4, 0, 0), 4.0), site_at((0, 4, 0), 4.0)))
        assert build_hamiltonian(reg, B_ENDOR).dim == 16

    def test_ionized_register_drops_electron_and_hyperfine(self):
        reg = SpinRegister(sites=(site_at((4, 0, 0), 4.0),)).ionized()
        ham = build_hamiltonian(reg, B_ENDOR)
        assert ham.dim == 4
        freqs = transition_frequencies(ham, "si0")
        for f, _ in freqs:
            assert f == pytest.approx(const.GAMMA_SI29_MHZ_PER_T * B_ENDOR, abs=1e-9)
        assert transition_frequencies(ham, "electron") == []

    def test_capacity_error(self):
        sites = tuple(site_at((4 + 8 * k, 0, 0), 0.1) for k in range(12))
        with pytest.raises(CapacityError):
            build_hamiltonian(SpinRegister(sites=sites), B_ENDOR)

    def test_hermiticity(self):
        reg = SpinRegister(sites=(site_at((1, 1, 1), 3.0, 0.3),))
        ham = build_hamiltonian(reg, B_ENDOR)
        assert np.max(np.abs(ham.matrix - ham.matrix.conj().T)) < 1e-9


class TestDipolarCoupling:
    def test_magic_angle(self):
        # theta = 54.7356 deg: 1 - 3cos^2 = 0.  Construct off-lattice via
        # positions (1,0,sqrt(1/2)) scaled: use direct ratio 1-3cos2=0.
        c = np.sqrt(1.0 / 3.0)
        s = np.sqrt(2.0 / 3.0)
        a = NuclearSite(position=(0, 0, 0))
        b = NuclearSite(position=(10 * s, 0, 10 * c))
        assert abs(dipolar_coupling(a, b)) < 1e-12

    def test_parallel_vs_perpendicular_ratio(self):
        a = NuclearSite(position=(0, 0, 0))
        par = NuclearSite(position=(0, 0, 4))
        perp = NuclearSite(position=(4, 0, 0))
        ratio = dipolar_coupling(a, par) / dipolar_coupling(a, perp)
        assert ratio == pytest.approx(-2.0, abs=1e-12)

    def test_nearest_neighbour_magnitude(self):
        # independent evaluation of the closed formula with literal constants
        g_hz = 8.46e6
        r_m = 0.543e-9
        expected_mhz = 1e-7 * 6.62607015e-34 * g_hz * g_hz * (1 - 3) / r_m**3 * 1e-6
        a = NuclearSite(position=(0, 0, 0))
        b = NuclearSite(position=(0, 0, 4))  # r = a0 along z
        got = dipolar_coupling(a, b)
        assert got == pytest.approx(expected_mhz, rel=1e-9)
        assert got == pytest.approx(-5.9e-5, rel=0.01)

    def test_coincident_sites_error(self):
        a = NuclearSite(position=(1, 1, 1))
        with pytest.raises(ValueError):
            dipolar_coupling(a, a)


class TestTransitionFrequencies:
    def test_p31_endor_branches(self):
        ham = build_hamiltonian(p31_register(), B_ENDOR)
        freqs = [f for f, w in transition_frequencies(ham, "P") if w > 0.5]
        assert len(freqs) == 2
        assert min(freqs) == pytest.approx(52.475, abs=0.05)

    def test_second_order_formula(self):
        # exact diagonalisation vs A/2 -+ gn*B -+ A^2/(4 fe) within 1 kHz
        ham = build_hamiltonian(p31_register(), B_ENDOR)
        lo, hi = sorted(f for f, w in transition_frequencies(ham, "P") if w > 0.5)
        a = const.A_P31_MHZ
        fn = const.GAMMA_P31_MHZ_PER_T * B_ENDOR
        fe = const.GAMMA_E_MHZ_PER_T * B_ENDOR
        shift = a * a / (4 * fe)
        assert abs(lo - (a / 2 - fn - shift)) < 1e-3
        assert abs(hi - (a / 2 + fn + shift)) < 1e-3

    def test_zero_hyperfine_gives_bare_zeeman(self):
        reg = SpinRegister(donor_nucleus=DonorNucleus(hyperfine=0.0))
        ham = build_hamiltonian(reg, B_ENDOR)
        for f, _ in transition_frequencies(ham, "P"):
            assert f == pytest.approx(const.GAMMA_P31_MHZ_PER_T * B_ENDOR, abs=1e-9)

    def test_si29_secular_branches(self):
        # exact-diagonalisation oracle: with secular-only coupling the two
        # branches sit at |gn*B -+ A/2| exactly
        reg = SpinRegister(donor_nucleus=None, sites=(site_at((4, 0, 0), 4.03),))
        ham = build_hamiltonian(reg, B_ENDOR)
        freqs = sorted(f for f, w in transition_frequencies(ham, "si0") if w > 0.5)
        nu = const.GAMMA_SI29_MHZ_PER_T * B_ENDOR
        assert freqs[0] == pytest.approx(abs(nu - 4.03 / 2), abs=1e-9)
        assert freqs[1] == pytest.approx(nu + 4.03 / 2, abs=1e-9)
        assert freqs[0] == pytest.approx(0.897, abs=2e-3)
        assert freqs[1] == pytest.approx(4.927, abs=2e-3)


class TestEvolveAndCoherence:
    def setup_method(self):
        self.reg = SpinRegister(donor_nucleus=None, electron_gyromagnetic=1.0)
        self.ham = build_hamiltonian(self.reg, 1.0)  # offset 1 MHz
        self.basis = register_basis(self.reg)
        self.plus_x = QuantumState.pure([1, 1], self.basis)

    def test_zero_duration_identity(self):
        out = evolve(self.plus_x, self.ham, 0.0)
        assert np.allclose(out.rho, self.plus_x.rho)

    def test_eigenstate_populations_static(self):
        state = QuantumState.basis_state(self.basis, (0,))
        out = evolve(state, self.ham, 17.3)
        assert np.allclose(np.diag(out.rho), np.diag(state.rho), atol=1e-12)

    def test_quarter_turn_to_plus_y(self):
        basis = self.basis
        sy = basis.op("e", np.array([[0, -0.5j], [0.5j, 0]], dtype=complex))
        out = evolve(self.plus_x, self.ham, 0.25)
        assert expectation(out, sy).real == pytest.approx(0.5, abs=1e-12)

    def test_coherence_of_mixed_and_pure(self):
        tr = find_transition(self.ham, "e")
        assert coherence(QuantumState.maximally_mixed(self.basis), self.ham, tr) == 0
        assert abs(coherence(self.plus_x, self.ham, tr)) == pytest.approx(0.5, abs=1e-12)

    def test_phase_advance(self):
        tr = find_transition(self.ham, "e")
        c0 = coherence(self.plus_x, self.ham, tr)
        t = 0.1375
        c1 = coherence(evolve(self.plus_x, self.ham, t), self.ham, tr)
        assert abs(c1) == pytest.approx(abs(c0), abs=1e-12)
        dphi = np.angle(c1 / c0)
        assert np.exp(1j * dphi) == pytest.approx(np.exp(2j * np.pi * 1.0 * t), abs=1e-9)

    def test_energy_conservation(self):
        state = self.plus_x
        e0 = expectation(state, self.ham.matrix).real
        e1 = expectation(evolve(state, self.ham, 3.21), self.ham.matrix).real
        assert e1 == pytest.approx(e0, rel=1e-8, abs=1e-10)

    def test_basis_mismatch(self):
        other = SpinRegister(donor_nucleus=DonorNucleus())
        ham2 = build_hamiltonian(other, 0.1)
        with pytest.raises(BasisMismatchError):
            evolve(self.plus_x, ham2, 1.0)

    def test_trace_and_hermiticity_preserved(self):
        reg = SpinRegister(sites=(site_at((4, 0, 0), 2.0, 0.2),))
        ham = build_hamiltonian(reg, B_ENDOR)
        basis = register_basis(reg)
        rng = np.random.default_rng(3)
        v = rng.normal(size=basis.dim) + 1j * rng.normal(size=basis.dim)
        state = QuantumState.pure(v, basis)
        out = evolve(state, ham, 2.5)
        assert np.trace(out.rho).real == pytest.approx(1.0, abs=1e-9)
        assert np.max(np.abs(out.rho - out.rho.conj().T)) < 1e-9


class TestBasisOrderIndependence:
    def test_site_permutation_preserves_spectra(self):
        s1 = site_at((4, 0, 0), 4.0, 0.3)
        s2 = site_at((0, 4, 4), 1.5, 0.1)
        rega = SpinRegister(sites=(s1, s2))
        regb = SpinRegister(sites=(s2, s1))
        hama = build_hamiltonian(rega, B_ENDOR)
        hamb = build_hamiltonian(regb, B_ENDOR)
        fa = [f for f, _ in transition_frequencies(hama, "si0")]
        fb = [f for f, _ in transition_frequencies(hamb, "si1")]
        assert np.allclose(sorted(fa), sorted(fb), atol=1e-9)
        ea = np.linalg.eigvalsh(hama.matrix)
        eb = np.linalg.eigvalsh(hamb.matrix)
        assert np.allclose(ea, eb, atol=1e-9)


def test_out_of_range_hyperfine_warns():
    with pytest.warns(UserWarning):
        NuclearSite(position=(1, 1, 1), hyperfine_zz=7.5)
