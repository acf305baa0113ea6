import numpy as np
import pytest

from donorspin.errors import CapacityError
from donorspin.lattice import (
    CatalogEntry,
    EnvelopeModel,
    HyperfineCatalog,
    LatticeConfig,
    assign_hyperfine,
    candidate_positions,
    equivalent_orbits,
    generate_lattice,
    is_lattice_site,
    orbit_key,
    probe_site_for_hyperfine,
    register_from_json,
    register_to_json,
)
from donorspin.spincore import NuclearSite


class TestGenerateLattice:
    def test_zero_abundance_empty(self):
        cfg = LatticeConfig(radius=2.0, abundance=0.0, seed=1)
        assert generate_lattice(cfg) == []

    def test_full_occupation_density(self):
        # diamond cubic has 8 atoms per conventional cell; a ball of radius R
        # then holds ~ 8 * (4/3 pi R^3) / a0^3 sites
        cfg = LatticeConfig(radius=1.6, abundance=1.0, seed=1)
        sites = generate_lattice(cfg)
        expected = 8 * (4 / 3 * np.pi * cfg.radius**3) / cfg.lattice_constant**3
        assert len(sites) == pytest.approx(expected, rel=0.15)
        assert all(is_lattice_site(s.position) for s in sites)

    def test_binomial_statistics(self):
        cfg = LatticeConfig(radius=2.5, abundance=0.047, seed=7)
        n_candidates = len(candidate_positions(cfg.radius))
        count = len(generate_lattice(cfg))
        mean = n_candidates * cfg.abundance
        sigma = np.sqrt(n_candidates * cfg.abundance * (1 - cfg.abundance))
        assert abs(count - mean) < 5 * sigma

    def test_determinism(self):
        cfg = LatticeConfig(radius=2.5, abundance=0.047, seed=123)
        a = generate_lattice(cfg)
        b = generate_lattice(cfg)
        assert [s.position for s in a] == [s.position for s in b]

    def test_donor_site_excluded(self):
        cfg = LatticeConfig(radius=1.0, abundance=1.0, seed=1)
        assert (0, 0, 0) not in [s.position for s in generate_lattice(cfg)]

    def test_capacity_error(self):
        with pytest.raises(CapacityError):
            candidate_positions(radius_nm=80.0)

    def test_invalid_config(self):
        with pytest.raises(ValueError):
            LatticeConfig(radius=2.0, abundance=1.5)
        with pytest.raises(ValueError):
            LatticeConfig(radius=-1.0)


class TestOrbits:
    def test_axis_permutation_same_orbit(self):
        assert orbit_key((4, 0, 0)) == orbit_key((0, 4, 0))

    def test_orbit_partition_properties(self):
        cfg = LatticeConfig(radius=1.2, abundance=1.0, seed=1)
        reg, _ = assign_hyperfine(generate_lattice(cfg))
        orbits = equivalent_orbits(reg.sites)
        # partition: every site exactly once
        flat = sorted(i for o in orbits for i in o)
        assert flat == list(range(len(reg.sites)))
        # orbits refine distance shells, and couplings match inside an orbit
        for o in orbits:
            radii = {round(reg.sites[i].radius_nm(), 9) for i in o}
            azz = {reg.sites[i].hyperfine_zz for i in o}
            assert len(radii) == 1
            assert len(azz) == 1

    def test_nearest_shell_multiplicities(self):
        # T_d orbits of the first diamond shells: 4 (111-type), 12 (022-type),
        # 12 (113-type), 6 (004-type); all in {4, 6, 12, 24}
        cfg = LatticeConfig(radius=0.61, abundance=1.0, seed=1)
        reg, _ = assign_hyperfine(generate_lattice(cfg))
        orbits = equivalent_orbits(reg.sites)
        by_r = sorted(orbits, key=lambda o: reg.sites[o[0]].radius_nm())
        sizes = [len(o) for o in by_r]
        assert sizes[0] == 4
        assert sizes[1] == 12
        assert set(sizes) <= {4, 6, 12, 24}

    def test_different_couplings_different_orbits(self):
        a = NuclearSite(position=(4, 0, 0), hyperfine_zz=1.0)
        b = NuclearSite(position=(0, 4, 0), hyperfine_zz=2.0)
        orbits = equivalent_orbits([a, b], tolerance=0.1)
        assert len(orbits) == 2


class TestAssignHyperfine:
    def test_envelope_decay(self):
        env = EnvelopeModel()
        near = probe_site_for_hyperfine(4.0, env)
        assert env.a_zz(60.0) < 1e-20
        assert near.hyperfine_zz == pytest.approx(4.0, rel=0.25)

    def test_envelope_monotone(self):
        env = EnvelopeModel()
        r = np.linspace(0.3, 8.0, 200)
        a = env.a_zz(r)
        assert np.all(np.diff(a) <= 0)

    def test_zero_anisotropy(self):
        cfg = LatticeConfig(radius=1.2, abundance=0.3, seed=5)
        reg, _ = assign_hyperfine(generate_lattice(cfg),
                                  envelope=EnvelopeModel(anisotropy=0.0))
        assert all(s.hyperfine_zx == 0.0 for s in reg.sites)

    def test_catalog_assigns_pinned_shell(self):
        cfg = LatticeConfig(radius=0.75, abundance=1.0, seed=1)
        reg, meta = assign_hyperfine(generate_lattice(cfg), source="catalog")
        couplings = {s.hyperfine_zz for s in reg.sites}
        # catalog entries are consumed nearest-shell-first
        assert 5.97 in couplings
        assert meta["catalog_fallback_sites"] == 0

    def test_catalog_contains_measured_values(self):
        cat = HyperfineCatalog()
        values = {e.a_zz for e in cat.entries}
        assert 4.03 in values and 2.23 in values

    def test_catalog_exhaustion_falls_back(self):
        with pytest.warns(UserWarning):
            cfg = LatticeConfig(radius=1.8, abundance=1.0, seed=2)
            reg, meta = assign_hyperfine(generate_lattice(cfg), source="catalog")
        assert meta["catalog_fallback_sites"] > 0
        assert len(reg.sites) > 0

    def test_catalog_validation(self):
        with pytest.raises(ValueError):
            HyperfineCatalog(entries=(CatalogEntry("bad", 9.0, 0.1, 4),))


class TestJsonRoundTrip:
    def test_round_trip(self):
        cfg = LatticeConfig(radius=1.2, abundance=0.4, seed=11)
        reg, meta = assign_hyperfine(generate_lattice(cfg))
        text = register_to_json(reg, meta)
        reg2, meta2 = register_from_json(text)
        assert reg2 == reg
        assert meta2 == meta

    def test_rejects_foreign_document(self):
        with pytest.raises(ValueError):
            register_from_json('{"format": "other"}')
