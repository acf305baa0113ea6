"""Hilbert-space construction, Hamiltonians and unitary dynamics.

This module owns the exact-diagonalisation layer for small registers: a donor
electron, the donor nucleus and a handful of :class:`NuclearSite` spins, all
spin-1/2.  The register Hamiltonian (in MHz, see :mod:`donorspin.constants`
for unit conventions) is

    H = ge*B*Sz  -  sum_i gn_i*B*Iz_i  +  A_P (S.I_P)
        + sum_i (Azz_i Sz Iz_i + Azx_i Sz Ix_i)
        + sum_{i<j} b_ij (2 Iz_i Iz_j - (I+I- + I-I+)/2)

with the donor-nucleus coupling kept fully isotropic (its second-order shift
of ~0.36 MHz is resolved by the measurements) while bath sites carry only the
secular and pseudo-secular terms.  When the donor is ionised the electron is
absent from the dynamics: all hyperfine terms vanish and the basis contains
nuclei only.

Dense matrices throughout; the exact path is capped at 12 spins.  Larger
baths belong to :mod:`donorspin.baths`.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import constants as const
from .errors import BasisMismatchError, CapacityError

SX = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
SY = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
SP = np.array([[0, 1], [0, 0]], dtype=complex)
SM = np.array([[0, 0], [1, 0]], dtype=complex)
E2 = np.eye(2, dtype=complex)

HERMITICITY_TOL = 1e-9


class ChargeState(enum.Enum):
    NEUTRAL = "neutral"
    IONIZED = "ionized"


@dataclass(frozen=True)
class NuclearSite:
    """A 29Si bath site.

    position: lattice vector in units of a0/4 (integer triple);
    gyromagnetic in MHz/T; hyperfine_zz / hyperfine_zx in MHz;
    orbit_id labels the symmetry orbit of the site (-1 = unassigned).
    """

    position: tuple
    gyromagnetic: float = const.GAMMA_SI29_MHZ_PER_T
    hyperfine_zz: float = 0.0
    hyperfine_zx: float = 0.0
    orbit_id: int = -1

    def __post_init__(self):
        if not (0.0 <= self.hyperfine_zz <= const.SI29_HYPERFINE_MAX_MHZ):
            warnings.warn(
                "site hyperfine outside the observed ENDOR range "
                "(0-%.0f MHz)" % const.SI29_HYPERFINE_MAX_MHZ,
                stacklevel=2,
            )

    def radius_nm(self, lattice_constant=const.LATTICE_CONSTANT_NM):
        return float(np.linalg.norm(self.position) * lattice_constant / 4.0)


@dataclass(frozen=True)
class DonorNucleus:
    gyromagnetic: float = const.GAMMA_P31_MHZ_PER_T
    hyperfine: float = const.A_P31_MHZ


@dataclass(frozen=True)
class SpinRegister:
    """Donor electron + donor nucleus + ordered 29Si sites.

    The basis ordering is electron (when neutral), donor nucleus, then sites
    in list order; basis index 0 of each spin is m = +1/2.  ``donor_nucleus``
    may be None for reduced (electron-only or electron+site) registers.
    """

    electron_gyromagnetic: float = const.GAMMA_E_MHZ_PER_T
    charge_state: ChargeState = ChargeState.NEUTRAL
    donor_nucleus: DonorNucleus | None = dc_field(default_factory=DonorNucleus)
    sites: tuple = ()
    field_axis: tuple = (0.0, 0.0, 1.0)

    @property
    def spin_labels(self):
        labels = [] if self.charge_state is ChargeState.IONIZED else ["e"]
        if self.donor_nucleus is not None:
            labels.append("P")
        labels.extend("si%d" % k for k in range(len(self.sites)))
        return tuple(labels)

    @property
    def dim(self):
        return 2 ** len(self.spin_labels)

    def site_label(self, index):
        return "si%d" % index

    def ionized(self):
        return SpinRegister(self.electron_gyromagnetic, ChargeState.IONIZED,
                            self.donor_nucleus, self.sites, self.field_axis)


class Basis:
    """Ordered spin labels of a register; provides single-spin operators."""

    def __init__(self, labels):
        self.labels = tuple(labels)
        self.dim = 2 ** len(self.labels)

    def __eq__(self, other):
        return isinstance(other, Basis) and self.labels == other.labels

    def __hash__(self):
        return hash(self.labels)

    def index(self, label):
        return self.labels.index(label)

    def op(self, label, mat):
        """Embed a single-spin operator at the given label position."""
        k = self.index(label)
        out = np.eye(1, dtype=complex)
        for i in range(len(self.labels)):
            out = np.kron(out, mat if i == k else E2)
        return out

    def basis_state_index(self, occupations):
        """Basis index from per-spin occupations (0 = m+1/2, 1 = m-1/2)."""
        idx = 0
        for occ in occupations:
            idx = idx * 2 + int(occ)
        return idx

    def occupation(self, index):
        n = len(self.labels)
        return tuple((index >> (n - 1 - k)) & 1 for k in range(n))


class Hamiltonian:
    """Dense Hermitian matrix in MHz with its basis descriptor and field."""

    def __init__(self, matrix, basis, field):
        matrix = np.asarray(matrix, dtype=complex)
        dev = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
        if dev > HERMITICITY_TOL:
            raise ValueError("Hamiltonian not Hermitian (max dev %.2e MHz)" % dev)
        self.matrix = 0.5 * (matrix + matrix.conj().T)
        self.basis = basis
        self.field = field
        self._eig = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    def eig(self):
        """Cached (eigenvalues, eigenvectors) from exact diagonalisation."""
        if self._eig is None:
            self._eig = np.linalg.eigh(self.matrix)
        return self._eig


class QuantumState:
    """Density operator with its basis descriptor."""

    def __init__(self, rho, basis, validate=True):
        self.rho = np.asarray(rho, dtype=complex)
        self.basis = basis
        if validate:
            self.validate()

    def validate(self):
        tr = np.trace(self.rho).real
        if abs(tr - 1.0) > 1e-9:
            raise ValueError("state trace %.3e != 1" % tr)
        if np.max(np.abs(self.rho - self.rho.conj().T)) > 1e-9:
            raise ValueError("state not Hermitian")
        ev = np.linalg.eigvalsh(self.rho)
        if ev.min() < -1e-9:
            raise ValueError("negative eigenvalue %.3e" % ev.min())
        return self

    @classmethod
    def pure(cls, amplitudes, basis):
        v = np.asarray(amplitudes, dtype=complex)
        v = v / np.linalg.norm(v)
        return cls(np.outer(v, v.conj()), basis, validate=False)

    @classmethod
    def basis_state(cls, basis, occupations):
        v = np.zeros(basis.dim, dtype=complex)
        v[basis.basis_state_index(occupations)] = 1.0
        return cls.pure(v, basis)

    @classmethod
    def maximally_mixed(cls, basis):
        return cls(np.eye(basis.dim) / basis.dim, basis, validate=False)


def register_basis(register):
    return Basis(register.spin_labels)


def dipolar_coupling(site_i, site_j, lattice_constant=const.LATTICE_CONSTANT_NM):
    """Secular dipolar coupling between two sites, in MHz.

    b = (mu0/4pi) * h * gi * gj * (1 - 3 cos^2 theta) / r^3 with gyromagnetic
    ratios in Hz/T and theta measured from the z (field) axis.
    """
    ri = np.asarray(site_i.position, dtype=float) * lattice_constant / 4.0
    rj = np.asarray(site_j.position, dtype=float) * lattice_constant / 4.0
    dr = rj - ri
    r_nm = np.linalg.norm(dr)
    if r_nm == 0.0:
        raise ValueError("coincident sites %s" % (site_i.position,))
    cos_t = dr[2] / r_nm
    gi_hz = site_i.gyromagnetic * 1e6
    gj_hz = site_j.gyromagnetic * 1e6
    r_m = r_nm * 1e-9
    b_hz = (const.MU0 / (4 * np.pi)) * const.PLANCK_H * gi_hz * gj_hz \
        * (1.0 - 3.0 * cos_t ** 2) / r_m ** 3
    return b_hz * 1e-6


def build_hamiltonian(register, field, dipole_floor=const.DIPOLE_FLOOR_MHZ,
                      lattice_constant=const.LATTICE_CONSTANT_NM):
    """Register Hamiltonian at the given field (T), in MHz.

    Ionised registers carry no electron: the Zeeman and all hyperfine terms
    involving it are absent.  Site-site dipolar couplings below
    ``dipole_floor`` are dropped.
    """
    if field < 0:
        raise ValueError("field must be >= 0")
    basis = register_basis(register)
    if basis.dim > const.MAX_HILBERT_DIM:
        raise CapacityError(
            "register dimension %d exceeds cap %d; use the bath models"
            % (basis.dim, const.MAX_HILBERT_DIM))
    H = np.zeros((basis.dim, basis.dim), dtype=complex)
    neutral = register.charge_state is ChargeState.NEUTRAL

    if neutral:
        H += register.electron_gyromagnetic * field * basis.op("e", SZ)
    # nuclear Zeeman terms
    if register.donor_nucleus is not None:
        H -= register.donor_nucleus.gyromagnetic * field * basis.op("P", SZ)
    for k, site in enumerate(register.sites):
        H -= site.gyromagnetic * field * basis.op(register.site_label(k), SZ)

    if neutral:
        if register.donor_nucleus is not None:
            # donor nucleus: full isotropic coupling
            a = register.donor_nucleus.hyperfine
            for se, sn in ((SX, SX), (SY, SY), (SZ, SZ)):
                H += a * basis.op("e", se) @ basis.op("P", sn)
        # bath sites: secular + pseudo-secular
        sz_e = basis.op("e", SZ)
        for k, site in enumerate(register.sites):
            lab = register.site_label(k)
            H += site.hyperfine_zz * sz_e @ basis.op(lab, SZ)
            if site.hyperfine_zx:
                H += site.hyperfine_zx * sz_e @ basis.op(lab, SX)

    # homonuclear dipolar coupling among sites
    for i in range(len(register.sites)):
        for j in range(i + 1, len(register.sites)):
            b = dipolar_coupling(register.sites[i], register.sites[j],
                                 lattice_constant)
            if abs(b) < dipole_floor:
                continue
            li, lj = register.site_label(i), register.site_label(j)
            H += b * (2.0 * basis.op(li, SZ) @ basis.op(lj, SZ)
                      - 0.5 * (basis.op(li, SP) @ basis.op(lj, SM)
                               + basis.op(li, SM) @ basis.op(lj, SP)))
    return Hamiltonian(H, basis, field)


def _dominant_occupations(ham):
    evals, evecs = ham.eig()
    dominant = np.argmax(np.abs(evecs) ** 2, axis=0)
    return evals, evecs, [ham.basis.occupation(d) for d in dominant]


def transition_frequencies(ham, channel, weight_floor=1e-6):
    """Transitions of one spin: (frequency MHz, weight) pairs.

    ``channel`` is ``"electron"`` or a nuclear spin label ("P", "si0", ...).
    A level pair qualifies when the dominant characters of the two eigenstates
    flip the selected spin and agree elsewhere; the weight is the squared
    matrix element of the transverse operator (2*Sx of the target), equal to 1
    for a fully allowed transition.  Returns an empty list when the channel
    spin is absent (e.g. the electron of an ionised register).
    """
    label = "e" if channel == "electron" else channel
    if label not in ham.basis.labels:
        return []
    k = ham.basis.index(label)
    evals, evecs, doms = _dominant_occupations(ham)
    sx2 = 2.0 * ham.basis.op(label, SX)
    out = []
    for i in range(ham.dim):
        for j in range(i + 1, ham.dim):
            di, dj = doms[i], doms[j]
            if di[k] == dj[k]:
                continue
            if any(di[m] != dj[m] for m in range(len(di)) if m != k):
                continue
            w = abs(evecs[:, i].conj() @ sx2 @ evecs[:, j]) ** 2
            if w >= weight_floor:
                out.append((float(evals[j] - evals[i]), float(w)))
    out.sort()
    return out


def find_transition(ham, label, spectator_occupations=None):
    """Eigenlevel pair (i, j) of the target spin's transition.

    ``spectator_occupations`` maps other spin labels to occupations
    (0 = m+1/2, 1 = m-1/2) selecting the manifold; unspecified spectators
    must simply agree between the two levels.
    """
    spectator_occupations = spectator_occupations or {}
    k = ham.basis.index(label)
    _, _, doms = _dominant_occupations(ham)
    want = {ham.basis.index(l): occ for l, occ in spectator_occupations.items()}
    for i in range(ham.dim):
        for j in range(i + 1, ham.dim):
            di, dj = doms[i], doms[j]
            if di[k] == dj[k]:
                continue
            if any(di[m] != dj[m] for m in range(len(di)) if m != k):
                continue
            if all(di[m] == occ for m, occ in want.items()):
                return (i, j)
    raise ValueError("no transition of %r in the requested manifold" % label)


def evolve(state, ham, duration):
    """Unitary evolution exp(-2*pi*i*H*t) rho exp(+2*pi*i*H*t), t in us."""
    if duration < 0:
        raise ValueError("duration must be >= 0")
    if state.basis != ham.basis:
        raise BasisMismatchError("state and Hamiltonian bases differ")
    if duration == 0:
        return state
    evals, evecs = ham.eig()
    phases = np.exp(-2j * np.pi * evals * duration)
    u = (evecs * phases) @ evecs.conj().T
    return QuantumState(u @ state.rho @ u.conj().T, state.basis, validate=False)


def coherence(state, ham, transition):
    """Off-diagonal element <i|rho|j> in the energy eigenbasis of ``ham``.

    ``transition`` is a pair of eigenlevel indices (as from
    :func:`find_transition`); the magnitude is bounded by 1/2.
    """
    i, j = transition
    if not (0 <= i < ham.dim and 0 <= j < ham.dim and i != j):
        raise ValueError("undefined transition %r" % (transition,))
    if state.basis != ham.basis:
        raise BasisMismatchError("state and Hamiltonian bases differ")
    _, evecs = ham.eig()
    return complex(evecs[:, i].conj() @ state.rho @ evecs[:, j])


def expectation(state, operator):
    return complex(np.trace(state.rho @ operator))
