"""Donor spin-register simulator for natural silicon.

Subpackages cover the exact small-register dynamics (:mod:`spincore`),
lattice/bath generation (:mod:`lattice`), pulse sequences (:mod:`sequences`),
stochastic decoherence models (:mod:`baths`), donor charge dynamics
(:mod:`charge`), figure-level experiments (:mod:`experiments`) and the CLI
(:mod:`cli`).
"""

__version__ = "0.1.0"

from .spincore import (  # noqa: F401
    ChargeState,
    DonorNucleus,
    NuclearSite,
    SpinRegister,
    build_hamiltonian,
    coherence,
    dipolar_coupling,
    evolve,
    transition_frequencies,
)
