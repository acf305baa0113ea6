"""Timed multi-channel pulse sequences and their exact simulation.

A :class:`Sequence` is an ordered list of :class:`PulseEvent` values on the
MW (electron), RF (nuclear), Laser and Gate channels plus explicit Delay
markers.  The library constructors build the measurement blocks used by the
experiments: CPMG / XY-4 echo trains, the WAHUHA and pi-WAHUHA homonuclear
decoupling cycles, Davies ENDOR and the electron-nuclear coherence-transfer
(T2n) block.

``simulate`` runs a sequence against a small register with ideal
(instantaneous, perfectly selective) pulses by default; finite-duration
Rabi-drive pulses are available through ``model="finite"`` for checking the
selectivity precondition.  Rotation convention: a pulse about +X/+Y applies
exp(-i * angle * sigma_axis / 2); a "-x"/"-y" axis negates the generator.
Echo amplitudes are 2x the magnitude of the read-out transition coherence,
so a lossless echo is 1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
import scipy.linalg

from .errors import ScheduleError, SelectivityError
from .spincore import SX, SY, SZ, QuantumState, build_hamiltonian

CHANNELS = ("MW", "RF", "Laser", "Gate", "Delay")
PI = math.pi

# spin-up / spin-down occupation codes (basis index order)
UP, DOWN = 0, 1


@dataclass(frozen=True)
class Selectivity:
    """Address one spin's transition with other spins in definite states."""

    target: str  # spin label, or "si*" for all bath sites (collective RF)
    conditions: tuple = ()  # ((label, occupation), ...)


@dataclass(frozen=True)
class PulseEvent:
    channel: str
    start: float  # us
    duration: float = 0.0
    axis: str = "x"  # x, y, -x, -y
    angle: float = PI
    selectivity: Selectivity | None = None
    frequency: float | None = None  # MHz; frequency-addressed (ENDOR) pulses
    model: str = "ideal"  # ideal | finite
    label: str = ""

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise ValueError("unknown channel %r" % self.channel)
        if self.duration < 0:
            raise ValueError("negative duration")

    @property
    def end(self):
        return self.start + self.duration


@dataclass(frozen=True)
class Sequence:
    events: tuple
    cycle_length: float | None = None
    constraints: tuple = ()  # ("non-overlapping"|"co-scheduled", i, j)
    readout: dict | None = None
    name: str = ""

    def sorted_events(self):
        return tuple(sorted(self.events, key=lambda e: (e.start, e.channel)))

    def pulse_events(self):
        return [e for e in self.sorted_events() if e.channel in ("MW", "RF")]

    @property
    def total_length(self):
        if self.cycle_length is not None:
            return self.cycle_length
        return max((e.end for e in self.events), default=0.0)


@dataclass(frozen=True)
class Schedule:
    """Validated absolute-time schedule."""

    events: tuple
    total_length: float

    def rows(self):
        for k, e in enumerate(self.events):
            yield (k, e.channel, "%.9g" % e.start, "%.9g" % e.duration,
                   e.axis, "%.9g" % e.angle, e.label)


# ---------------------------------------------------------------------------
# sequence library
# ---------------------------------------------------------------------------

def _pulse(channel, start, axis, angle, sel=None, label=""):
    return PulseEvent(channel=channel, start=start, axis=axis, angle=angle,
                      selectivity=sel, label=label)


def cpmg(n, tau, channel="RF", selectivity=None, with_excitation=True):
    """pi/2 excitation then n pi pulses at tau, 3tau, ...; echo at 2n*tau."""
    if n < 1 or tau <= 0:
        raise ValueError("cpmg requires n >= 1 and tau > 0")
    events = []
    if with_excitation:
        events.append(_pulse(channel, 0.0, "x", PI / 2, selectivity, "excite"))
    for k in range(1, n + 1):
        events.append(_pulse(channel, (2 * k - 1) * tau, "y", PI, selectivity,
                             "pi%d" % k))
    readout = {"echo_time": 2 * n * tau}
    if selectivity is not None:
        readout["target"] = selectivity.target
        readout["conditions"] = selectivity.conditions
    elif channel == "MW":
        readout["target"] = "e"
    return Sequence(tuple(events), cycle_length=2 * n * tau,
                    readout=readout, name="cpmg%d" % n)


def xy4(tau, channel="RF", selectivity=None, with_excitation=True):
    """Four pi pulses with axes X, Y, X, Y on the CPMG timing grid."""
    base = cpmg(4, tau, channel, selectivity, with_excitation)
    axes = ["x", "y", "x", "y"]
    events = []
    k = 0
    for e in base.events:
        if e.angle == PI:
            events.append(replace(e, axis=axes[k]))
            k += 1
        else:
            events.append(e)
    return Sequence(tuple(events), cycle_length=base.cycle_length,
                    readout=base.readout, name="xy4")


def wahuha(tau, channel="RF", selectivity=None):
    """Classic 4-pulse homonuclear decoupling cycle (pi/2 pulses only).

    X, -Y, +Y, -X pulses separated by gaps tau, tau, 2tau, tau, tau; the
    zeroth-order toggling-frame average of a dipolar coupling vanishes.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    events = (
        _pulse(channel, tau, "x", PI / 2, selectivity),
        _pulse(channel, 2 * tau, "-y", PI / 2, selectivity),
        _pulse(channel, 4 * tau, "y", PI / 2, selectivity),
        _pulse(channel, 5 * tau, "-x", PI / 2, selectivity),
    )
    return Sequence(events, cycle_length=6 * tau, name="wahuha")


def pi_wahuha(tau, channel="RF", selectivity=None):
    """WAHUHA variant with five pi pulses refocusing static offsets.

    Y(pi) t X(pi/2) t X(pi) t -Y(pi/2) 2t Y(pi) 2t Y(pi/2) t X(pi) t
    -X(pi/2) t Y(pi); cycle length 10*tau plus pulse durations.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    events = (
        _pulse(channel, 0.0, "y", PI, selectivity),
        _pulse(channel, tau, "x", PI / 2, selectivity),
        _pulse(channel, 2 * tau, "x", PI, selectivity),
        _pulse(channel, 3 * tau, "-y", PI / 2, selectivity),
        _pulse(channel, 5 * tau, "y", PI, selectivity),
        _pulse(channel, 7 * tau, "y", PI / 2, selectivity),
        _pulse(channel, 8 * tau, "x", PI, selectivity),
        _pulse(channel, 9 * tau, "-x", PI / 2, selectivity),
        _pulse(channel, 10 * tau, "y", PI, selectivity),
    )
    return Sequence(events, cycle_length=10 * tau, name="pi-wahuha")


def repeat_cycle(seq, m):
    """Concatenate m copies of a cyclic sequence."""
    if seq.cycle_length is None:
        raise ValueError("sequence has no declared cycle length")
    events = []
    for k in range(m):
        shift = k * seq.cycle_length
        events.extend(replace(e, start=e.start + shift) for e in seq.events)
    return Sequence(tuple(events), cycle_length=m * seq.cycle_length,
                    name="%s x%d" % (seq.name, m))


def davies_endor(rf_frequency, rf_duration, mw_selectivity=None,
                 mw_duration=0.5, tau_echo=2.0):
    """Selective MW inversion - RF pulse - MW echo detection.

    The MW pulses carry a selectivity condition (donor nuclear manifold by
    default); the RF pulse is frequency-addressed with bandwidth
    1/rf_duration.
    """
    if rf_duration <= 0:
        raise ValueError("rf_duration must be positive")
    sel = mw_selectivity or Selectivity("e", (("P", UP),))
    t_rf = mw_duration
    t_det = t_rf + rf_duration
    events = (
        PulseEvent("MW", 0.0, 0.0, "x", PI, sel, label="invert"),
        PulseEvent("RF", t_rf, rf_duration, "x", PI, None,
                   frequency=rf_frequency, label="endor"),
        PulseEvent("MW", t_det, 0.0, "x", PI / 2, sel, label="detect"),
        PulseEvent("MW", t_det + tau_echo, 0.0, "y", PI, sel, label="refocus"),
    )
    echo_time = t_det + 2 * tau_echo
    return Sequence(events, cycle_length=echo_time,
                    readout={"target": sel.target, "conditions": sel.conditions,
                             "echo_time": echo_time},
                    name="davies-endor")


def transfer_measure_t2n(target, hyperfine_mhz, tau_n, dd=None,
                         mw_duration=0.5):
    """Electron -> nucleus coherence transfer, storage, transfer back.

    The electron coherence generated in the target-up manifold is swapped to
    the nucleus by a pair of selective pi pulses (RF conditioned on the
    electron, then MW conditioned on the nucleus), stored for 2*tau_n with a
    refocusing RF pi at tau_n (replaced by ``dd``, stretched to fill the
    storage window, when given), swapped back and read out as an electron
    echo.  Raises SelectivityError when the MW bandwidth 1/mw_duration is not
    below half the target hyperfine coupling.
    """
    bandwidth = 1.0 / mw_duration
    if bandwidth >= 0.5 * hyperfine_mhz:
        raise SelectivityError(
            "MW bandwidth %.3g MHz >= A/2 = %.3g MHz for site %r"
            % (bandwidth, 0.5 * hyperfine_mhz, target))
    sel_e_nup = Selectivity("e", ((target, UP),))
    sel_e_ndown = Selectivity("e", ((target, DOWN),))
    sel_n_eup = Selectivity(target, (("e", UP),))
    sel_n_edown = Selectivity(target, (("e", DOWN),))
    events = [
        _pulse("MW", 0.0, "x", PI / 2, sel_e_nup, "excite"),
        _pulse("RF", 1.0, "x", PI, sel_n_eup, "swap-rf"),
        _pulse("MW", 2.0, "x", PI, sel_e_ndown, "swap-mw"),
    ]
    t0 = 3.0  # storage starts
    if dd is None:
        events.append(_pulse("RF", t0 + tau_n, "y", PI, sel_n_edown, "store-pi"))
    else:
        # embed the decoupling block stretched across the storage window,
        # dropping any excitation pulse (the coherence is already stored)
        scale = 2.0 * tau_n / dd.total_length if dd.total_length > 0 else 1.0
        for e in dd.pulse_events():
            if e.label == "excite":
                continue
            events.append(replace(e, start=t0 + e.start * scale,
                                  selectivity=sel_n_edown))
    t1 = t0 + 2 * tau_n  # storage ends
    events.extend([
        _pulse("MW", t1, "x", PI, sel_e_ndown, "unswap-mw"),
        _pulse("RF", t1 + 1.0, "x", PI, sel_n_eup, "unswap-rf"),
    ])
    echo_time = t1 + 2.0
    return Sequence(tuple(events), cycle_length=echo_time,
                    readout={"target": "e", "conditions": ((target, UP),),
                             "echo_time": echo_time},
                    name="transfer-t2n")


# ---------------------------------------------------------------------------
# compilation / validation
# ---------------------------------------------------------------------------

def compile_sequence(seq):
    """Validate and freeze a sequence into an absolute-time Schedule.

    Raises ScheduleError naming the offending events on same-channel overlap,
    on violated pairwise constraints, and on MW pulses scheduled inside a
    Laser/Gate window when a non-overlap constraint was declared for those
    channels.
    """
    events = seq.sorted_events()
    by_channel = {}
    for e in events:
        if e.channel != "Delay":
            by_channel.setdefault(e.channel, []).append(e)
    for channel, evs in by_channel.items():
        for a, b in zip(evs, evs[1:]):
            if b.start < a.end - 1e-12:
                raise ScheduleError(
                    "channel %s overlap between %r at %g us and %r at %g us"
                    % (channel, a.label or a.axis, a.start, b.label or b.axis,
                       b.start))
    idx = {k: e for k, e in enumerate(seq.events)}
    for c in seq.constraints:
        kind = c[0]
        if kind == "non-overlapping":
            a, b = idx[c[1]], idx[c[2]]
            if a.start < b.end and b.start < a.end and a.duration + b.duration > 0:
                raise ScheduleError("events %d and %d must not overlap" % (c[1], c[2]))
        elif kind == "co-scheduled":
            a, b = idx[c[1]], idx[c[2]]
            if abs(a.start - b.start) > 1e-9:
                raise ScheduleError("events %d and %d must be co-scheduled" % (c[1], c[2]))
        elif kind == "channel-exclusive":
            _, ch_a, ch_b = c
            for a in by_channel.get(ch_a, ()):
                for b in by_channel.get(ch_b, ()):
                    if a.start < b.end and b.start < a.end:
                        raise ScheduleError(
                            "%s pulse %r at %g us falls inside a %s window"
                            % (ch_a, a.label or a.axis, a.start, ch_b))
        else:
            raise ScheduleError("unknown constraint %r" % (kind,))
    return Schedule(events=events, total_length=seq.total_length)


# ---------------------------------------------------------------------------
# pulse operators
# ---------------------------------------------------------------------------

def _axis_generator(axis):
    if axis in ("x", "-x"):
        g = SX
    elif axis in ("y", "-y"):
        g = SY
    else:
        raise ValueError("unknown axis %r" % axis)
    return -g if axis.startswith("-") else g


def _targets_for(event, basis):
    sel = event.selectivity
    if sel is not None and sel.target != "si*":
        return [sel.target]
    if event.channel == "MW":
        return ["e"] if "e" in basis.labels else []
    return [l for l in basis.labels if l.startswith("si")] or \
        (["P"] if "P" in basis.labels else [])


def ideal_pulse_operator(event, basis):
    """Instantaneous rotation, conditioned on the selectivity spins."""
    targets = _targets_for(event, basis)
    if not targets:
        return np.eye(basis.dim, dtype=complex)
    gen = sum(basis.op(t, _axis_generator(event.axis)) for t in targets)
    u = scipy.linalg.expm(-1j * event.angle * gen)
    conditions = event.selectivity.conditions if event.selectivity else ()
    if not conditions:
        return u
    proj = np.eye(basis.dim, dtype=complex)
    for label, occ in conditions:
        s = basis.op(label, SZ)
        proj = proj @ (0.5 * np.eye(basis.dim) + (1.0 if occ == UP else -1.0) * s)
    return u @ proj + (np.eye(basis.dim) - proj)


def frequency_selective_operator(event, ham):
    """Rotation of every eigenlevel pair resonant with the pulse.

    A pair qualifies when its dominant characters flip exactly one nuclear
    spin (RF) or the electron (MW) and |transition - frequency| is within
    half the pulse bandwidth (1/duration).
    """
    if event.duration <= 0:
        raise ValueError("frequency-addressed pulses need a duration")
    bandwidth = 1.0 / event.duration
    evals, evecs = ham.eig()
    doms = [ham.basis.occupation(d)
            for d in np.argmax(np.abs(evecs) ** 2, axis=0)]
    labels = ham.basis.labels
    want_electron = event.channel == "MW"
    u_eig = np.eye(ham.dim, dtype=complex)
    half = event.angle / 2.0
    sign = -1.0 if event.axis.startswith("-") else 1.0
    for i in range(ham.dim):
        for j in range(i + 1, ham.dim):
            flips = [k for k in range(len(labels)) if doms[i][k] != doms[j][k]]
            if len(flips) != 1:
                continue
            is_e = labels[flips[0]] == "e"
            if is_e != want_electron:
                continue
            if abs(abs(evals[j] - evals[i]) - event.frequency) > bandwidth / 2:
                continue
            c, s = math.cos(half), math.sin(half)
            if event.axis in ("x", "-x"):
                block = np.array([[c, -1j * sign * s], [-1j * sign * s, c]])
            else:
                block = np.array([[c, -sign * s], [sign * s, c]])
            u_pair = np.eye(ham.dim, dtype=complex)
            u_pair[np.ix_([i, j], [i, j])] = block
            u_eig = u_pair @ u_eig
    return evecs @ u_eig @ evecs.conj().T


def finite_pulse_operator(event, ham, rabi_mhz=None):
    """Rabi-drive pulse: evolve under H + drive in the pulse rotating frame.

    The frame rotates the addressed species at ``event.frequency``; the drive
    amplitude defaults to angle/(2*pi*duration) turns, i.e. a pulse that is a
    pi rotation on resonance.
    """
    if event.duration <= 0 or event.frequency is None:
        raise ValueError("finite pulses need duration and frequency")
    basis = ham.basis
    targets = _targets_for(event, basis)
    rabi = rabi_mhz if rabi_mhz is not None else \
        event.angle / (2 * PI * event.duration)
    gen = sum(basis.op(t, _axis_generator(event.axis)) for t in targets)
    if event.channel == "MW":
        frame = sum(basis.op(t, SZ) for t in targets)
    else:
        frame = sum(-basis.op(t, SZ) for t in targets)
    h_rot = ham.matrix - event.frequency * frame + rabi * gen
    return scipy.linalg.expm(-2j * PI * h_rot * event.duration), frame


# ---------------------------------------------------------------------------
# simulation
# ---------------------------------------------------------------------------

@dataclass
class SimulationResult:
    state: QuantumState
    echo_amplitude: float | None
    echo_phase: float | None
    snapshots: list = dc_field(default_factory=list)


def simulate(register, seq, field, initial=None, record=False):
    """Run a compiled sequence; ideal pulses are instantaneous unitaries.

    Returns a :class:`SimulationResult`; when the sequence declares a
    readout, ``echo_amplitude`` holds 2x the magnitude of the read-out
    transition coherence at the echo time.
    """
    schedule = compile_sequence(seq)
    ham = build_hamiltonian(register, field)
    basis = ham.basis
    state = initial if initial is not None else QuantumState.basis_state(
        basis, tuple(DOWN if l == "e" else UP for l in basis.labels))
    if state.basis != basis:
        raise ValueError("initial state basis does not match the register")

    from .spincore import evolve  # local to avoid cycle in doc order

    t = 0.0
    snapshots = []
    for event in schedule.events:
        if event.start > t:
            state = evolve(state, ham, event.start - t)
            t = event.start
        if event.channel in ("MW", "RF"):
            if event.model == "finite":
                u, frame = finite_pulse_operator(event, ham)
                # return from the pulse rotating frame to the lab frame
                u = scipy.linalg.expm(
                    -2j * PI * event.frequency * frame * event.duration) @ u
                t = event.end
            elif event.frequency is not None:
                u = frequency_selective_operator(event, ham)
                state = QuantumState(u @ state.rho @ u.conj().T, basis,
                                     validate=False)
                state = evolve(state, ham, event.duration)
                t = event.end
                if record:
                    snapshots.append((t, state))
                continue
            else:
                u = ideal_pulse_operator(event, basis)
            state = QuantumState(u @ state.rho @ u.conj().T, basis,
                                 validate=False)
        if record:
            snapshots.append((t, state))
    end = max(schedule.total_length, t)
    if end > t:
        state = evolve(state, ham, end - t)

    echo_amp = echo_phase = None
    if seq.readout and seq.readout.get("target") not in (None, "si*"):
        spect = dict(seq.readout.get("conditions", ()))
        c = transverse_amplitude(state, seq.readout["target"], spect)
        echo_amp, echo_phase = 2 * abs(c), math.atan2(c.imag, c.real)
    return SimulationResult(state, echo_amp, echo_phase, snapshots)


def transverse_amplitude(state, target, spectators=None):
    """Complex transverse amplitude Tr(rho * P_cond * I-) of the target spin.

    ``spectators`` pins the manifold of listed spins through projectors;
    unlisted spins are summed over, so echoes read the coherently added
    signal of every manifold (magnitude detection).  A full single-spin
    coherence gives magnitude 1/2.
    """
    basis = state.basis
    op = basis.op(target, SX - 1j * SY)
    for label, occ in (spectators or {}).items():
        s = basis.op(label, SZ)
        op = (0.5 * np.eye(basis.dim) + (1.0 if occ == UP else -1.0) * s) @ op
    return complex(np.trace(state.rho @ op))


def anisotropy_flip_probability(register, dd_seq, field, target="si0"):
    """Probability that the target nucleus leaves its eigenstate in one cycle.

    The DD pulses are applied to the electron; an anisotropic (zx) hyperfine
    component tilts the nuclear quantisation axis between the two electron
    manifolds, so each electron flip kicks the nucleus.  Perturbatively the
    leakage scales as (A_zx / (2 nu_n))^2.
    """
    ham = build_hamiltonian(register, field)
    basis = ham.basis
    evals, evecs = ham.eig()
    doms = [basis.occupation(d) for d in np.argmax(np.abs(evecs) ** 2, axis=0)]
    start_occ = (UP,) * len(basis.labels)
    i0 = doms.index(start_occ)
    state = QuantumState.pure(evecs[:, i0], basis)
    res = simulate(register, dd_seq, field, initial=state)
    k = basis.index(target)
    keep = 0.0
    for i in range(basis.dim):
        if doms[i][k] == start_occ[k]:
            v = evecs[:, i]
            keep += float(np.real(v.conj() @ res.state.rho @ v))
    return min(max(1.0 - keep, 0.0), 1.0)


# ---------------------------------------------------------------------------
# JSON / CSV interfaces
# ---------------------------------------------------------------------------

def sequence_to_json(seq):
    doc = {
        "format": "donorspin-sequence",
        "version": 1,
        "name": seq.name,
        "cycle_length_us": seq.cycle_length,
        "constraints": [list(c) for c in seq.constraints],
        "readout": {k: (list(v) if isinstance(v, tuple) else v)
                    for k, v in (seq.readout or {}).items()} or None,
        "events": [
            {
                "channel": e.channel, "start_us": e.start,
                "duration_us": e.duration, "axis": e.axis, "angle_rad": e.angle,
                "selectivity": None if e.selectivity is None else {
                    "target": e.selectivity.target,
                    "conditions": [list(c) for c in e.selectivity.conditions],
                },
                "frequency_MHz": e.frequency, "model": e.model, "label": e.label,
            }
            for e in seq.events
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def sequence_from_json(text):
    doc = json.loads(text)
    if doc.get("format") != "donorspin-sequence":
        raise ValueError("not a donorspin sequence document")
    events = []
    for e in doc["events"]:
        sel = e["selectivity"]
        selectivity = None if sel is None else Selectivity(
            sel["target"], tuple((c[0], c[1]) for c in sel["conditions"]))
        events.append(PulseEvent(
            channel=e["channel"], start=e["start_us"], duration=e["duration_us"],
            axis=e["axis"], angle=e["angle_rad"], selectivity=selectivity,
            frequency=e["frequency_MHz"], model=e["model"], label=e["label"]))
    readout = doc.get("readout")
    if readout and "conditions" in readout:
        readout = dict(readout)
        readout["conditions"] = tuple(tuple(c) for c in readout["conditions"])
    return Sequence(tuple(events), cycle_length=doc.get("cycle_length_us"),
                    constraints=tuple(tuple(c) for c in doc.get("constraints", ())),
                    readout=readout, name=doc.get("name", ""))


def schedule_to_csv(schedule):
    lines = ["index,channel,start_us,duration_us,axis,angle_rad,label"]
    for row in schedule.rows():
        lines.append(",".join(str(x) for x in row))
    return "\r\n".join(lines) + "\r\n"
