"""Small quantum-optics engine.

Pure states of one to three polarization qubits (H <-> 0, V <-> 1, subsystem 0
is the most significant index), weak coherent pulses, and behavioural models
of beam splitters, phase/flip modulators and blindable single-photon
detectors.  All randomness comes from an explicitly passed
``numpy.random.Generator``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .constants import BRIGHT_MU, NOMINAL_WAVELENGTH_NM, photon_energy
from .errors import ConfigurationError

TWO_PI = 2.0 * math.pi
_SQRT1_2 = 1.0 / math.sqrt(2.0)


def _canonical_phase(amps: np.ndarray) -> np.ndarray:
    """Fix the first nonzero amplitude to be real and nonnegative."""
    for a in amps.tolist():
        if abs(a) > 1e-12:
            return amps * (a.conjugate() / abs(a))
    return amps


@dataclass(frozen=True, eq=False)
class PureState:
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size not in (2, 4, 8):
            raise ValueError(f"state must cover 1-3 qubits, got {amps.size} amplitudes")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized (squared norm {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, normalize: bool = True) -> "PureState":
        v = np.asarray(vec, dtype=complex).reshape(-1)
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(v)

    @property
    def n_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    def fidelity(self, other: "PureState") -> float:
        return float(abs(np.vdot(self.amplitudes, other.amplitudes)) ** 2)

    def equals(self, other: "PureState", atol: float = 1e-9) -> bool:
        """Equality up to global phase."""
        if self.amplitudes.size != other.amplitudes.size:
            return False
        return abs(self.fidelity(other) - 1.0) <= atol

    def __repr__(self):
        return f"PureState({np.round(self.amplitudes, 6).tolist()})"


@dataclass(frozen=True)
class MeasBasis:
    """Measurement basis: computational ``Z``, ``X``, ``Y`` or equatorial ``phase``."""

    kind: str
    delta: float = 0.0

    def __post_init__(self):
        if self.kind not in ("Z", "X", "Y", "phase"):
            raise ValueError(f"unknown basis kind {self.kind!r}")
        if self.kind == "phase":
            object.__setattr__(self, "delta", float(self.delta) % TWO_PI)
        elif self.delta != 0.0:
            raise ValueError("only phase bases carry an angle")

    @property
    def label(self) -> str:
        return self.kind if self.kind != "phase" else f"phase({self.delta:.6f})"


Z = MeasBasis("Z")
X = MeasBasis("X")
Y = MeasBasis("Y")


def phase_basis(delta: float) -> MeasBasis:
    return MeasBasis("phase", delta)


@lru_cache(maxsize=256)
def _basis_arrays(kind: str, delta: float) -> tuple[np.ndarray, np.ndarray]:
    if kind == "Z":
        return np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)
    if kind == "X":
        delta = 0.0
    elif kind == "Y":
        delta = math.pi / 2
    e = complex(math.cos(delta), math.sin(delta))
    plus = np.array([1, e], dtype=complex) * _SQRT1_2
    minus = np.array([1, -e], dtype=complex) * _SQRT1_2
    plus.setflags(write=False)
    minus.setflags(write=False)
    return plus, minus


def basis_vectors(b: MeasBasis) -> tuple[PureState, PureState]:
    """Orthonormal pair for ``b``; the first element is outcome +1."""
    plus, minus = _basis_arrays(b.kind, b.delta)
    return PureState(plus), PureState(minus)


# Named single-qubit states.
H = PureState([1, 0])
V = PureState([0, 1])
PLUS, MINUS = basis_vectors(X)
Y_PLUS, Y_MINUS = basis_vectors(Y)


def eigenstate(b: MeasBasis, outcome: int) -> PureState:
    plus, minus = basis_vectors(b)
    return plus if outcome == 1 else minus


def ghz_state() -> PureState:
    amps = np.zeros(8, dtype=complex)
    amps[0] = amps[7] = _SQRT1_2
    return PureState(amps)


def outcome_probability(s: PureState, subsystem: int, b: MeasBasis) -> float:
    """Born probability of outcome +1 when measuring ``subsystem`` in ``b``."""
    k = s.n_qubits
    plus, _ = _basis_arrays(b.kind, b.delta)
    t = s.amplitudes.reshape((2,) * k)
    reduced = np.tensordot(np.conj(plus), t, axes=([0], [subsystem]))
    return float(np.vdot(reduced, reduced).real)


def measure(s: PureState, subsystem: int, b: MeasBasis, rng: np.random.Generator) -> tuple[int, PureState]:
    """Projective measurement of one subsystem; returns (outcome, collapsed state)."""
    k = s.n_qubits
    if not 0 <= subsystem < k:
        raise IndexError(f"subsystem {subsystem} out of range for {k} qubits")
    vecs = _basis_arrays(b.kind, b.delta)
    # Rows: amplitude of the measured qubit in |0>, |1>; columns: the rest.
    t = s.amplitudes.reshape(2, -1)
    if subsystem:
        t = np.moveaxis(s.amplitudes.reshape((2,) * k), subsystem, 0).reshape(2, -1)
    reduced_plus = vecs[0].conj() @ t
    p_plus = float(np.vdot(reduced_plus, reduced_plus).real)
    outcome = 1 if rng.random() < p_plus else -1
    if outcome == 1:
        reduced, p, v = reduced_plus, p_plus, vecs[0]
    else:
        reduced = vecs[1].conj() @ t
        p, v = 1.0 - p_plus, vecs[1]
    assert p > 1e-15, "sampled a zero-probability branch"
    collapsed = np.outer(v, reduced / math.sqrt(p))
    if subsystem:
        collapsed = np.moveaxis(collapsed.reshape((2,) * k), 0, subsystem)
    collapsed = collapsed.reshape(-1)
    return outcome, PureState(collapsed)


def apply_phase(s: PureState, phi: float) -> PureState:
    """Multiply the |1> amplitude of a single qubit by exp(i*phi)."""
    if s.n_qubits != 1:
        raise ValueError("apply_phase acts on single-qubit states")
    a0, a1 = s.amplitudes.tolist()
    a1 *= complex(math.cos(phi), math.sin(phi))
    if abs(a0) > 1e-12:
        a0, a1 = abs(a0), a1 * a0.conjugate() / abs(a0)
    elif abs(a1) > 1e-12:
        a1 = abs(a1)
    return PureState(np.array([a0, a1], dtype=complex))


_FLIP_U = np.array([[0, 1], [-1, 0]], dtype=complex)


def apply_flip(s: PureState, op: str) -> PureState:
    """Apply ``I`` or ``U = |0><1| - |1><0|`` to a single qubit."""
    if s.n_qubits != 1:
        raise ValueError("apply_flip acts on single-qubit states")
    if op == "I":
        return PureState(_canonical_phase(s.amplitudes.copy()))
    if op == "U":
        return PureState(_canonical_phase(_FLIP_U @ s.amplitudes))
    raise ValueError(f"unknown operation {op!r}")


def sample_photon_number(mu: float, rng: np.random.Generator, size: int | None = None):
    """Poisson(mu) photon number; an array of ``size`` draws when given."""
    if mu < 0:
        raise ValueError("mean photon number must be nonnegative")
    if size is not None:
        return np.zeros(size, dtype=np.int64) if mu == 0 else rng.poisson(mu, size)
    if mu == 0:
        return 0
    return int(rng.poisson(mu))


DECOY_CLASSES = ("signal", "decoy", "vacuum")


@dataclass(frozen=True, slots=True)
class OpticalPulse:
    """One optical time slot.

    ``photons`` pins an exact photon number (Fock state, used for resent or
    split-off light); when it is ``None`` the photon number is Poisson(mu).
    ``cw_power`` is continuous-wave light (W) accompanying the slot.
    """

    mu: float
    wavelength: float = NOMINAL_WAVELENGTH_NM
    emit_time: float = 0.0
    encoding: PureState | None = None
    phase: float | None = None
    decoy_class: str = "signal"
    source_id: int = 0
    photons: int | None = None
    cw_power: float = 0.0

    def __post_init__(self):
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if self.decoy_class not in DECOY_CLASSES:
            raise ValueError(f"unknown decoy class {self.decoy_class!r}")
        if self.decoy_class == "vacuum" and self.mu != 0:
            raise ValueError("vacuum pulses carry mu = 0")
        if self.photons is not None and self.photons < 0:
            raise ValueError("photon count must be nonnegative")

    @property
    def is_bright(self) -> bool:
        return self.photons is None and self.mu >= BRIGHT_MU

    @property
    def energy(self) -> float:
        n = self.mu if self.photons is None else self.photons
        return n * photon_energy(self.wavelength)


def photon_count(p: OpticalPulse, rng: np.random.Generator) -> int:
    return p.photons if p.photons is not None else sample_photon_number(p.mu, rng)


def attenuate(p: OpticalPulse, transmittance: float, rng: np.random.Generator) -> OpticalPulse:
    """Pass a pulse through a linear loss element.

    A Poisson(mu) photon number thinned by independent Bernoulli(T) survival is
    Poisson(mu*T), so coherent pulses are attenuated in mean; Fock pulses are
    thinned photon by photon.
    """
    if transmittance >= 1.0:
        return p
    cw = p.cw_power * transmittance
    if p.photons is not None:
        kept = int(rng.binomial(p.photons, transmittance)) if p.photons else 0
        return replace(p, photons=kept, cw_power=cw)
    if p.decoy_class == "vacuum":
        return replace(p, cw_power=cw)
    return replace(p, mu=p.mu * transmittance, cw_power=cw)


@dataclass(frozen=True)
class BsModel:
    """Beam splitter with wavelength-dependent transmittance to port A.

    ``table`` holds (wavelength_nm, t) points interpolated piecewise-linearly;
    an empty table means the constant ``nominal_t`` at every wavelength.
    """

    nominal_t: float = 0.5
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        pts = tuple(sorted((float(w), float(t)) for w, t in self.table))
        for w, t in pts:
            if not 0.0 <= t <= 1.0:
                raise ConfigurationError(f"transmittance {t} at {w} nm outside [0, 1]")
        if not 0.0 <= self.nominal_t <= 1.0:
            raise ConfigurationError("nominal transmittance outside [0, 1]")
        object.__setattr__(self, "table", pts)

    @classmethod
    def constant(cls, t: float) -> "BsModel":
        return cls(nominal_t=t)

    @property
    def support(self) -> tuple[float, float]:
        if not self.table:
            return (0.0, math.inf)
        return (self.table[0][0], self.table[-1][0])

    def ratio(self, wavelength: float) -> float:
        if not self.table:
            return self.nominal_t
        lo, hi = self.support
        if not lo - 1e-9 <= wavelength <= hi + 1e-9:
            raise ConfigurationError(f"wavelength {wavelength} nm outside beam splitter support [{lo}, {hi}]")
        ws, ts = zip(*self.table)
        return float(np.interp(wavelength, ws, ts))


def bs_route(p: OpticalPulse | float, bs: BsModel, rng: np.random.Generator) -> str:
    """Route one photon: port "A" with probability t(wavelength), else "B"."""
    wavelength = p if isinstance(p, (int, float)) else p.wavelength
    t = bs.ratio(wavelength)
    if t >= 1.0:
        return "A"
    if t <= 0.0:
        return "B"
    return "A" if rng.random() < t else "B"


@dataclass(frozen=True)
class Incident:
    """Light reaching a detector within one gate."""

    photons: int = 0
    energy: float = 0.0  # J, classical pulse energy
    cw_power: float = 0.0  # W
    wavelength: float = NOMINAL_WAVELENGTH_NM


@dataclass(frozen=True)
class DetectorModel:
    eta: float = 0.5
    dark_prob: float = 0.0
    mode: str = "geiger"
    p_blind: float = 1e-6  # W; math.inf for a detector that cannot be blinded
    e_click: float = 7.5e-13  # J, comparator level once blinded

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigurationError("eta outside [0, 1]", "eta")
        if not 0.0 <= self.dark_prob <= 1.0:
            raise ConfigurationError("dark_prob outside [0, 1]", "dark_prob")
        if self.mode not in ("geiger", "blinded"):
            raise ConfigurationError(f"unknown detector mode {self.mode!r}", "mode")

    @property
    def blinded(self) -> bool:
        return self.mode == "blinded"


def detect(d: DetectorModel, incident: Incident, rng: np.random.Generator) -> tuple[bool, DetectorModel]:
    """One detector gate; returns (click, updated detector)."""
    if incident.photons < 0 or incident.energy < 0 or incident.cw_power < 0:
        raise ValueError("incident light must be nonnegative")
    if d.mode == "geiger" and incident.cw_power >= d.p_blind:
        d = replace(d, mode="blinded")
    if d.mode == "blinded":
        return incident.energy >= d.e_click, d
    n = incident.photons
    if incident.energy > 0:
        n += incident.energy / photon_energy(incident.wavelength)
    p_none = (1.0 - d.eta) ** n * (1.0 - d.dark_prob)
    if p_none >= 1.0:
        return False, d
    if p_none <= 0.0:
        return True, d
    return bool(rng.random() >= p_none), d
