"""Pieces shared by the prepare-and-measure protocols."""
from __future__ import annotations

import math
from dataclasses import dataclass

from ..photonics import MeasBasis, PureState, X, Z, eigenstate

BASES = {"Z": Z, "X": X}


@dataclass(frozen=True)
class Bb84Symbol:
    """One of |H>, |V>, |+>, |->: bit 0 is the +1 eigenstate of ``basis``."""

    bit: int
    basis: str

    def __post_init__(self):
        if self.bit not in (0, 1) or self.basis not in BASES:
            raise ValueError(f"not a BB84 symbol: ({self.bit}, {self.basis})")

    @property
    def outcome(self) -> int:
        return 1 - 2 * self.bit

    @property
    def state(self) -> PureState:
        return eigenstate(BASES[self.basis], self.outcome)

    @property
    def meas_basis(self) -> MeasBasis:
        return BASES[self.basis]

    @property
    def index(self) -> int:
        # H, V, +, - -> 0, 1, 2, 3 (also the emitting laser in a four-laser source)
        return (0 if self.basis == "Z" else 2) + self.bit

    def flipped(self) -> "Bb84Symbol":
        return Bb84Symbol(1 - self.bit, self.basis)

    def orthogonal_to(self, other: "Bb84Symbol") -> bool:
        return self.basis == other.basis and self.bit != other.bit

    def __str__(self):
        return "HV+-"[self.index]


SYMBOLS = tuple(Bb84Symbol(b, k) for k in ("Z", "X") for b in (0, 1))  # H, V, +, -


def symbol_from_outcome(basis: str, outcome: int) -> Bb84Symbol:
    return Bb84Symbol(0 if outcome == 1 else 1, basis)


def other_basis(basis: str) -> str:
    return "X" if basis == "Z" else "Z"


def succession_sigma(k: int, n: int) -> float:
    """Binomial standard error with the rule-of-succession rate (k+1)/(n+2).

    Nonzero even when no errors were seen, so thresholds built from it stay
    strictly above a zero estimate.
    """
    if n <= 0:
        return 0.5
    p = (k + 1) / (n + 2)
    return math.sqrt(p * (1 - p) / n)
