"""Execution fabric shared by every protocol run.

Parties with label-derived random streams, lossy quantum channels with an
optional adversary hook, an authenticated public classical channel that the
adversary can read, and a hashed, replayable transcript.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .photonics import OpticalPulse, attenuate

_SEED_MASK = (1 << 64) - 1


def derive_stream(master_seed: int, label: str) -> np.random.Generator:
    """Deterministic random stream for ``label`` under ``master_seed``."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    seed = int(master_seed) & _SEED_MASK
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, *words])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Party:
    id: str
    role: str
    rng: np.random.Generator
    private_store: dict[str, Any] = field(default_factory=dict)


def make_party(master_seed: int, party_id: str, role: str) -> Party:
    return Party(party_id, role, derive_stream(master_seed, f"party:{party_id}"))


Interposer = Callable[[OpticalPulse], "OpticalPulse | None"]


@dataclass
class QuantumChannel:
    loss_db: float = 0.0
    interposer: Interposer | None = None
    name: str = "channel"

    def __post_init__(self):
        if self.loss_db < 0:
            raise ValueError("loss_db must be nonnegative")

    @property
    def survival(self) -> float:
        return 10.0 ** (-self.loss_db / 10.0)


def transmit(ch: QuantumChannel, p: OpticalPulse, rng: np.random.Generator) -> OpticalPulse | None:
    """Send one pulse: the interposer acts first, then channel loss."""
    if ch.interposer is not None:
        p = ch.interposer(p)
        if p is None:
            return None
    return attenuate(p, ch.survival, rng)


def _freeze(obj):
    if isinstance(obj, dict):
        return tuple(sorted((str(k), _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(x) for x in obj)
    if isinstance(obj, np.ndarray):
        return tuple(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


class ProtocolTranscript:
    """Ordered event log.

    Every event feeds a running SHA-256 digest; full events are kept only
    when ``keep_events`` is set, since long runs produce millions of them.
    """

    def __init__(self, keep_events: bool = False):
        self.keep_events = keep_events
        self.events: list[tuple] = []
        self.counts: dict[str, int] = {}
        self.outputs: dict[str, Any] = {}
        self._hash = hashlib.sha256()

    def record(self, kind: str, party: str, **payload) -> None:
        line = json.dumps([kind, party, payload], sort_keys=True, default=_jsonable, separators=(",", ":"))
        self._hash.update(line.encode("utf-8"))
        self._hash.update(b"\n")
        self.counts[kind] = self.counts.get(kind, 0) + 1
        if self.keep_events:
            self.events.append((kind, party, _freeze(payload)))

    @property
    def digest(self) -> str:
        return self._hash.hexdigest()


class ClassicalChannel:
    """Authenticated public channel: everyone, Eve included, reads every message."""

    def __init__(self, transcript: ProtocolTranscript | None = None):
        self._messages: list[tuple[str, Any]] = []
        self._transcript = transcript

    @property
    def transcript(self) -> tuple[tuple[str, Any], ...]:
        return tuple(self._messages)

    def view(self) -> tuple[tuple[str, Any], ...]:
        return self.transcript

    def last(self, sender: str, topic: str):
        for who, msg in reversed(self._messages):
            if who == sender and msg[0] == topic:
                return msg[1]
        raise KeyError(f"no {topic!r} message from {sender!r}")

    def append(self, sender: str, msg) -> None:
        frozen = _freeze(msg)
        self._messages.append((sender, frozen))
        if self._transcript is not None:
            self._transcript.record("announce", sender, msg=frozen)


def broadcast(ch: ClassicalChannel, sender: Party | str, msg) -> None:
    sender_id = sender.id if isinstance(sender, Party) else sender
    ch.append(sender_id, msg)
