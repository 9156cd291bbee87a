"""Run metrics: counts-backed rates with standard errors."""
from __future__ import annotations

import math
from dataclasses import dataclass, field


def binomial_se(k: int, n: int) -> float:
    if n <= 0:
        return 0.0
    p = k / n
    return math.sqrt(p * (1.0 - p) / n)


@dataclass(frozen=True)
class Rate:
    k: int
    n: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.k <= max(self.n, 0):
            raise ValueError(f"invalid rate counts {self.k}/{self.n}")

    @property
    def value(self) -> float:
        return self.k / self.n if self.n else 0.0

    @property
    def se(self) -> float:
        return binomial_se(self.k, self.n)

    def __add__(self, other: "Rate") -> "Rate":
        return Rate(self.k + other.k, self.n + other.n)

    def to_dict(self) -> dict:
        return {"k": self.k, "n": self.n, "value": self.value, "se": self.se}


class Outcome:
    """What an engine hands back: rates as counts, plain values, event counts."""

    def __init__(self):
        self.rates: dict[str, Rate] = {}
        self.values: dict[str, float] = {}
        self.counts: dict[str, int] = {}
        self.aborted = False
        self.abort_reason: str | None = None

    def rate(self, name: str, k: int, n: int) -> None:
        self.rates[name] = Rate(int(k), int(n))

    def abort(self, reason: str) -> None:
        if not self.aborted:
            self.aborted = True
            self.abort_reason = reason

    def as_outputs(self) -> dict:
        return {
            "rates": {k: (r.k, r.n) for k, r in self.rates.items()},
            "values": dict(self.values),
            "counts": dict(self.counts),
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
        }


@dataclass
class Metrics:
    rates: dict[str, Rate] = field(default_factory=dict)
    values: dict[str, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)
    aborted: bool = False
    abort_reason: str | None = None
    abort_fraction: float = 0.0

    def value(self, name: str, default: float = 0.0) -> float:
        if name in self.rates:
            return self.rates[name].value
        return self.values.get(name, default)

    @property
    def eve_success(self) -> float:
        return self.value("eve_success")

    @property
    def legit_accept(self) -> float:
        return self.value("legit_accept")

    @property
    def error(self) -> float:
        return self.value("error")

    def to_dict(self) -> dict:
        return {
            "rates": {k: self.rates[k].to_dict() for k in sorted(self.rates)},
            "values": {k: self.values[k] for k in sorted(self.values)},
            "counts": {k: self.counts[k] for k in sorted(self.counts)},
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
            "abort_fraction": self.abort_fraction,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Metrics":
        return cls(
            rates={k: Rate(v["k"], v["n"]) for k, v in d["rates"].items()},
            values=dict(d["values"]),
            counts=dict(d["counts"]),
            aborted=d["aborted"],
            abort_reason=d["abort_reason"],
            abort_fraction=d["abort_fraction"],
        )


def compute_metrics(transcript) -> Metrics:
    """Aggregate a finished transcript's outputs into :class:`Metrics`."""
    out = transcript.outputs
    rates = {k: Rate(int(v[0]), int(v[1])) for k, v in out.get("rates", {}).items()}
    counts = dict(out.get("counts", {}))
    for kind, c in transcript.counts.items():
        counts.setdefault(f"events.{kind}", c)
    aborted = bool(out.get("aborted", False))
    return Metrics(rates=rates, values={k: float(v) for k, v in out.get("values", {}).items()},
                   counts=counts, aborted=aborted, abort_reason=out.get("abort_reason"),
                   abort_fraction=1.0 if aborted else 0.0)


def aggregate(trials: list[Metrics]) -> Metrics:
    """Pool trials: rate counts add, values average, counts add."""
    if not trials:
        return Metrics()
    rates: dict[str, Rate] = {}
    values: dict[str, float] = {}
    counts: dict[str, int] = {}
    for m in trials:
        for k, r in m.rates.items():
            rates[k] = rates[k] + r if k in rates else r
        for k, v in m.values.items():
            values[k] = values.get(k, 0.0) + v / len(trials)
        for k, c in m.counts.items():
            counts[k] = counts.get(k, 0) + c
    n_abort = sum(m.aborted for m in trials)
    reasons = sorted({m.abort_reason for m in trials if m.abort_reason})
    return Metrics(rates=rates, values=values, counts=counts, aborted=n_abort * 2 >= len(trials) and n_abort > 0,
                   abort_reason="; ".join(reasons) or None, abort_fraction=n_abort / len(trials))
