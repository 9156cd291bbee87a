"""Attack applicability matrix and the security verdict."""
from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, NotApplicableError

PRIMITIVES = {
    "QDS": ("iss_qds", "dss_qds"),
    "QSS": ("ghz_qss", "sq_qss"),
    "SI QRNG": ("si_qrng",),
    "QSDC": ("dl04_qsdc",),
    "BQC": ("bqc",),
}

PROTOCOL_NAMES = {
    "iss_qds": "QDS, identical-state-sharing",
    "dss_qds": "QDS, different-state-sharing",
    "ghz_qss": "QSS, entanglement-based (GHZ)",
    "sq_qss": "QSS, single-qubit",
    "si_qrng": "source-independent QRNG",
    "dl04_qsdc": "QSDC, DL04",
    "bqc": "blind quantum computing",
}

COLUMNS = ("source_side_channel", "wavelength", "detector_control", "trojan_horse")

# Property broken by each applicable (protocol, attack column); absent means "--".
MATRIX: dict[str, dict[str, str]] = {
    "iss_qds": {"source_side_channel": "unforgeability", "wavelength": "unforgeability",
                "detector_control": "unforgeability"},
    "dss_qds": {"detector_control": "unforgeability", "trojan_horse": "unforgeability"},
    "ghz_qss": {"detector_control": "confidentiality"},
    "sq_qss": {"trojan_horse": "confidentiality"},
    "si_qrng": {"wavelength": "randomness", "detector_control": "randomness"},
    "dl04_qsdc": {"detector_control": "confidentiality", "trojan_horse": "confidentiality"},
    "bqc": {"source_side_channel": "confidentiality", "trojan_horse": "confidentiality"},
}

PROTECTED_PROPERTY = {
    "iss_qds": "unforgeability", "dss_qds": "unforgeability", "ghz_qss": "confidentiality",
    "sq_qss": "confidentiality", "si_qrng": "randomness", "dl04_qsdc": "confidentiality",
    "bqc": "confidentiality",
}

KIND_COLUMN = {
    "source_distinguish": "source_side_channel",
    "pns": "source_side_channel",
    "wavelength": "wavelength",
    "blind_control": "detector_control",
    "trojan": "trojan_horse",
}

# Which attack kind realizes each applicable cell.
CELL_KIND: dict[tuple[str, str], str] = {
    ("iss_qds", "source_side_channel"): "source_distinguish",
    ("bqc", "source_side_channel"): "pns",
}

# Baseline attack outside the matrix, with the protocols that model it.
BASELINE = {"intercept_resend": ("iss_qds", "ghz_qss", "sq_qss", "dl04_qsdc")}


def cell_kind(protocol: str, column: str) -> str:
    if (protocol, column) in CELL_KIND:
        return CELL_KIND[(protocol, column)]
    return {v: k for k, v in KIND_COLUMN.items() if k not in ("pns", "source_distinguish")}[column]


def applicable_cells() -> list[tuple[str, str, str]]:
    return [(p, c, MATRIX[p][c]) for p in MATRIX for c in COLUMNS if c in MATRIX[p]]


def inapplicable_cells() -> list[tuple[str, str]]:
    return [(p, c) for p in MATRIX for c in COLUMNS if c not in MATRIX[p]]


def check_applicable(protocol: str, kind: str | None, force: bool = False) -> None:
    """Raise unless ``kind`` can be run against ``protocol``."""
    if kind is None:
        return
    if kind in BASELINE:
        if protocol not in BASELINE[kind]:
            raise ConfigurationError(f"no {kind} model for {protocol}", "attack.kind")
        return
    if kind not in KIND_COLUMN:
        raise ConfigurationError(f"attack kind {kind} is reserved and not implemented", "attack.kind")
    column = KIND_COLUMN[kind]
    if column not in MATRIX[protocol]:
        if force:
            return
        raise NotApplicableError(f"{kind} is not applicable to {protocol}", "attack.kind")
    if cell_kind(protocol, column) != kind:
        raise ConfigurationError(
            f"no {kind} model for {protocol}; the {column} cell is realized by {cell_kind(protocol, column)}",
            "attack.kind")


def attacked_property(protocol: str, kind: str | None) -> str:
    if kind in KIND_COLUMN and KIND_COLUMN[kind] in MATRIX[protocol]:
        return MATRIX[protocol][KIND_COLUMN[kind]]
    return PROTECTED_PROPERTY[protocol]


@dataclass(frozen=True)
class SecurityVerdict:
    property: str
    status: str  # intact | broken | attack-detected | not-applicable

    def to_dict(self) -> dict:
        return {"property": self.property, "status": self.status}


def verdict(metrics, protocol: str, kind: str | None, success_bar: float = 0.95) -> SecurityVerdict:
    prop = attacked_property(protocol, kind)
    if kind in KIND_COLUMN and KIND_COLUMN[kind] not in MATRIX[protocol]:
        return SecurityVerdict(prop, "not-applicable")
    if metrics.aborted:
        return SecurityVerdict(prop, "attack-detected")
    if kind is not None and metrics.eve_success >= success_bar and metrics.legit_accept >= success_bar:
        return SecurityVerdict(prop, "broken")
    return SecurityVerdict(prop, "intact")
