"""Scenario configuration.

Scenarios are JSON documents validated by pydantic models that reject
unknown keys.  :func:`load_config` turns validation failures into
:class:`ConfigurationError` carrying the dotted field path.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .attacks import ATTACK_KINDS, RESERVED_KINDS
from .errors import ConfigurationError

PROTOCOLS = ("iss_qds", "dss_qds", "ghz_qss", "sq_qss", "si_qrng", "dl04_qsdc", "bqc")

DEFAULT_ROUNDS = {
    "iss_qds": 4000,
    "dss_qds": 20000,
    "ghz_qss": 20000,
    "sq_qss": 20000,
    "si_qrng": 100000,
    "dl04_qsdc": 6000,
    "bqc": 100000,
}


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ChannelConfig(_Strict):
    loss_db: float = Field(0.0, ge=0.0, le=100.0)
    flip_prob: float = Field(0.0, ge=0.0, le=0.5)


class SourceConfig(_Strict):
    mu_signal: float = Field(0.5, gt=0.0)
    mu_decoy: float = Field(0.1, ge=0.0)
    p_signal: float = Field(0.7, ge=0.0, le=1.0)
    p_decoy: float = Field(0.2, ge=0.0, le=1.0)
    p_vacuum: float = Field(0.1, ge=0.0, le=1.0)
    dps_mu: float = Field(0.2, gt=0.0, le=10.0)
    single_photon_mu: float = Field(0.1, gt=0.0, le=20.0)
    laser_time_offsets_ps: list[float] = Field(default_factory=lambda: [0.0, 60.0, 120.0, 180.0])
    laser_spectral_offsets_nm: list[float] = Field(default_factory=lambda: [0.0, 0.005, 0.01, 0.015])
    time_jitter_ps: float = Field(10.0, gt=0.0)
    spectral_jitter_nm: float = Field(0.002, ge=0.0)

    @model_validator(mode="after")
    def _check(self):
        if abs(self.p_signal + self.p_decoy + self.p_vacuum - 1.0) > 1e-9:
            raise ValueError("decoy class probabilities must sum to 1")
        if not self.mu_signal > self.mu_decoy:
            raise ValueError("mu_signal must exceed mu_decoy")
        if len(self.laser_time_offsets_ps) != 4 or len(self.laser_spectral_offsets_nm) != 4:
            raise ValueError("the BB84 source has exactly four lasers")
        return self


class DetectorConfig(_Strict):
    eta: float = Field(0.5, ge=0.0, le=1.0)
    dark_prob: float = Field(0.0, ge=0.0, le=1.0)
    p_blind: float = Field(1e-6, gt=0.0)
    e_click: float = Field(7.5e-13, gt=0.0)
    blindable: bool = True
    split_ratio: float = Field(0.5, ge=0.0, le=1.0)
    bs_table: list[tuple[float, float]] = Field(
        default_factory=lambda: [(1450.0, 0.99), (1550.0, 0.5), (1650.0, 0.01)])
    qrng_bs_table: list[tuple[float, float]] = Field(
        default_factory=lambda: [(1310.0, 0.99), (1550.0, 0.02), (1650.0, 0.001)])


class AttackConfig(_Strict):
    kind: Literal[ATTACK_KINDS + RESERVED_KINDS]
    strategy: Literal["random", "oracle"] = "random"
    cw_power_w: float = Field(1e-5, ge=0.0, le=12.8)
    faked_energy_j: float = Field(1e-12, gt=0.0)
    wavelength_map_nm: Optional[dict[str, float]] = None
    resend_photons: Optional[int] = Field(1, ge=1)
    injected_power_w: float = Field(1e-3, ge=0.0)
    rep_rate_hz: float = Field(1e9, gt=0.0)
    readout_threshold: int = Field(4, ge=1)
    mean_reflected_photons: Optional[float] = Field(None, ge=0.0)
    confidence_threshold: float = Field(0.99, ge=0.0, le=1.0)
    blind_watchdog: bool = False


class IsolationComponentConfig(_Strict):
    name: str
    attenuation_db: float = Field(ge=0.0)
    direction: Literal["bidirectional", "return-path-only"] = "bidirectional"


class FilterConfig(_Strict):
    passband_nm: tuple[float, float] = (1549.0, 1551.0)
    stopband_extinction_db: float = Field(60.0, ge=0.0, le=400.0)

    @model_validator(mode="after")
    def _check(self):
        lo, hi = self.passband_nm
        if not 0 < lo <= hi:
            raise ValueError("passband must be an increasing positive interval")
        return self


class CountermeasureConfig(_Strict):
    isolation: list[IsolationComponentConfig] = Field(default_factory=list)
    modulator_reflectivity_db: float = Field(30.0, ge=0.0)
    filter: Optional[FilterConfig] = None
    watchdog: bool = False
    watchdog_eta: float = Field(0.5, ge=0.0, le=1.0)
    watchdog_dark_prob: float = Field(1e-7, ge=0.0, le=1.0)
    tap_ratio: float = Field(0.01, gt=0.0, le=1.0)
    calibration_rate: float = Field(0.0, ge=0.0, le=1.0)
    calibration_batch: int = Field(20, ge=1)
    calibration_tolerance: float = Field(1e-3, gt=0.0, lt=1.0)
    active_basis: bool = False


class ProtocolParams(_Strict):
    sample_fraction: float = Field(0.3, gt=0.0, lt=1.0)
    max_error: float = Field(0.11, ge=0.0, le=0.5)
    kgp_sample_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    n_parties: int = Field(5, ge=3, le=16)
    qrng_eps_sigmas: float = Field(3.0, ge=0.0)
    qrng_block_bits: int = Field(1024, ge=8)
    qrng_mu: float = Field(0.1, gt=0.0)
    forward_check: float = Field(0.1, gt=0.0, lt=1.0)
    backward_check: float = Field(0.1, gt=0.0, lt=1.0)
    check_threshold: float = Field(0.1, ge=0.0, le=1.0)
    block_length: int = Field(256, ge=4)
    f0: int = Field(4, ge=1)
    f1: int = Field(8, ge=1)
    bqc_mu: float = Field(0.1, gt=0.0)
    success_bar: float = Field(0.95, gt=0.0, le=1.0)

    @model_validator(mode="after")
    def _check(self):
        if self.f0 == self.f1:
            raise ValueError("f0 and f1 must differ")
        if max(self.f0, self.f1) > self.block_length // 2:
            raise ValueError("f0 and f1 must not exceed block_length/2")
        if self.forward_check + self.backward_check >= 1.0:
            raise ValueError("check fractions leave no message slots")
        return self


class ScenarioConfig(_Strict):
    protocol: Literal[PROTOCOLS]
    n_rounds: Optional[int] = Field(None, gt=0, le=10_000_000)
    seed: int = Field(0, ge=0, lt=2**64)
    trials: int = Field(1, ge=1, le=100_000)
    channel: ChannelConfig = Field(default_factory=ChannelConfig)
    source: SourceConfig = Field(default_factory=SourceConfig)
    detector: DetectorConfig = Field(default_factory=DetectorConfig)
    attack: Optional[AttackConfig] = None
    countermeasures: CountermeasureConfig = Field(default_factory=CountermeasureConfig)
    params: ProtocolParams = Field(default_factory=ProtocolParams)

    @property
    def rounds(self) -> int:
        return self.n_rounds if self.n_rounds is not None else DEFAULT_ROUNDS[self.protocol]

    def resolved(self) -> "ScenarioConfig":
        """Copy with every default made explicit."""
        return self.model_copy(update={"n_rounds": self.rounds})

    def with_updates(self, **kw) -> "ScenarioConfig":
        data = self.model_dump()
        data.update(kw)
        return ScenarioConfig.model_validate(data)


def _diagnostic(err: ValidationError) -> ConfigurationError:
    first = err.errors()[0]
    path = ".".join(str(p) for p in first["loc"]) or "<root>"
    return ConfigurationError(first["msg"], path)


def parse_config(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as e:
        raise _diagnostic(e) from None


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigurationError(f"cannot read scenario: {e.strerror}", str(path)) from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON at line {e.lineno} column {e.colno}", str(path)) from None
    if not isinstance(data, dict):
        raise ConfigurationError("scenario must be a JSON object", "<root>")
    return parse_config(data)
