"""Scenario execution: trials, honest twins, aggregation and verdicts."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import ScenarioConfig
from .harness import ProtocolTranscript
from .metrics import Metrics, aggregate, compute_metrics
from .table import SecurityVerdict, check_applicable, verdict


def _engines():
    from .protocols import bqc, qds, qrng, qsdc, qss
    return {
        "iss_qds": qds.run_iss,
        "dss_qds": qds.run_dss,
        "ghz_qss": qss.run_ghz,
        "sq_qss": qss.run_sq,
        "si_qrng": qrng.run_qrng,
        "dl04_qsdc": qsdc.run_dl04,
        "bqc": bqc.run_bqc,
    }


def trial_seed(seed: int, trial: int) -> int:
    """Seed of trial ``trial``; independent of how trials are scheduled."""
    if trial == 0:
        return seed
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, trial])
    lo, hi = (int(w) for w in ss.generate_state(2, dtype=np.uint32))
    return lo | (hi << 32)


def run_scenario(cfg: ScenarioConfig, seed: int | None = None, force: bool = False,
                 keep_events: bool = False) -> tuple[ProtocolTranscript, Metrics]:
    """One run of ``cfg`` at ``seed`` (default ``cfg.seed``)."""
    check_applicable(cfg.protocol, cfg.attack.kind if cfg.attack else None, force)
    seed = cfg.seed if seed is None else seed
    tr = ProtocolTranscript(keep_events=keep_events)
    tr.record("start", "harness", protocol=cfg.protocol, seed=seed, rounds=cfg.rounds)
    outcome = _engines()[cfg.protocol](cfg, seed, tr)
    tr.outputs = outcome.as_outputs()
    tr.record("end", "harness", outputs=tr.outputs)
    return tr, compute_metrics(tr)


@dataclass
class TrialResult:
    index: int
    seed: int
    metrics: Metrics
    honest_error: float | None
    digest: str
    counts: dict
    verdict: SecurityVerdict

    @property
    def added_error(self) -> float | None:
        if self.honest_error is None:
            return None
        return self.metrics.error - self.honest_error


def _trial(args) -> TrialResult:
    cfg, i, force, twin = args
    s = trial_seed(cfg.seed, i)
    tr, m = run_scenario(cfg, s, force)
    honest = None
    if twin and cfg.attack is not None:
        _, hm = run_scenario(cfg.model_copy(update={"attack": None}), s)
        honest = hm.error
        m.values["added_error"] = m.error - honest
    v = verdict(m, cfg.protocol, cfg.attack.kind if cfg.attack else None, cfg.params.success_bar)
    return TrialResult(i, s, m, honest, tr.digest, dict(sorted(tr.counts.items())), v)


@dataclass
class RunResult:
    config: ScenarioConfig
    trials: list[TrialResult]
    aggregate: Metrics
    verdict: SecurityVerdict


def run_trials(cfg: ScenarioConfig, force: bool = False, jobs: int = 1, honest_twin: bool = True) -> RunResult:
    cfg = cfg.resolved()
    check_applicable(cfg.protocol, cfg.attack.kind if cfg.attack else None, force)
    args = [(cfg, i, force, honest_twin) for i in range(cfg.trials)]
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_trial, args))
    else:
        results = [_trial(a) for a in args]
    results.sort(key=lambda r: r.index)
    agg = aggregate([r.metrics for r in results])
    kind = cfg.attack.kind if cfg.attack else None
    return RunResult(cfg, results, agg, verdict(agg, cfg.protocol, kind, cfg.params.success_bar))
