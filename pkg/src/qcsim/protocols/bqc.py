"""Client-side preparation for blind quantum computing.

The client sends |+_theta> = (|0> + e^{i theta}|1>)/sqrt(2) with theta on
the eight-point grid k*pi/4 and instructs the server with
delta = phi + theta + pi*r.  Blindness is scored as the server's
Bayes-optimal probability of guessing theta from what it sees: delta, its
measurement outcome, and whatever an attack leaks.  Angles are handled as
grid indices (multiples of pi/4) throughout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from .. import build
from ..config import ScenarioConfig
from ..errors import ConfigurationError
from ..harness import ProtocolTranscript, derive_stream, make_party
from ..metrics import Outcome
from ..photonics import PureState

GRID = 8
STEP = np.pi / 4


def bqc_prepare(theta_index: int, r: int = 0) -> PureState:
    """The qubit sent for grid angle ``theta_index``; ``r`` only enters delta."""
    if not 0 <= theta_index < GRID or r not in (0, 1):
        raise ValueError("theta_index in 0..7 and r in {0, 1} required")
    theta = theta_index * STEP
    return PureState(np.array([1, np.exp(1j * theta)]) / np.sqrt(2))


def bqc_delta(phi: float, theta: float, r: int) -> float:
    return float(np.mod(phi + theta + np.pi * r, 2 * np.pi))


def delta_index(phi_idx, theta_idx, r):
    return np.mod(np.asarray(phi_idx) + np.asarray(theta_idx) + 4 * np.asarray(r), GRID)


def delta_likelihood() -> np.ndarray:
    """P(delta | theta) as an 8x8 table, marginalizing phi and r (both uniform)."""
    table = np.zeros((GRID, GRID))
    for theta in range(GRID):
        for phi in range(GRID):
            for r in (0, 1):
                table[theta, int(delta_index(phi, theta, r))] += 1 / (GRID * 2)
    return table


def srm_povm(states: list[PureState], priors=None) -> list[np.ndarray]:
    """Square-root (pretty-good) measurement for an ensemble of pure states."""
    vecs = [s.amplitudes for s in states]
    priors = np.full(len(vecs), 1 / len(vecs)) if priors is None else np.asarray(priors)
    rho = sum(p * np.outer(v, v.conj()) for p, v in zip(priors, vecs))
    w, u = np.linalg.eigh(rho)
    inv_sqrt = u @ np.diag([1 / np.sqrt(x) if x > 1e-12 else 0.0 for x in w]) @ u.conj().T
    return [p * inv_sqrt @ np.outer(v, v.conj()) @ inv_sqrt for p, v in zip(priors, vecs)]


def srm_likelihood() -> np.ndarray:
    """P(k | theta) for the square-root measurement on the eight preparation states, indexed [theta, k]."""
    states = [bqc_prepare(k) for k in range(GRID)]
    povm = srm_povm(states)
    return np.array([[float(np.real(s.amplitudes.conj() @ m @ s.amplitudes)) for m in povm] for s in states])


@dataclass
class ServerView:
    """Everything the server (with Eve's help) holds about each delivered qubit.

    ``likelihood`` rows are P(observed data | theta) up to a constant.
    """

    delta: np.ndarray
    outcomes: np.ndarray
    likelihood: np.ndarray

    def posterior(self) -> np.ndarray:
        lk = self.likelihood * delta_likelihood()[:, self.delta].T
        return lk / lk.sum(axis=1, keepdims=True)


def bqc_blindness(view: ServerView) -> float:
    """Mean Bayes-optimal single-guess probability of theta."""
    if len(view.delta) == 0:
        return 1 / GRID
    return float(view.posterior().max(axis=1).mean())


def _sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(len(probs))
    return (probs.cumsum(axis=1) < u[:, None]).sum(axis=1).clip(max=probs.shape[1] - 1)


def run_bqc(cfg: ScenarioConfig, seed: int, tr: ProtocolTranscript) -> Outcome:
    client = make_party(seed, "client", "client")
    server = make_party(seed, "server", "server")
    source = derive_stream(seed, "source")
    ch_rng = derive_stream(seed, "channel:client-server")
    eve_rng = derive_stream(seed, "eve")
    attack = cfg.attack
    kind = attack.kind if attack else None
    if kind not in (None, "pns", "trojan"):
        raise ConfigurationError(f"no attack model for {kind} on bqc", "attack.kind")
    n = cfg.rounds
    out = Outcome()

    theta = client.rng.integers(GRID, size=n)
    r = client.rng.integers(2, size=n)
    phi = client.rng.integers(GRID, size=n)  # the computation's angles, unknown to the server
    delta = delta_index(phi, theta, r)
    photons = source.poisson(cfg.params.bqc_mu, size=n)
    survival = build.channel(cfg, "client-server").survival
    lk = np.ones((n, GRID))
    leaked = np.zeros(n, dtype=bool)

    if kind == "pns":
        # Eve keeps one photon of every multi-photon pulse and forwards the rest losslessly.
        delivered = photons >= 1
        leaked = photons >= 2
        table = srm_likelihood()
        k = _sample_rows(table[theta[leaked]], eve_rng)
        lk[leaked] = table[:, k].T
    else:
        delivered = ch_rng.binomial(photons, survival) >= 1
    probe = None
    if kind == "trojan":
        probe = build.trojan_probe(cfg)
        p_read = float(poisson.sf(probe.threshold - 1, probe.n_bar))
        leaked = eve_rng.random(n) < p_read
        lk[leaked] = np.eye(GRID)[theta[leaked]]
        probe.probes += n
        if probe.watchdog is not None:
            # Each probe pulse is also seen by the tap detector.
            alarm_p = 1 - (1 - probe.watchdog.eta) ** probe.tap_photons * (1 - probe.watchdog.dark_prob)
            blinded = probe.blind_watchdog and probe.cw_power >= probe.watchdog.p_blind
            probe.alarms += 0 if blinded else int((eve_rng.random(n) < alarm_p).sum())

    outcomes = server.rng.integers(2, size=n)
    view = ServerView(delta[delivered], outcomes[delivered], lk[delivered])
    post = view.posterior() if delivered.any() else np.zeros((0, GRID))
    informative = post.max(axis=1) > 1 / GRID + 1e-12
    blindness = bqc_blindness(view)
    if probe is not None and probe.alarms:
        out.abort(f"watchdog raised {probe.alarms} alarms")
    m = int(delivered.sum())
    out.values.update(blindness=blindness, mu=cfg.params.bqc_mu)
    out.rate("eve_knowledge", int(round(blindness * m)), m)
    out.rate("eve_success", int(informative.sum()) if not out.aborted else 0, m)
    out.rate("leaked", int(leaked[delivered].sum()), m)
    out.rate("error", 0, m)
    out.rate("legit_accept", int(not out.aborted), 1)
    if probe is not None:
        out.rate("trojan_read", int(leaked.sum()), n)
        out.values["trojan_mean_reflected_photons"] = probe.n_bar
    out.counts.update(delivered=m, multi_photon=int((photons >= 2).sum()))
    tr.record("decision", "client", blindness=blindness)
    return out
