"""Quantum-jump unraveling and dark/bright period statistics.

Waiting times are sampled exactly: between jumps the unnormalized state
evolves under ``H_eff = H - i/2 sum_k L_k^+ L_k`` and the next jump happens
when its squared norm falls to a uniform random number.  Each trajectory of an
ensemble draws from its own stream ``SeedSequence(seed, spawn_key=(index,))``,
so results do not depend on how trajectories are distributed over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
from scipy.optimize import brentq

from .errors import ConfigurationError, ConsistencyError
from .fcs import steady_states
from .hilbert import Operator
from .model import LindbladModel, SwitchParams, derived_rates


@dataclass(frozen=True)
class TrajectoryConfig:
    t_max: float
    initial: object = "steady"
    seed: int = 0
    n_traj: int = 1
    counted: tuple[str, ...] = ("r_emit", "r_abs")
    renorm_interval: float | None = None

    def __post_init__(self):
        if not self.t_max > 0:
            raise ConfigurationError("t_max must be positive")
        if self.n_traj < 1:
            raise ConfigurationError("ensemble size must be >= 1")
        object.__setattr__(self, "counted", tuple(self.counted))


@dataclass(frozen=True)
class JumpRecord:
    times: tuple[float, ...]
    labels: tuple[str, ...]
    t_final: float
    seed: int
    index: int = 0
    parities: tuple[float, ...] | None = None
    initial_parity: float | None = None

    @property
    def events(self):
        return list(zip(self.times, self.labels))

    def counted_times(self, counted) -> np.ndarray:
        counted = set(counted)
        return np.array([t for t, lab in zip(self.times, self.labels) if lab in counted])


class NoJumpPropagator:
    """psi(t) = exp(-i H_eff t) psi0 via an eigendecomposition of H_eff.

    Falls back to dense matrix exponentials when the eigenbasis is badly
    conditioned.
    """

    def __init__(self, H_eff: np.ndarray, cond_max: float = 1e8):
        self.H_eff = H_eff
        vals, V = la.eig(H_eff)
        self.use_eig = np.linalg.cond(V) < cond_max
        if self.use_eig:
            self.vals = vals
            self.V = V
            self.Vinv = la.inv(V)
            self.gram = V.conj().T @ V

    def coefficients(self, psi: np.ndarray):
        return self.Vinv @ psi if self.use_eig else psi

    def norm2(self, c: np.ndarray, t: float) -> float:
        if self.use_eig:
            z = np.exp(-1j * self.vals * t) * c
            return float(np.real(np.vdot(z, self.gram @ z)))
        psi = la.expm(-1j * self.H_eff * t) @ c
        return float(np.real(np.vdot(psi, psi)))

    def evolve(self, c: np.ndarray, t: float) -> np.ndarray:
        if self.use_eig:
            return self.V @ (np.exp(-1j * self.vals * t) * c)
        return la.expm(-1j * self.H_eff * t) @ c


def _initial_pure_states(m: LindbladModel, initial, symmetry: Operator | None):
    """Return (weights, kets) from which initial pure states are drawn."""
    d = m.space.dim
    if isinstance(initial, str):
        if initial == "steady":
            rho = steady_states(m).states[0]
        else:
            return np.ones(1), [m.space.ket(initial)]
    else:
        arr = np.asarray(initial, dtype=complex)
        if arr.shape == (d,):
            return np.ones(1), [arr / np.linalg.norm(arr)]
        if arr.shape != (d, d):
            raise ConfigurationError(f"initial state must be a label, a ket or a {d}x{d} density matrix")
        rho = arr
    rho = 0.5 * (rho + rho.conj().T)
    if symmetry is not None and np.linalg.norm(symmetry.elements @ rho - rho @ symmetry.elements) < 1e-9:
        # block-diagonal in the symmetry sectors: unravel each sector separately
        vals, vecs = la.eigh(symmetry.elements)
        weights, kets = [], []
        for lab in np.unique(np.round(vals, 9)):
            V = vecs[:, np.isclose(vals, lab)]
            w, u = la.eigh(V.conj().T @ rho @ V)
            weights.extend(w)
            kets.extend((V @ u).T)
        weights = np.array(weights)
    else:
        weights, u = la.eigh(rho)
        kets = list(u.T)
    weights = np.clip(weights.real, 0, None)
    return weights / weights.sum(), kets


def run_trajectory(
    m: LindbladModel,
    cfg: TrajectoryConfig,
    index: int = 0,
    symmetry: Operator | None = None,
    _cache: dict | None = None,
) -> JumpRecord:
    """Single quantum-jump trajectory, deterministic in ``(cfg.seed, index)``.

    If ``symmetry`` is given, its expectation value is recorded after every jump.
    """
    cache = _cache if _cache is not None else {}
    if "prop" not in cache:
        Ls = np.array([c.op.elements for c in m.channels])
        decay = sum(L.conj().T @ L for L in Ls)
        cache["Ls"] = Ls
        cache["prop"] = NoJumpPropagator(m.H.elements - 0.5j * decay)
        cache["init"] = _initial_pure_states(m, cfg.initial, symmetry)
    Ls, prop = cache["Ls"], cache["prop"]
    weights, kets = cache["init"]
    labels = m.labels

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(index,)))
    psi = np.array(kets[rng.choice(len(kets), p=weights)], dtype=complex)
    psi /= np.linalg.norm(psi)
    U = None if symmetry is None else symmetry.elements
    parity = (lambda v: float(np.real(np.vdot(v, U @ v)))) if U is not None else None
    p0 = parity(psi) if parity is not None else None

    chunk = cfg.renorm_interval or cfg.t_max / 64
    t = 0.0
    times, events, pars = [], [], []
    target = rng.random()
    c = prop.coefficients(psi)
    while True:
        span = min(chunk, cfg.t_max - t)
        end_norm = prop.norm2(c, span)
        if end_norm > target:
            t += span
            if t >= cfg.t_max:
                break
            # no jump within this chunk: renormalize and rescale the threshold
            psi = prop.evolve(c, span)
            psi /= math.sqrt(end_norm)
            target /= end_norm
            c = prop.coefficients(psi)
            continue
        tau = brentq(lambda x: prop.norm2(c, x) - target, 0.0, span, xtol=1e-12, rtol=1e-10, maxiter=200)
        t_jump = t + tau
        psi = prop.evolve(c, tau)
        psi /= np.linalg.norm(psi)
        amps = Ls @ psi
        rates = np.einsum("ki,ki->k", amps.conj(), amps).real
        k = int(rng.choice(len(rates), p=rates / rates.sum()))
        psi = amps[k] / np.linalg.norm(amps[k])
        if times and t_jump <= times[-1]:
            t_jump = np.nextafter(times[-1], np.inf)
        times.append(t_jump)
        events.append(labels[k])
        if parity is not None:
            pars.append(parity(psi))
        t = t_jump
        target = rng.random()
        c = prop.coefficients(psi)
        if t >= cfg.t_max:
            break
    return JumpRecord(
        times=tuple(times),
        labels=tuple(events),
        t_final=cfg.t_max,
        seed=cfg.seed,
        index=index,
        parities=tuple(pars) if parity is not None else None,
        initial_parity=p0,
    )


def _run_batch(args):
    m, cfg, indices, symmetry = args
    cache: dict = {}
    return [run_trajectory(m, cfg, i, symmetry, cache) for i in indices]


def run_ensemble(m: LindbladModel, cfg: TrajectoryConfig, symmetry: Operator | None = None, workers: int = 1) -> list[JumpRecord]:
    """``cfg.n_traj`` independent trajectories, returned in index order."""
    indices = list(range(cfg.n_traj))
    if workers <= 1:
        return _run_batch((m, cfg, indices, symmetry))
    batches = [indices[i::workers] for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        results = [r for batch in pool.map(_run_batch, [(m, cfg, b, symmetry) for b in batches]) for r in batch]
    return sorted(results, key=lambda r: r.index)


# --------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class RateEstimate:
    rate: float
    stderr: float
    n_samples: int
    n_events: int


def counted_rate(records, m: LindbladModel, counted=None, n_blocks: int = 10) -> RateEstimate:
    """Counting-weighted event rate; standard error from trajectory spread or batch means."""
    weights = {c.label: c.nu for c in m.channels}
    if counted is not None:
        weights = {k: v for k, v in weights.items() if k in set(counted)}
    n_events = 0
    if len(records) >= 2:
        samples = []
        for r in records:
            net = sum(weights.get(lab, 0) for lab in r.labels)
            n_events += sum(1 for lab in r.labels if weights.get(lab, 0))
            samples.append(net / r.t_final)
    else:
        (r,) = records
        edges = np.linspace(0.0, r.t_final, n_blocks + 1)
        net = np.zeros(n_blocks)
        for t, lab in zip(r.times, r.labels):
            w = weights.get(lab, 0)
            if w:
                n_events += 1
                net[min(np.searchsorted(edges, t, side="right") - 1, n_blocks - 1)] += w
        samples = list(net / np.diff(edges))
    samples = np.asarray(samples)
    se = samples.std(ddof=1) / math.sqrt(samples.size) if samples.size > 1 else math.nan
    return RateEstimate(float(samples.mean()), float(se), int(samples.size), n_events)


@dataclass(frozen=True)
class PeriodStats:
    dark: tuple[float, ...]
    bright_intervals: tuple[float, ...]
    threshold: float | None
    method: str = "gap"
    flag: str | None = None

    @staticmethod
    def _mean_se(x):
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return math.nan, math.nan
        se = x.std(ddof=1) / math.sqrt(x.size) if x.size > 1 else math.nan
        return float(x.mean()), float(se)

    @property
    def n_dark(self) -> int:
        return len(self.dark)

    @property
    def n_bright(self) -> int:
        return len(self.bright_intervals)

    @property
    def T_D(self):
        return self._mean_se(self.dark)

    @property
    def T_C(self):
        return self._mean_se(self.bright_intervals)

    def summary(self) -> dict:
        (td, td_se), (tc, tc_se) = self.T_D, self.T_C
        return {
            "method": self.method,
            "threshold": self.threshold,
            "flag": self.flag,
            "T_D": td,
            "T_D_stderr": td_se,
            "n_dark": self.n_dark,
            "T_C": tc,
            "T_C_stderr": tc_se,
            "n_bright_intervals": self.n_bright,
        }


def segment_periods(rec: JumpRecord, threshold: float, counted=("r_emit", "r_abs")) -> PeriodStats:
    """Classify gaps between counted events: longer than ``threshold`` is dark.

    The segments before the first and after the last counted event are
    censored and ignored.
    """
    if not threshold > 0:
        raise ConfigurationError("threshold must be positive")
    t = rec.counted_times(counted)
    if t.size < 2:
        return PeriodStats((), (), threshold, "gap", "fewer than 2 counted events")
    gaps = np.diff(t)
    dark = gaps[gaps > threshold]
    bright = gaps[gaps <= threshold]
    return PeriodStats(tuple(map(float, dark)), tuple(map(float, bright)), threshold, "gap")


def parity_periods(rec: JumpRecord, counted=("r_emit", "r_abs")) -> PeriodStats:
    """Dark periods read from the recorded symmetry expectation (negative = dark).

    A dark period runs from the jump that enters the odd sector to the jump
    that leaves it; intervals touching the start or end of the record are
    censored.  Bright intervals are gaps between consecutive counted events
    that both fall inside the same even-sector period.
    """
    if rec.parities is None or rec.initial_parity is None:
        raise ConfigurationError("record carries no parity information; run with a symmetry operator")
    bounds = [0.0, *rec.times, rec.t_final]
    signs = [rec.initial_parity, *rec.parities]
    # segments of constant sign: (start, end, sign, censored)
    segs = []
    start, cur = 0.0, signs[0] < 0
    for i in range(1, len(signs)):
        s = signs[i] < 0
        if s != cur:
            segs.append((start, bounds[i], cur, start == 0.0))
            start, cur = bounds[i], s
    segs.append((start, rec.t_final, cur, True))
    dark = [b - a for a, b, odd, cens in segs if odd and not cens]

    counted = set(counted)
    bright = []
    tc = [(t, k) for k, (t, lab) in enumerate(zip(rec.times, rec.labels)) if lab in counted]
    for (t0, k0), (t1, k1) in zip(tc, tc[1:]):
        if signs[k0 + 1] >= 0 and all(p >= 0 for p in signs[k0 + 1 : k1 + 1]):
            bright.append(t1 - t0)
    flag = None if dark else "no complete dark period"
    return PeriodStats(tuple(dark), tuple(bright), None, "parity", flag)


def pool_stats(stats) -> PeriodStats:
    stats = list(stats)
    dark = tuple(x for s in stats for x in s.dark)
    bright = tuple(x for s in stats for x in s.bright_intervals)
    thr = stats[0].threshold if stats else None
    method = stats[0].method if stats else "gap"
    return PeriodStats(dark, bright, thr, method, None if dark else "no complete dark period")


# --------------------------------------------------------------------------
# analytic dark-period law


def dark_period_formula(p: SwitchParams) -> float:
    """Closed-form mean dark period 8 delta^2 / (omega0^2 (2 gamma0 + gamma1))."""
    denom = p.omega0**2 * (2 * p.gamma0 + p.gamma1)
    return math.inf if denom == 0 else 8 * p.delta**2 / denom


def dark_transition_rate(p: SwitchParams) -> tuple[float, float]:
    """Rate of leaving the antisymmetric state and its reciprocal (the mean dark period)."""
    r = derived_rates(p)
    rate = r.gamma0_eff + 0.5 * r.gamma1_eff
    if rate == 0:
        return 0.0, math.inf
    T_D = 1.0 / rate
    expected = dark_period_formula(p)
    if not math.isclose(T_D, expected, rel_tol=1e-12):
        raise ConsistencyError(f"dark period {T_D} disagrees with closed form {expected}")
    return rate, T_D


def default_threshold(T_C: float, T_D: float) -> float:
    """Geometric mean of the bright inter-click time and the dark period."""
    return math.sqrt(T_C * T_D)
