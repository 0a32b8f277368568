"""Time-domain Monte-Carlo simulator of the pilot-tone OFDM chain.

One trial draws random data symbols and one Wiener laser-phase path,
synthesizes the received waveform with per-bin dispersion-delayed phase,
strips the common phase with the conjugated pilot tone, demodulates every
bin by discrete correlation, and scores phase error, EVM, and symbol/bit
errors against the transmitted data.

All bins share a single laser: the per-bin phase is the same path sampled
at dispersion-shifted times, never an independent process.  Trials are
seeded individually from (master seed, trial index), so results do not
depend on execution order or worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np

from .constellation import Constellation, make_constellation
from .params import SystemParams, ValidationError, bin_indices, effective_linewidth
from .analytic import bin_delay, dispersion_delay

__all__ = [
    "WienerPath",
    "TrialMetrics",
    "wiener_path",
    "sample_phase",
    "synthesize_received",
    "pilot_cancel",
    "demod_bin",
    "demod_bins",
    "estimate_cpe_variance",
    "run_trials",
    "DEFAULT_GRID_STEPS",
]

# Wiener grid resolution: steps per symbol period.  T/4096 is ~0.24 ps for
# a 1 ns symbol, far below typical dispersion delays, so linear
# interpolation error is negligible against the variances being measured.
DEFAULT_GRID_STEPS = 4096

_CHUNK = 256  # trials per accumulation chunk; fixed so reductions are reproducible


@dataclass(frozen=True)
class WienerPath:
    """Laser phase ψ sampled on a uniform grid, pinned to ψ(0) = 0."""

    dt: float
    t_start: float
    samples: np.ndarray
    seed: object = None

    @property
    def t_end(self) -> float:
        return self.t_start + (len(self.samples) - 1) * self.dt


def wiener_path(linewidth: float, dt: float, span: float, seed, t_start: float = 0.0) -> WienerPath:
    """Simulate laser phase noise as a Wiener process over ``span`` seconds.

    Increments over one grid step are independent zero-mean Gaussians with
    variance 2*pi*linewidth*dt.  The grid point nearest t = 0 is the phase
    reference (only phase differences are observable).
    """
    if dt <= 0:
        raise ValidationError("grid step must be positive")
    if span < 0 or linewidth < 0:
        raise ValidationError("span and linewidth must be nonnegative")
    n_steps = max(int(math.ceil(span / dt - 1e-9)), 0)
    rng = np.random.default_rng(seed)
    samples = np.empty(n_steps + 1)
    samples[0] = 0.0
    if n_steps:
        inc = rng.normal(0.0, math.sqrt(2.0 * math.pi * linewidth * dt), n_steps)
        np.cumsum(inc, out=samples[1:])
    if t_start < 0:
        origin = int(round(-t_start / dt))
        origin = min(max(origin, 0), n_steps)
        samples -= samples[origin]
    return WienerPath(dt=dt, t_start=t_start, samples=samples, seed=seed)


def sample_phase(path: WienerPath, t):
    """Phase at time(s) ``t`` by linear interpolation between grid samples."""
    t = np.asarray(t, dtype=float)
    pos = (t - path.t_start) / path.dt
    last = len(path.samples) - 1
    tol = 1e-9
    if np.any(pos < -tol) or np.any(pos > last + tol):
        raise ValidationError("requested time lies outside the simulated path span")
    idx = np.clip(np.floor(pos).astype(np.int64), 0, last - 1)
    w = pos - idx
    out = path.samples[idx] * (1.0 - w) + path.samples[idx + 1] * w
    return out if out.ndim else float(out)


def _carrier_matrix(bins: np.ndarray, m: int) -> np.ndarray:
    """exp(+2j*pi*k*i/M) for every (bin k, sample i)."""
    i = np.arange(m)
    return np.exp(2j * np.pi * bins[:, None] * i[None, :] / m)


def synthesize_received(
    params: SystemParams,
    symbols: np.ndarray,
    path: WienerPath,
    length: float,
    samples_per_symbol: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One received symbol period plus the pilot tone, both M samples long.

    Bin k contributes its symbol on carrier k with the laser phase sampled
    at t + d_k, where d_k is the bin's dispersion delay from the pilot; the
    pilot itself carries the undelayed phase.  The per-bin delays forbid a
    single inverse-transform shortcut, so synthesis is direct O(N*M).
    """
    bins = bin_indices(params)
    n = params.n_bins
    m = samples_per_symbol if samples_per_symbol is not None else 4 * n
    if m < 4 * n:
        raise ValidationError(f"samples_per_symbol must be >= 4*n_bins = {4 * n}, got {m}")
    symbols = np.asarray(symbols, dtype=complex)
    if symbols.shape != bins.shape or not np.all(np.isfinite(symbols)):
        raise ValidationError("need one finite symbol for every data bin")
    T = params.symbol_time
    tau = dispersion_delay(params, length)
    delays = np.array([bin_delay(params, int(k), tau) for k in bins])
    t = np.arange(m) * (T / m)
    t_max = t[-1] + delays.max(initial=0.0)
    if t_max > path.t_end + 1e-9 * path.dt or path.t_start > 0.0:
        raise ValidationError(
            f"path span [{path.t_start:g}, {path.t_end:g}] too short for one symbol plus delays"
        )
    phases = sample_phase(path, t[None, :] + delays[:, None])
    carriers = _carrier_matrix(bins, m)
    received = (symbols[:, None] * carriers * np.exp(1j * phases)).sum(axis=0)
    pilot = np.exp(1j * sample_phase(path, t))
    return received, pilot


def pilot_cancel(received: np.ndarray, pilot: np.ndarray) -> np.ndarray:
    """Strip the common laser phase: multiply by the normalized pilot conjugate."""
    received = np.asarray(received)
    pilot = np.asarray(pilot)
    if received.shape != pilot.shape:
        raise ValidationError("received and pilot sample counts differ")
    mag = np.abs(pilot)
    if np.any(mag == 0.0):
        raise ValidationError("pilot sample with zero magnitude cannot provide a phase reference")
    return received * np.conj(pilot) / mag


def demod_bin(corrected: np.ndarray, k: int, samples_per_symbol: int | None = None) -> complex:
    """Correlate one symbol period against carrier k: r_k = mean(x * e^{-2j pi k i/M})."""
    corrected = np.asarray(corrected)
    m = len(corrected)
    if samples_per_symbol is not None and samples_per_symbol != m:
        raise ValidationError(f"expected {samples_per_symbol} samples, got {m}")
    i = np.arange(m)
    return complex(np.mean(corrected * np.exp(-2j * np.pi * k * i / m)))


def demod_bins(corrected: np.ndarray, bins: np.ndarray) -> np.ndarray:
    """Correlation demodulation of several bins at once."""
    corrected = np.asarray(corrected)
    m = len(corrected)
    return _carrier_matrix(np.asarray(bins), m).conj() @ corrected / m


def estimate_cpe_variance(
    params: SystemParams,
    k: int,
    length: float,
    trials: int,
    seed,
    grid_steps_per_symbol: int = DEFAULT_GRID_STEPS,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the symbol-averaged CPE variance at bin k.

    Each trial integrates ψ(t) - ψ(t + d_k) over one symbol by trapezoidal
    quadrature on the Wiener grid (the shifted term linearly interpolated)
    and the ensemble variance is returned with its standard error.
    """
    if trials < 2:
        raise ValidationError("need at least two trials to estimate a variance")
    T = params.symbol_time
    d = bin_delay(params, k, dispersion_delay(params, length))
    nT = grid_steps_per_symbol
    dt = T / nT
    q = int(math.floor(d / dt))
    w = d / dt - q
    steps = nT + q + 1  # grid must reach t = T + d (+1 for the interpolation neighbor)
    sigma_step = math.sqrt(2.0 * math.pi * effective_linewidth(params) * dt)

    root = _entropy(seed)
    x = np.empty(trials)
    done = 0
    while done < trials:
        b = min(_CHUNK, trials - done)
        psi = np.empty((b, steps + 1))
        psi[:, 0] = 0.0
        for row in range(b):
            rng = np.random.default_rng((root, done + row))
            np.cumsum(rng.normal(0.0, sigma_step, steps), out=psi[row, 1:])
        head = psi[:, : nT + 1]
        shifted = (1.0 - w) * psi[:, q : q + nT + 1] + w * psi[:, q + 1 : q + nT + 2]
        x[done : done + b] = np.trapezoid(head - shifted, dx=dt, axis=1) / T
        done += b

    var = float(np.var(x, ddof=1))
    mean = x.mean()
    m4 = float(np.mean((x - mean) ** 4))
    se = math.sqrt(max(m4 - var**2 * (trials - 3) / (trials - 1), 0.0) / trials)
    return var, se


@dataclass(frozen=True)
class TrialMetrics:
    """Accumulated Monte-Carlo estimates over all trials."""

    trials: int
    bins: np.ndarray
    phase_var: np.ndarray  # per-bin sample variance of arg(r_k / a_k), rad^2
    phase_var_stderr: np.ndarray
    evm: float  # RMS error vector over RMS symbol magnitude
    symbol_errors: int
    bit_errors: int
    symbols_sent: int
    bits_sent: int
    per_bin_symbol_errors: np.ndarray
    per_bin_bit_errors: np.ndarray


def _entropy(seed) -> int:
    """Collapse a seed token to one integer for (seed, trial) derivation."""
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return int(np.random.SeedSequence(seed).generate_state(1)[0])


class _TrialContext:
    """Everything that is constant across trials, precomputed once."""

    def __init__(self, params: SystemParams, length: float, samples_per_symbol, grid_steps, seed):
        n = params.n_bins
        self.m = samples_per_symbol if samples_per_symbol is not None else 4 * n
        if self.m < 4 * n:
            raise ValidationError(f"samples_per_symbol must be >= 4*n_bins = {4 * n}")
        self.bins = bin_indices(params)
        self.const: Constellation = make_constellation(params.modulation)
        self.points = self.const.points
        self.labels = self.const.labels.astype(np.int64)
        self.seed = _entropy(seed)
        T = params.symbol_time
        tau = dispersion_delay(params, length)
        delays = np.array([bin_delay(params, int(k), tau) for k in self.bins])
        self.dt = T / grid_steps
        t = np.arange(self.m) * (T / self.m)
        pos = (t[None, :] + delays[:, None]) / self.dt
        self.steps = int(math.ceil(pos.max())) + 1
        self.idx = np.floor(pos).astype(np.int64)
        self.w = pos - self.idx
        pos_p = t / self.dt
        self.idx_p = np.floor(pos_p).astype(np.int64)
        self.w_p = pos_p - self.idx_p
        self.carriers = _carrier_matrix(self.bins, self.m)
        self.demod = self.carriers.conj() / self.m
        self.sigma_step = math.sqrt(2.0 * math.pi * effective_linewidth(params) * self.dt)
        self.order = len(self.points)
        # popcount of label XORs for bit-error counting
        xor = self.labels[:, None] ^ self.labels[None, :]
        self.hamming = np.array(
            [[int(v).bit_count() for v in row] for row in xor], dtype=np.int64
        )


def _run_chunk(ctx: _TrialContext, start: int, count: int) -> dict:
    n = len(ctx.bins)
    s1 = np.zeros(n)
    s2 = np.zeros(n)
    s3 = np.zeros(n)
    s4 = np.zeros(n)
    evm_num = 0.0
    evm_den = 0.0
    sym_err = np.zeros(n, dtype=np.int64)
    bit_err = np.zeros(n, dtype=np.int64)
    psi = np.empty(ctx.steps + 1)
    psi[0] = 0.0
    for trial in range(start, start + count):
        rng = np.random.default_rng((ctx.seed, trial))
        sent = rng.integers(0, ctx.order, n)
        a = ctx.points[sent]
        np.cumsum(rng.normal(0.0, ctx.sigma_step, ctx.steps), out=psi[1:])
        phases = psi[ctx.idx] * (1.0 - ctx.w) + psi[ctx.idx + 1] * ctx.w
        received = (a[:, None] * ctx.carriers * np.exp(1j * phases)).sum(axis=0)
        pilot_phase = psi[ctx.idx_p] * (1.0 - ctx.w_p) + psi[ctx.idx_p + 1] * ctx.w_p
        corrected = pilot_cancel(received, np.exp(1j * pilot_phase))
        r = ctx.demod @ corrected
        err = np.angle(r * np.conj(a))
        s1 += err
        e2 = err * err
        s2 += e2
        s3 += e2 * err
        s4 += e2 * e2
        diff = r - a
        evm_num += float(np.real(diff @ diff.conj()))
        evm_den += float(np.real(a @ a.conj()))
        decided = np.argmin(np.abs(r[:, None] - ctx.points[None, :]), axis=1)
        wrong = decided != sent
        sym_err += wrong
        bit_err += ctx.hamming[sent, decided]
    return {
        "s1": s1, "s2": s2, "s3": s3, "s4": s4,
        "evm_num": evm_num, "evm_den": evm_den,
        "sym_err": sym_err, "bit_err": bit_err,
    }


_WORKER_CTX: _TrialContext | None = None


def _worker_init(ctx: _TrialContext) -> None:
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _worker_chunk(args: tuple[int, int]) -> dict:
    return _run_chunk(_WORKER_CTX, *args)


def run_trials(
    params: SystemParams,
    length: float,
    trials: int,
    samples_per_symbol: int | None = None,
    seed=0,
    grid_steps_per_symbol: int = DEFAULT_GRID_STEPS,
    jobs: int = 1,
) -> TrialMetrics:
    """Full transmit-cancel-demodulate Monte Carlo over ``trials`` symbols.

    Results are bit-identical for a fixed (seed, trials, params) regardless
    of ``jobs``: every trial derives its own generator from (seed, trial
    index) and partial sums are combined in fixed chunk order.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    ctx = _TrialContext(params, length, samples_per_symbol, grid_steps_per_symbol, seed)
    chunks = [(start, min(_CHUNK, trials - start)) for start in range(0, trials, _CHUNK)]
    if jobs > 1 and len(chunks) > 1:
        with get_context("fork").Pool(jobs, initializer=_worker_init, initargs=(ctx,)) as pool:
            partials = pool.map(_worker_chunk, chunks)
    else:
        partials = [_run_chunk(ctx, *chunk) for chunk in chunks]

    keys = ("s1", "s2", "s3", "s4", "evm_num", "evm_den", "sym_err", "bit_err")
    acc = {key: sum(p[key] for p in partials) for key in keys}

    n = len(ctx.bins)
    m = trials
    mean = acc["s1"] / m
    if m > 1:
        var = (acc["s2"] - m * mean**2) / (m - 1)
        var = np.maximum(var, 0.0)
        m2 = acc["s2"] / m - mean**2
        m4 = acc["s4"] / m - 4 * mean * acc["s3"] / m + 6 * mean**2 * acc["s2"] / m - 3 * mean**4
        se = np.sqrt(np.maximum(m4 - var**2 * (m - 3) / (m - 1), 0.0) / m)
    else:
        var = np.zeros(n)
        se = np.zeros(n)
    evm = math.sqrt(acc["evm_num"] / acc["evm_den"]) if acc["evm_den"] > 0 else 0.0
    bits = params.modulation.bits_per_symbol
    return TrialMetrics(
        trials=m,
        bins=ctx.bins,
        phase_var=var,
        phase_var_stderr=se,
        evm=evm,
        symbol_errors=int(acc["sym_err"].sum()),
        bit_errors=int(acc["bit_err"].sum()),
        symbols_sent=m * n,
        bits_sent=m * n * bits,
        per_bin_symbol_errors=acc["sym_err"],
        per_bin_bit_errors=acc["bit_err"],
    )
