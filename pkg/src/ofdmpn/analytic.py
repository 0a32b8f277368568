"""Closed-form phase-noise variances, BER floors, and the reach solver.

The pilot tone removes the laser phase common to pilot and data bin; what
remains for bin k is the phase accumulated over the chromatic-dispersion
delay between the two, time-averaged by the correlation receiver over one
symbol.  This module evaluates the variance of that residual (common phase
error), the crosstalk budget from the other bins (inter-carrier
interference), the resulting per-bin and band-averaged bit-error-ratio
floors, and the largest fiber length that keeps a chosen BER criterion
under a target.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .constellation import make_constellation, power_stats
from .params import (
    BerConvention,
    ModulationScheme,
    SystemKind,
    SystemParams,
    ValidationError,
    VarianceMode,
    bin_indices,
    effective_linewidth,
)

__all__ = [
    "ReachCriterion",
    "VarianceReport",
    "BerReport",
    "ReachResult",
    "dispersion_delay",
    "bin_delay",
    "cpe_variance",
    "ici_pair_variance",
    "ici_total_variance",
    "total_variance",
    "ber_bin",
    "band_average",
    "band_ber",
    "variance_report",
    "worst_bin_ber",
    "solve_reach",
]


class ReachCriterion(enum.Enum):
    """Which BER figure the reach solver holds under the target."""

    WORST_BIN = "worst_bin"
    BAND_AVERAGE = "band_average"

    @classmethod
    def parse(cls, text: str) -> "ReachCriterion":
        key = text.strip().lower()
        aliases = {"band": cls.BAND_AVERAGE, "worst": cls.WORST_BIN}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown reach criterion {text!r}") from None


@dataclass(frozen=True)
class VarianceReport:
    """Per-bin phase-error variance budget for one fiber length."""

    length: float  # meters
    tau: float  # seconds, adjacent-bin dispersion delay
    bins: np.ndarray
    cpe_var: np.ndarray  # rad^2
    ici_var: np.ndarray  # rad^2

    @property
    def total_var(self) -> np.ndarray:
        return self.cpe_var + self.ici_var


@dataclass(frozen=True)
class BerReport:
    """Per-bin and band-averaged BER floor for one fiber length."""

    length: float  # meters
    bins: np.ndarray
    ber: np.ndarray
    band_ber: float
    convention: BerConvention


@dataclass(frozen=True)
class ReachResult:
    """Reach solver outcome; ``saturated`` means the target was never hit."""

    length: float  # meters
    saturated: bool

    @property
    def length_km(self) -> float:
        return self.length / 1e3


def dispersion_delay(params: SystemParams, length: float) -> float:
    """Differential group delay between adjacent bins, seconds.

    Chromatic dispersion walks neighboring subcarriers apart by
    D * L * wavelength^2 * delta_f / c per bin of frequency separation.
    """
    return params.dispersion * length * params.wavelength**2 * params.delta_f / params.light_speed


def bin_delay(params: SystemParams, k: int, tau: float) -> float:
    """Phase-noise delay of bin k relative to the pilot tone, seconds.

    The delay scales with the pilot-to-bin frequency separation: |k| bins
    for coherent systems (pilot at band center), N + k bins for direct
    detection (pilot N bins below the band).
    """
    _check_bin(params, k)
    if params.kind is SystemKind.CO:
        return abs(k) * tau
    return (params.n_bins + k) * tau


def _check_bin(params: SystemParams, k: int) -> None:
    half = params.n_bins // 2
    if params.kind is SystemKind.CO:
        ok = k != 0 and -half <= k <= half
    else:
        ok = 1 <= k <= params.n_bins
    if not ok:
        raise ValidationError(f"bin {k} out of range for {params.kind.value} with N={params.n_bins}")


def _filtered_variance(gamma, d, symbol_time, mode: VarianceMode):
    """Variance of the symbol-averaged phase difference at delay(s) ``d``.

    ``gamma`` is the Wiener diffusion rate 2*pi*linewidth (rad^2/s).  The
    exact form follows from the double integral of the triangular Wiener
    difference covariance over the symbol period:

        d <= T:  gamma * (d^2/T - d^3/(3 T^2))
        d >= T:  gamma * (d - T/3)

    The linearized form gamma * (2/3) * d matches the exact one at d = T.
    """
    d = np.asarray(d, dtype=float)
    if mode is VarianceMode.PAPER_LINEAR:
        out = (2.0 / 3.0) * gamma * d
    else:
        T = symbol_time
        below = gamma * (d**2 / T - d**3 / (3.0 * T**2))
        above = gamma * (d - T / 3.0)
        out = np.where(d <= T, below, above)
    return out if out.ndim else float(out)


def cpe_variance(
    params: SystemParams,
    k: int,
    length: float,
    mode: VarianceMode = VarianceMode.PAPER_LINEAR,
) -> float:
    """Common-phase-error variance of bin k, rad^2."""
    d = bin_delay(params, k, dispersion_delay(params, length))
    gamma = 2.0 * math.pi * effective_linewidth(params)
    return _filtered_variance(gamma, d, params.symbol_time, mode)


def ici_pair_variance(
    params: SystemParams,
    k: int,
    r: int,
    length: float,
    amp_ratio_sq: float,
) -> float:
    """Phase disturbance of bin k from a single interfering bin r, rad^2.

    ``amp_ratio_sq`` is the interferer-to-victim power ratio |a_r/a_k|^2
    assumed by the caller; the in-phase projection of the interference
    contributes a further 1/sqrt(2).
    """
    if r == k:
        raise ValidationError(f"interferer bin must differ from victim bin (both {k})")
    if amp_ratio_sq < 0:
        raise ValidationError("amp_ratio_sq must be nonnegative")
    _check_bin(params, k)
    d_r = bin_delay(params, r, dispersion_delay(params, length))
    gamma = 2.0 * math.pi * effective_linewidth(params)
    return amp_ratio_sq * (2.0 / 3.0) * gamma * d_r / math.sqrt(2.0)


def _worst_case_amp_ratio_sq(modulation: ModulationScheme) -> float:
    """Mean interferer power over the worst-case (minimum) victim power."""
    mean_p, min_p, _ = power_stats(make_constellation(modulation))
    return mean_p / min_p


def ici_total_variance(params: SystemParams, k: int, length: float) -> float:
    """Worst-case total ICI variance at bin k, summed over all other bins.

    Interferer amplitudes are averaged over the constellation while the
    victim sits at the constellation point closest to the origin; for any
    PSK the ratio is exactly one.
    """
    _check_bin(params, k)
    ratio = _worst_case_amp_ratio_sq(params.modulation)
    total = 0.0
    for r in bin_indices(params):
        r = int(r)
        if r == k:
            continue
        total += ici_pair_variance(params, k, r, length, ratio)
    return total


def total_variance(
    params: SystemParams,
    k: int,
    length: float,
    mode: VarianceMode = VarianceMode.PAPER_LINEAR,
    include_ici: bool = False,
) -> float:
    """Phase-error variance at bin k: CPE plus (optionally) total ICI."""
    var = cpe_variance(params, k, length, mode)
    if include_ici:
        var += ici_total_variance(params, k, length)
    return var


def ber_bin(sigma_sq: float, modulation: ModulationScheme) -> float:
    """BER floor of one bin given its phase-error variance, rad^2.

    Gaussian phase error of std sigma against angular decision sectors of
    half-width pi/n; zero variance returns exactly zero.
    """
    if sigma_sq < 0:
        raise ValidationError("phase-error variance must be nonnegative")
    if sigma_sq == 0.0:
        return 0.0
    n = modulation.angle_sectors
    arg = math.pi / (n * math.sqrt(2.0 * sigma_sq))
    return math.erfc(arg) / (2.0 * modulation.bits_per_symbol)


def _delays(params: SystemParams, length: float) -> tuple[np.ndarray, np.ndarray, float]:
    """(bins, per-bin pilot delays, adjacent-bin delay) for one length."""
    bins = bin_indices(params)
    tau = dispersion_delay(params, length)
    if params.kind is SystemKind.CO:
        d = np.abs(bins) * tau
    else:
        d = (params.n_bins + bins) * tau
    return bins, d, tau


def variance_report(
    params: SystemParams,
    length: float,
    mode: VarianceMode = VarianceMode.PAPER_LINEAR,
    include_ici: bool = True,
) -> VarianceReport:
    """Per-bin CPE and ICI variance budget for one fiber length."""
    bins, d, tau = _delays(params, length)
    gamma = 2.0 * math.pi * effective_linewidth(params)
    cpe = np.asarray(_filtered_variance(gamma, d, params.symbol_time, mode))
    if include_ici:
        ratio = _worst_case_amp_ratio_sq(params.modulation)
        pair = ratio * (2.0 / 3.0) * gamma * d / math.sqrt(2.0)
        ici = pair.sum() - pair  # every bin interferes with all others
    else:
        ici = np.zeros_like(cpe)
    return VarianceReport(length=length, tau=tau, bins=bins, cpe_var=cpe, ici_var=ici)


def _per_bin_ber(
    params: SystemParams,
    length: float,
    mode: VarianceMode,
    include_ici: bool,
) -> tuple[np.ndarray, np.ndarray]:
    report = variance_report(params, length, mode, include_ici)
    var = report.total_var
    ber = np.array([ber_bin(float(v), params.modulation) for v in var])
    return report.bins, ber


def band_average(
    per_bin_ber: np.ndarray,
    kind: SystemKind,
    n_bins: int,
    convention: BerConvention = BerConvention.AS_PRINTED,
) -> float:
    """Combine per-bin BER values into the band figure.

    ``per_bin_ber`` holds the bins of the one-sided sum: positive bins
    1..N/2 for coherent systems, all bins 1..N for direct detection.  The
    printed convention divides the sum by N either way; the symmetric
    convention doubles the coherent result so it equals the true mean over
    all N data bins (negative bins mirror positive ones).
    """
    per_bin_ber = np.asarray(per_bin_ber, dtype=float)
    expected = n_bins // 2 if kind is SystemKind.CO else n_bins
    if per_bin_ber.shape != (expected,):
        raise ValidationError(
            f"expected {expected} one-sided per-bin values for {kind.value}, got {per_bin_ber.shape}"
        )
    band = float(per_bin_ber.sum()) / n_bins
    if kind is SystemKind.CO and convention is BerConvention.SYMMETRIC_AVERAGE:
        band *= 2.0
    return band


def band_ber(
    params: SystemParams,
    length: float,
    mode: VarianceMode = VarianceMode.PAPER_LINEAR,
    include_ici: bool = False,
    convention: BerConvention = BerConvention.AS_PRINTED,
) -> BerReport:
    """Per-bin BER floors and their band average for one fiber length."""
    bins, ber = _per_bin_ber(params, length, mode, include_ici)
    one_sided = ber[bins > 0] if params.kind is SystemKind.CO else ber
    band = band_average(one_sided, params.kind, params.n_bins, convention)
    return BerReport(length=length, bins=bins, ber=ber, band_ber=band, convention=convention)


def worst_bin_ber(
    params: SystemParams,
    length: float,
    mode: VarianceMode = VarianceMode.PAPER_LINEAR,
    include_ici: bool = False,
) -> float:
    """Largest per-bin BER floor across the band."""
    report = variance_report(params, length, mode, include_ici)
    return ber_bin(float(report.total_var.max()), params.modulation)


def solve_reach(
    params: SystemParams,
    target_ber: float,
    mode: VarianceMode = VarianceMode.PAPER_LINEAR,
    include_ici: bool = False,
    convention: BerConvention = BerConvention.AS_PRINTED,
    criterion: ReachCriterion = ReachCriterion.WORST_BIN,
    max_length: float = 2_000_000.0,
    resolution: float = 100.0,
) -> ReachResult:
    """Largest fiber length whose BER criterion stays at or below the target.

    BER floors are monotone in length, so plain bisection down to the
    requested resolution (0.1 km by default) suffices.  If the criterion
    never exceeds the target inside [0, max_length] the result carries a
    saturation flag.
    """
    if not 0.0 < target_ber < 0.5:
        raise ValidationError(f"target BER must lie in (0, 0.5), got {target_ber}")

    if criterion is ReachCriterion.WORST_BIN:
        def figure(length: float) -> float:
            return worst_bin_ber(params, length, mode, include_ici)
    else:
        def figure(length: float) -> float:
            return band_ber(params, length, mode, include_ici, convention).band_ber

    if figure(max_length) <= target_ber:
        return ReachResult(length=max_length, saturated=True)
    lo, hi = 0.0, max_length
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        if figure(mid) <= target_ber:
            lo = mid
        else:
            hi = mid
    return ReachResult(length=lo, saturated=False)
