"""Link and OFDM system description shared by every other module.

All stored quantities are SI (seconds, meters, Hz); constructors accept the
engineering units common in fiber-optics practice (ps/nm/km, nm, MHz, km)
and convert on the way in.  Values are immutable after validation and safe
to share between threads or processes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ValidationError",
    "SystemKind",
    "ModulationScheme",
    "VarianceMode",
    "BerConvention",
    "SystemParams",
    "effective_linewidth",
    "bin_indices",
    "dispersion_to_si",
    "dispersion_from_si",
]

# 1 ps/nm/km expressed in s/m^2
_PS_PER_NM_KM = 1e-12 / (1e-9 * 1e3)

DEFAULT_LIGHT_SPEED = 3.0e8  # m/s, rounded value used for the headline numbers


class ValidationError(ValueError):
    """Raised when a parameter record violates a documented invariant."""


class SystemKind(enum.Enum):
    """Receiver architecture: coherent or direct detection."""

    CO = "co"
    DD = "dd"

    @classmethod
    def parse(cls, text: str) -> "SystemKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            raise ValidationError(f"unknown system kind {text!r}; expected 'co' or 'dd'") from None


class VarianceMode(enum.Enum):
    """How the symbol-period filtering of the phase difference is modeled.

    PAPER_LINEAR applies the flat 2/3 reduction to the unfiltered variance,
    which is linear in the delay.  EXACT_FILTERED evaluates the exact
    variance of the time-averaged Wiener difference; the two coincide only
    when the delay equals the symbol period.
    """

    PAPER_LINEAR = "paper_linear"
    EXACT_FILTERED = "exact_filtered"

    @classmethod
    def parse(cls, text: str) -> "VarianceMode":
        key = text.strip().lower()
        aliases = {"paper": cls.PAPER_LINEAR, "exact": cls.EXACT_FILTERED}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown variance mode {text!r}") from None


class BerConvention(enum.Enum):
    """Band-averaged BER prefactor convention.

    AS_PRINTED divides the half-band sum by the full bin count for coherent
    systems; SYMMETRIC_AVERAGE doubles it so the result is the true mean
    over all data bins.  The two agree for direct detection.
    """

    AS_PRINTED = "as_printed"
    SYMMETRIC_AVERAGE = "symmetric_average"

    @classmethod
    def parse(cls, text: str) -> "BerConvention":
        key = text.strip().lower()
        aliases = {"symmetric": cls.SYMMETRIC_AVERAGE, "printed": cls.AS_PRINTED}
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise ValidationError(f"unknown BER convention {text!r}") from None


@dataclass(frozen=True)
class ModulationScheme:
    """Constellation family and order.

    ``family`` is ``"psk"`` or ``"qam"``.  PSK orders are powers of two
    >= 4; QAM orders are square grids whose side is a power of two
    (4, 16, 64, ...).
    """

    family: str
    order: int

    def __post_init__(self):
        if self.family not in ("psk", "qam"):
            raise ValidationError(f"unsupported modulation family {self.family!r}")
        if self.order < 4 or self.order & (self.order - 1) != 0:
            raise ValidationError(
                f"modulation order must be a power of two >= 4, got {self.order}"
            )
        if self.family == "qam":
            side = math.isqrt(self.order)
            if side * side != self.order or side & (side - 1) != 0:
                raise ValidationError(
                    f"QAM order must be a square grid with power-of-two side, got {self.order}"
                )

    @classmethod
    def parse(cls, text: str) -> "ModulationScheme":
        key = text.strip().lower()
        for family in ("psk", "qam"):
            if key.endswith(family):
                try:
                    order = int(key[: -len(family)])
                except ValueError:
                    break
                return cls(family, order)
        raise ValidationError(f"cannot parse modulation {text!r}; expected e.g. '4psk', '16qam'")

    @property
    def name(self) -> str:
        return f"{self.order}{self.family}"

    @property
    def bits_per_symbol(self) -> int:
        return self.order.bit_length() - 1

    @property
    def angle_sectors(self) -> int:
        """Angular decision count entering the phase-error BER formula.

        Equals the order for PSK and half the order for QAM (an M-point QAM
        constellation behaves like M/2 phase sectors in this approximation).
        """
        return self.order if self.family == "psk" else self.order // 2


@dataclass(frozen=True)
class SystemParams:
    """Validated description of one pilot-tone OFDM link.

    Stored in SI: ``delta_f`` and linewidths in Hz, ``dispersion`` in
    s/m^2, ``wavelength`` in meters.  The symbol time is always the exact
    reciprocal of the channel spacing and is exposed as a property rather
    than stored.
    """

    kind: SystemKind
    n_bins: int
    delta_f: float
    dispersion: float
    wavelength: float
    linewidth_tx: float
    linewidth_lo: float
    modulation: ModulationScheme
    light_speed: float = DEFAULT_LIGHT_SPEED

    def __post_init__(self):
        if self.delta_f <= 0:
            raise ValidationError("delta_f must be positive")
        if self.n_bins < 2 or self.n_bins % 2 != 0:
            raise ValidationError(f"n_bins must be an even integer >= 2, got {self.n_bins}")
        if self.linewidth_tx < 0 or self.linewidth_lo < 0:
            raise ValidationError("linewidths must be nonnegative")
        if self.dispersion < 0 or self.wavelength < 0:
            raise ValidationError("dispersion and wavelength must be nonnegative")
        if self.light_speed <= 0:
            raise ValidationError("light_speed must be positive")
        if not isinstance(self.modulation, ModulationScheme):
            raise ValidationError("modulation must be a ModulationScheme")

    @classmethod
    def from_engineering(
        cls,
        kind: str | SystemKind = "co",
        n_bins: int = 200,
        delta_f_ghz: float = 1.0,
        dispersion_ps_nm_km: float = 16.0,
        wavelength_nm: float = 1550.0,
        linewidth_tx_mhz: float = 4.0,
        linewidth_lo_mhz: float = 0.0,
        modulation: str | ModulationScheme = "4psk",
        light_speed: float = DEFAULT_LIGHT_SPEED,
    ) -> "SystemParams":
        """Build a validated record from engineering units."""
        if isinstance(kind, str):
            kind = SystemKind.parse(kind)
        if isinstance(modulation, str):
            modulation = ModulationScheme.parse(modulation)
        return cls(
            kind=kind,
            n_bins=int(n_bins),
            delta_f=float(delta_f_ghz) * 1e9,
            dispersion=dispersion_to_si(float(dispersion_ps_nm_km)),
            wavelength=float(wavelength_nm) * 1e-9,
            linewidth_tx=float(linewidth_tx_mhz) * 1e6,
            linewidth_lo=float(linewidth_lo_mhz) * 1e6,
            modulation=modulation,
            light_speed=float(light_speed),
        )

    @property
    def symbol_time(self) -> float:
        """Symbol period T = 1 / delta_f, seconds."""
        return 1.0 / self.delta_f


def dispersion_to_si(d_ps_nm_km: float) -> float:
    """Convert a fiber dispersion coefficient from ps/nm/km to s/m^2."""
    return d_ps_nm_km * _PS_PER_NM_KM


def dispersion_from_si(d_si: float) -> float:
    """Convert a fiber dispersion coefficient from s/m^2 to ps/nm/km."""
    return d_si / _PS_PER_NM_KM


def effective_linewidth(params: SystemParams) -> float:
    """Linewidth governing the residual phase noise after pilot mixing.

    Coherent detection beats the signal against a local oscillator, so Tx
    and LO linewidths add; direct detection involves only the Tx laser.
    """
    if params.kind is SystemKind.CO:
        return params.linewidth_tx + params.linewidth_lo
    return params.linewidth_tx


def bin_indices(params: SystemParams) -> np.ndarray:
    """Ordered data-bin indices for the system.

    Coherent systems use signed indices with the pilot occupying bin 0
    (excluded from data); direct-detection systems use 1..N with the pilot
    sitting N bins below the band.
    """
    n = params.n_bins
    if params.kind is SystemKind.CO:
        half = n // 2
        return np.concatenate([np.arange(-half, 0), np.arange(1, half + 1)])
    return np.arange(1, n + 1)
