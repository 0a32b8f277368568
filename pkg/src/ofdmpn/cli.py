"""Command-line front end: figure datasets, reach tables, and MC campaigns.

Configuration is merged from three layers, later layers winning:
a built-in preset (``--preset``), a JSON file (``--config``), then
individual flags.  JSON keys are snake_case and grouped as::

    {
      "system": {"kind": "co", "n_bins": 200, "delta_f": 1.0,
                 "dispersion": 16.0, "wavelength": 1550.0,
                 "linewidth_tx": 4.0, "linewidth_lo": 0.0,
                 "light_speed": 3.0e8, "modulation": "4psk"},
      "sweep":  {"start_km": 0, "stop_km": 500, "step_km": 10}
                or {"lengths_km": [0, 100, 225]},
      "modes":  {"variance_mode": "paper_linear", "convention": "as_printed",
                 "include_ici": false, "criterion": "worst_bin",
                 "target_ber": 1e-4},
      "mc":     {"trials": 1000, "samples_per_symbol": null,
                 "seed": 12345, "jobs": 1},
      "modulations": ["4psk", "16psk"],
      "bins": [1, 25, 50, 100],
      "output": {"path": "out.csv"}
    }

Values use engineering units at this boundary: ``delta_f`` in GHz,
``dispersion`` in ps/nm/km, ``wavelength`` in nm, linewidths in MHz and
lengths in km.  Everything is converted to SI on validation.

Every CSV starts with a ``# config: ...`` comment carrying the fully
resolved configuration (including the seed), then a header row; floats are
written in scientific notation with 13 significant digits so outputs are
byte-comparable across runs.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analytic, simkernel
from .analytic import ReachCriterion
from .params import (
    BerConvention,
    ModulationScheme,
    SystemKind,
    SystemParams,
    ValidationError,
    VarianceMode,
)

__all__ = ["ConfigError", "RunConfig", "parse_config", "main", "PRESETS"]


class ConfigError(ValueError):
    """Raised for malformed or incomplete configuration input."""


PRESETS: dict[str, dict] = {
    # Standard single-mode fiber link at 1 GS/s per bin, 200 bins, 4 MHz
    # effective linewidth; the LO linewidth is folded into linewidth_tx so
    # the same preset gives a 4 MHz budget for both detection kinds.
    "paper-sec3": {
        "system": {
            "kind": "co",
            "n_bins": 200,
            "delta_f": 1.0,
            "dispersion": 16.0,
            "wavelength": 1550.0,
            "linewidth_tx": 4.0,
            "linewidth_lo": 0.0,
            "light_speed": 3.0e8,
            "modulation": "4psk",
        },
        "sweep": {"start_km": 0.0, "stop_km": 500.0, "step_km": 10.0},
        "modes": {
            "variance_mode": "paper_linear",
            "convention": "as_printed",
            "include_ici": False,
            "criterion": "worst_bin",
            "target_ber": 1e-4,
        },
        "mc": {"trials": 1000, "samples_per_symbol": None, "seed": 12345, "jobs": 1},
        "modulations": ["4psk", "16psk"],
    },
}

_REQUIRED_SYSTEM_KEYS = (
    "kind",
    "n_bins",
    "delta_f",
    "dispersion",
    "wavelength",
    "linewidth_tx",
    "modulation",
)

_DEFAULT_BINS = {SystemKind.CO: [1, 25, 50, 100], SystemKind.DD: [1, 100, 200]}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description (SI internally)."""

    system: SystemParams
    lengths: np.ndarray | None  # meters, strictly increasing
    variance_mode: VarianceMode
    convention: BerConvention
    include_ici: bool
    criterion: ReachCriterion
    target_ber: float
    trials: int
    samples_per_symbol: int | None
    seed: int
    jobs: int
    modulations: tuple[ModulationScheme, ...]
    bins: tuple[int, ...] | None
    output: str | None
    resolved: dict  # engineering-unit echo for the CSV comment line


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


def _merged_layers(args: argparse.Namespace) -> dict:
    cfg: dict = {}
    preset = getattr(args, "preset", None)
    if preset:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; available: {', '.join(PRESETS)}")
        _deep_update(cfg, json.loads(json.dumps(PRESETS[preset])))
    path = getattr(args, "config", None)
    if path:
        try:
            loaded = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        _deep_update(cfg, loaded)
    _apply_flag_overrides(cfg, args)
    return cfg


_FLAG_TO_SYSTEM = {
    "kind": "kind",
    "n_bins": "n_bins",
    "delta_f": "delta_f",
    "dispersion": "dispersion",
    "wavelength": "wavelength",
    "linewidth_tx": "linewidth_tx",
    "linewidth_lo": "linewidth_lo",
    "light_speed": "light_speed",
    "modulation": "modulation",
}

_FLAG_TO_MODES = {
    "variance_mode": "variance_mode",
    "convention": "convention",
    "include_ici": "include_ici",
    "criterion": "criterion",
    "target_ber": "target_ber",
}

_FLAG_TO_MC = {
    "trials": "trials",
    "samples_per_symbol": "samples_per_symbol",
    "seed": "seed",
    "jobs": "jobs",
}


def _apply_flag_overrides(cfg: dict, args: argparse.Namespace) -> None:
    for flag, key in _FLAG_TO_SYSTEM.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg.setdefault("system", {})[key] = value
    for flag, key in _FLAG_TO_MODES.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg.setdefault("modes", {})[key] = value
    for flag, key in _FLAG_TO_MC.items():
        value = getattr(args, flag, None)
        if value is not None:
            cfg.setdefault("mc", {})[key] = value
    if getattr(args, "length_km", None) is not None:
        cfg["sweep"] = {"lengths_km": list(args.length_km)}
    elif getattr(args, "sweep", None) is not None:
        start, stop, step = args.sweep
        cfg["sweep"] = {"start_km": start, "stop_km": stop, "step_km": step}
    if getattr(args, "modulations", None) is not None:
        cfg["modulations"] = list(args.modulations)
    if getattr(args, "bins", None) is not None:
        cfg["bins"] = list(args.bins)
    if getattr(args, "output", None) is not None:
        cfg.setdefault("output", {})["path"] = args.output


def _resolve_sweep(cfg: dict) -> np.ndarray | None:
    sweep = cfg.get("sweep")
    if not sweep:
        return None
    if "lengths_km" in sweep:
        lengths_km = np.asarray(sweep["lengths_km"], dtype=float)
    else:
        for key in ("start_km", "stop_km", "step_km"):
            if key not in sweep:
                raise ConfigError(f"missing required config key: sweep.{key}")
        step = float(sweep["step_km"])
        if step <= 0:
            raise ConfigError("sweep.step_km must be positive")
        lengths_km = np.arange(
            float(sweep["start_km"]), float(sweep["stop_km"]) + 0.5 * step, step
        )
    if lengths_km.size == 0 or np.any(np.diff(lengths_km) <= 0) or np.any(lengths_km < 0):
        raise ConfigError("sweep must be a nonempty, strictly increasing list of lengths >= 0")
    return lengths_km * 1e3


def parse_config(args: argparse.Namespace) -> RunConfig:
    """Merge preset, JSON file, and flags into a validated RunConfig."""
    cfg = _merged_layers(args)
    system_cfg = cfg.get("system", {})
    for key in _REQUIRED_SYSTEM_KEYS:
        if key not in system_cfg:
            raise ConfigError(f"missing required config key: system.{key}")
    system = SystemParams.from_engineering(
        kind=system_cfg["kind"],
        n_bins=system_cfg["n_bins"],
        delta_f_ghz=system_cfg["delta_f"],
        dispersion_ps_nm_km=system_cfg["dispersion"],
        wavelength_nm=system_cfg["wavelength"],
        linewidth_tx_mhz=system_cfg["linewidth_tx"],
        linewidth_lo_mhz=system_cfg.get("linewidth_lo", 0.0),
        modulation=system_cfg["modulation"],
        light_speed=system_cfg.get("light_speed", 3.0e8),
    )
    modes = cfg.get("modes", {})
    mc = cfg.get("mc", {})
    lengths = _resolve_sweep(cfg)
    modulations = tuple(
        ModulationScheme.parse(m) if isinstance(m, str) else m
        for m in cfg.get("modulations", ["4psk", "16psk"])
    )
    bins = cfg.get("bins")
    sps = mc.get("samples_per_symbol")
    resolved = {
        "system": {
            "kind": system.kind.value,
            "n_bins": system.n_bins,
            "delta_f": system_cfg["delta_f"],
            "dispersion": system_cfg["dispersion"],
            "wavelength": system_cfg["wavelength"],
            "linewidth_tx": system_cfg["linewidth_tx"],
            "linewidth_lo": system_cfg.get("linewidth_lo", 0.0),
            "light_speed": system.light_speed,
            "modulation": system.modulation.name,
        },
        "sweep": {"lengths_km": [] if lengths is None else (lengths / 1e3).tolist()},
        "modes": {
            "variance_mode": modes.get("variance_mode", "paper_linear"),
            "convention": modes.get("convention", "as_printed"),
            "include_ici": bool(modes.get("include_ici", False)),
            "criterion": modes.get("criterion", "worst_bin"),
            "target_ber": float(modes.get("target_ber", 1e-4)),
        },
        "mc": {
            "trials": int(mc.get("trials", 1000)),
            "samples_per_symbol": sps,
            "seed": int(mc.get("seed", 0)),
            "jobs": int(mc.get("jobs", 1)),
        },
        "modulations": [m.name for m in modulations],
        "bins": bins,
    }
    return RunConfig(
        system=system,
        lengths=lengths,
        variance_mode=VarianceMode.parse(resolved["modes"]["variance_mode"]),
        convention=BerConvention.parse(resolved["modes"]["convention"]),
        include_ici=resolved["modes"]["include_ici"],
        criterion=ReachCriterion.parse(resolved["modes"]["criterion"]),
        target_ber=resolved["modes"]["target_ber"],
        trials=resolved["mc"]["trials"],
        samples_per_symbol=None if sps is None else int(sps),
        seed=resolved["mc"]["seed"],
        jobs=resolved["mc"]["jobs"],
        modulations=modulations,
        bins=None if bins is None else tuple(int(b) for b in bins),
        output=cfg.get("output", {}).get("path"),
        resolved=resolved,
    )


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12e}"
    return str(value)


def _emit(config: RunConfig, header: list[str], rows) -> None:
    comment = "# config: " + json.dumps(config.resolved, sort_keys=True, separators=(",", ":"))
    lines = [comment, ",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if config.output:
        Path(config.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _require_sweep(config: RunConfig) -> np.ndarray:
    if config.lengths is None:
        raise ConfigError("missing required config key: sweep")
    return config.lengths


def _report_bins(config: RunConfig) -> list[int]:
    if config.bins is not None:
        return list(config.bins)
    return _DEFAULT_BINS[config.system.kind]


def cmd_presets(config_unused, args_unused) -> None:
    for name, preset in PRESETS.items():
        print(name)
        print(json.dumps(preset, indent=2, sort_keys=True))


def cmd_tau(config: RunConfig, args) -> None:
    rows = []
    for length in _require_sweep(config):
        tau = analytic.dispersion_delay(config.system, float(length))
        rows.append((length / 1e3, tau * 1e12))
    _emit(config, ["L_km", "tau_ps"], rows)


def _variance_rows(config: RunConfig, bins: list[int] | None):
    system = config.system
    for length in _require_sweep(config):
        report = analytic.variance_report(system, float(length), config.variance_mode)
        keep = report.bins if bins is None else np.asarray(bins)
        index = {int(k): i for i, k in enumerate(report.bins)}
        for k in keep:
            i = index[int(k)]
            yield (
                system.kind.value,
                int(report.bins[i]),
                length / 1e3,
                report.cpe_var[i],
                report.ici_var[i],
                report.total_var[i],
            )


_VARIANCE_HEADER = ["system", "k", "L_km", "cpe_var_rad2", "ici_var_rad2", "total_var_rad2"]


def cmd_variance(config: RunConfig, args) -> None:
    _emit(config, _VARIANCE_HEADER, _variance_rows(config, config.bins and list(config.bins)))


def _ber_rows(config: RunConfig, bins: list[int] | None):
    system = config.system
    for length in _require_sweep(config):
        report = analytic.band_ber(
            system, float(length), config.variance_mode, config.include_ici, config.convention
        )
        keep = report.bins if bins is None else np.asarray(bins)
        index = {int(k): i for i, k in enumerate(report.bins)}
        for k in keep:
            i = index[int(k)]
            yield (
                system.kind.value,
                system.modulation.name,
                int(report.bins[i]),
                length / 1e3,
                report.ber[i],
            )


_BER_HEADER = ["system", "modulation", "k", "L_km", "ber"]


def cmd_ber(config: RunConfig, args) -> None:
    _emit(config, _BER_HEADER, _ber_rows(config, config.bins and list(config.bins)))


def cmd_figure(config: RunConfig, args) -> None:
    which = int(args.which)
    if which == 2:
        _emit(config, _VARIANCE_HEADER, _variance_rows(config, _report_bins(config)))
    elif which == 3:
        _emit(config, _BER_HEADER, _ber_rows(config, _report_bins(config)))
    else:
        system = config.system
        rows = []
        for length in _require_sweep(config):
            worst = analytic.worst_bin_ber(
                system, float(length), config.variance_mode, config.include_ici
            )
            for convention in (BerConvention.AS_PRINTED, BerConvention.SYMMETRIC_AVERAGE):
                report = analytic.band_ber(
                    system, float(length), config.variance_mode, config.include_ici, convention
                )
                rows.append(
                    (
                        system.kind.value,
                        system.modulation.name,
                        length / 1e3,
                        convention.value,
                        report.band_ber,
                        worst,
                    )
                )
        _emit(
            config,
            ["system", "modulation", "L_km", "convention", "band_ber", "worst_bin_ber"],
            rows,
        )


def cmd_reach(config: RunConfig, args) -> None:
    rows = []
    for kind in (SystemKind.CO, SystemKind.DD):
        for modulation in config.modulations:
            system = dataclasses.replace(config.system, kind=kind, modulation=modulation)
            if config.criterion is ReachCriterion.BAND_AVERAGE:
                conventions = [BerConvention.AS_PRINTED, BerConvention.SYMMETRIC_AVERAGE]
            else:
                conventions = [None]
            for convention in conventions:
                result = analytic.solve_reach(
                    system,
                    config.target_ber,
                    config.variance_mode,
                    config.include_ici,
                    convention or config.convention,
                    config.criterion,
                )
                rows.append(
                    (
                        kind.value,
                        modulation.name,
                        config.criterion.value,
                        convention.value if convention else "-",
                        config.variance_mode.value,
                        config.include_ici,
                        config.target_ber,
                        result.length_km,
                        result.saturated,
                    )
                )
    _emit(
        config,
        [
            "system",
            "modulation",
            "criterion",
            "convention",
            "variance_mode",
            "include_ici",
            "target_ber",
            "reach_km",
            "saturated",
        ],
        rows,
    )


def cmd_mc(config: RunConfig, args) -> None:
    system = config.system
    groups = _report_bins(config)
    rows = []
    for li, length in enumerate(_require_sweep(config)):
        length = float(length)
        metrics = simkernel.run_trials(
            system,
            length,
            trials=config.trials,
            samples_per_symbol=config.samples_per_symbol,
            seed=(config.seed, li),
            jobs=config.jobs,
        )
        index = {int(k): i for i, k in enumerate(metrics.bins)}
        bps = system.modulation.bits_per_symbol
        for group in groups:
            members = [group, -group] if system.kind is SystemKind.CO else [group]
            members = [index[m] for m in members]
            var = float(np.mean(metrics.phase_var[members]))
            se = float(np.mean(metrics.phase_var_stderr[members]))
            decisions = metrics.trials * len(members)
            sym_err = int(metrics.per_bin_symbol_errors[members].sum())
            bit_err = int(metrics.per_bin_bit_errors[members].sum())
            cpe_paper = analytic.cpe_variance(system, group, length, VarianceMode.PAPER_LINEAR)
            cpe_exact = analytic.cpe_variance(system, group, length, VarianceMode.EXACT_FILTERED)
            ici = analytic.ici_total_variance(system, group, length)
            extra = ici if config.include_ici else 0.0
            rows.append(
                (
                    system.kind.value,
                    system.modulation.name,
                    length / 1e3,
                    group,
                    metrics.trials,
                    decisions,
                    var,
                    se,
                    cpe_paper,
                    cpe_exact,
                    ici,
                    sym_err / decisions,
                    bit_err / (decisions * bps),
                    analytic.ber_bin(cpe_paper + extra, system.modulation),
                    analytic.ber_bin(cpe_exact + extra, system.modulation),
                    metrics.evm,
                )
            )
    _emit(
        config,
        [
            "system",
            "modulation",
            "L_km",
            "bin_group",
            "trials",
            "decisions",
            "measured_phase_var_rad2",
            "phase_var_stderr_rad2",
            "analytic_cpe_paper_rad2",
            "analytic_cpe_exact_rad2",
            "analytic_ici_rad2",
            "measured_ser",
            "measured_ber",
            "analytic_ber_paper",
            "analytic_ber_exact",
            "evm",
        ],
        rows,
    )


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        raise ConfigError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", help="built-in configuration preset name")
    parser.add_argument("--config", help="JSON configuration file")
    parser.add_argument("--output", help="CSV output path (default stdout)")
    sys_group = parser.add_argument_group("system overrides (engineering units)")
    sys_group.add_argument("--kind", choices=["co", "dd"])
    sys_group.add_argument("--n-bins", dest="n_bins", type=int)
    sys_group.add_argument("--delta-f", dest="delta_f", type=float, help="GHz")
    sys_group.add_argument("--dispersion", type=float, help="ps/nm/km")
    sys_group.add_argument("--wavelength", type=float, help="nm")
    sys_group.add_argument("--linewidth-tx", dest="linewidth_tx", type=float, help="MHz")
    sys_group.add_argument("--linewidth-lo", dest="linewidth_lo", type=float, help="MHz")
    sys_group.add_argument("--light-speed", dest="light_speed", type=float, help="m/s")
    sys_group.add_argument("--modulation", help="e.g. 4psk, 16psk, 16qam")
    sweep = parser.add_argument_group("length sweep (km)")
    sweep.add_argument("--length-km", dest="length_km", type=float, nargs="+")
    sweep.add_argument("--sweep", type=float, nargs=3, metavar=("START", "STOP", "STEP"))
    modes = parser.add_argument_group("evaluation modes")
    modes.add_argument("--variance-mode", dest="variance_mode",
                       choices=["paper_linear", "exact_filtered", "paper", "exact"])
    modes.add_argument("--convention", choices=["as_printed", "symmetric_average", "symmetric"])
    modes.add_argument("--include-ici", dest="include_ici",
                       action=argparse.BooleanOptionalAction, default=None)
    modes.add_argument("--criterion", choices=["worst_bin", "band_average", "band", "worst"])
    modes.add_argument("--target-ber", dest="target_ber", type=float)
    mc = parser.add_argument_group("Monte Carlo")
    mc.add_argument("--trials", type=int)
    mc.add_argument("--samples-per-symbol", dest="samples_per_symbol", type=int)
    mc.add_argument("--seed", type=int)
    mc.add_argument("--jobs", type=int)
    parser.add_argument("--modulations", nargs="+", help="modulations for the reach table")
    parser.add_argument("--bins", type=int, nargs="+", help="report bins (CO: positive |k|)")


_COMMANDS = {
    "presets": cmd_presets,
    "tau": cmd_tau,
    "variance": cmd_variance,
    "ber": cmd_ber,
    "figure": cmd_figure,
    "reach": cmd_reach,
    "mc": cmd_mc,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ofdmpn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name, parser_class=_Parser)
        if name == "figure":
            p.add_argument("which", choices=["2", "3", "4"])
        if name != "presets":
            _add_common(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        command = _COMMANDS[args.command]
        if args.command == "presets":
            command(None, args)
            return 0
        config = parse_config(args)
        command(config, args)
        return 0
    except (ConfigError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:  # estimator or numeric failure
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
