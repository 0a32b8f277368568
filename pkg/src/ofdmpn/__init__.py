"""Phase-noise-limited performance of RF-pilot-tone optical OFDM links.

Closed-form common-phase-error and inter-carrier-interference variances,
per-bin and band-averaged BER floors, a reach solver, and a time-domain
Monte-Carlo simulator of the transmit-channel-receive chain.
"""

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
from .constellation import Constellation, bit_errors, make_constellation, nearest_symbol, power_stats
from .analytic import (
    BerReport,
    ReachCriterion,
    ReachResult,
    VarianceReport,
    band_ber,
    ber_bin,
    bin_delay,
    cpe_variance,
    dispersion_delay,
    ici_pair_variance,
    ici_total_variance,
    solve_reach,
    total_variance,
    variance_report,
    worst_bin_ber,
)
from .simkernel import (
    TrialMetrics,
    WienerPath,
    demod_bin,
    estimate_cpe_variance,
    pilot_cancel,
    run_trials,
    sample_phase,
    synthesize_received,
    wiener_path,
)

__version__ = "0.1.0"
