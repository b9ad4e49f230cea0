"""Remote state estimation over a noisy additive channel.

A sensor watching an i.i.d. Laplace source pays a fixed cost per
transmission; transmitted values are affine-encoded under a power budget,
corrupted by additive gamma noise, and decoded with the help of a noiseless
sign side channel.  This package provides the threshold/affine policies,
their closed-form expected costs, characteristic-function matching checks,
and a reproducible Monte Carlo simulator that ties everything together.
"""

from .analytics import (
    CostBreakdown,
    cost_closed_form,
    cost_derivative,
    numeric_argmin,
    optimal_threshold,
    threshold_sweep,
)
from .distributions import (
    ExponentialDist,
    GammaDist,
    LaplaceDist,
    RngHandle,
    char_fn,
    empirical_char_fn,
    pdf,
    sample_exponential,
    sample_gamma,
    sample_laplace,
)
from .matching import (
    CfResidualReport,
    MatchSpec,
    check_matching,
    check_matching_empirical,
    matched_pair_spec,
)
from .simulator import (
    ConditionalStats,
    EpisodeTrace,
    MonteCarloEstimate,
    StageOutcome,
    StationarityReport,
    estimate_conditional_stats,
    estimate_cost,
    run_episode,
    stationarity_check,
)
from .strategies import (
    EPSILON,
    AffineCoder,
    NeverTransmitStrategy,
    NoiseBlindStrategy,
    ProtocolViolation,
    Strategy,
    SwitchedThresholdStrategy,
    SystemParams,
    ThresholdAffineStrategy,
    ThresholdPolicy,
    always_transmit,
    decode,
    encode,
    never_transmit,
    noise_blind_decoder,
    schedule,
    side_channel,
)

__version__ = "0.1.0"
