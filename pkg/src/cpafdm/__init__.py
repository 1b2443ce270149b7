"""Chirp-permuted AFDM link-level simulation library.

Modules
-------
transforms   permutations, chirp sequences, the unitary CP-DAFT pair
channel      doubly-dispersive channels and their effective-domain images
waveform     constellations, frames, modulation, AWGN transmission
detection    equalizers, ML search, and the Monte-Carlo BER engine
metrics      PAPR statistics and cyclic ambiguity-function analysis
cpim         permutation-index modulation (codebooks, encode/detect, rates)
physec       permutation-keyed security experiments and keyspace accounting
cli          config-driven experiment runner behind the ``cpafdm`` command
"""

__version__ = "0.1.0"

from .channel import (
    ChannelFamily,
    ChannelSpec,
    EffectiveChannel,
    NonOrthogonalChannelError,
    PathSpec,
    PrefixPhaseRule,
    channel_matrix,
    effective_channel,
    extract_paths,
    location_index,
    optimal_c1,
)
from .cpim import (
    CpimFrame,
    CpimRecord,
    PermCodebook,
    build_codebook,
    cpim_detect,
    cpim_encode,
    max_index_bits,
    run_cpim,
    spectral_efficiency,
)
from .detection import (
    BerRecord,
    DetectionResult,
    demap_indices,
    hard_demap,
    ml_detect,
    mmse_equalize,
    run_ber,
    run_ber_multi,
)
from .metrics import (
    AFGrid,
    DegenerateMainlobeError,
    EnsembleSummary,
    PaprCcdf,
    SidelobeMetrics,
    ambiguity,
    cut_metrics,
    evm_percent,
    papr,
    papr_ccdf,
    papr_ccdf_analytic,
    papr_samples,
    permutation_ensemble,
)
from .physec import (
    EveReport,
    KeyspaceReport,
    PermKey,
    draw_wrong_keys,
    eavesdrop_experiment,
    keygen,
    keyspace_report,
    mismatched_scatter,
    phase_circular_variance,
    random_transposed_key,
    transposed_key,
)
from .rngs import spawn_rng, spawn_seed_sequence
from .transforms import (
    ChirpSequence,
    Permutation,
    TransformConfig,
    UnitaryTransform,
    chirp_sequence,
    cpdaft_forward,
    cpdaft_inverse,
    cpdaft_matrix,
    default_c2,
    identity_permutation,
    kernel_sample,
    permutation_from_rank,
    permutation_to_rank,
    random_permutation,
)
from .waveform import (
    ConstellationMap,
    Frame,
    WaveformId,
    demodulate,
    map_bits,
    modulate,
    noise_variance,
    qam_constellation,
    symbols_to_bits,
    transmit,
)
