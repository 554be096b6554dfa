"""Inline digital holography: simulation, classical reconstruction and evaluation."""

from .core import (
    ComplexField,
    ConfigError,
    FieldStats,
    Hologram,
    OpticalConfig,
    SpectralGrid,
    derive_seed,
    field_stats,
    make_config,
    make_rng,
    substream,
)
from .metrics import (
    LossWeights,
    Metrics,
    bs_ratio,
    evaluate_fields,
    evaluate_method,
    freq_ssim,
    psnr,
    ssim,
    supervised_loss,
    total_loss,
)
from .propagation import (
    back_propagate,
    forward_intensity,
    physics_loss,
    physics_loss_gradient,
    propagate,
    propagate_adjoint,
    transfer_function,
)
from .reconstruction import (
    SolverReport,
    TwinDecomposition,
    dirty_reconstruct,
    gerchberg_saxton,
    gradient_refine,
    parse_method,
    twin_decompose,
    z_sweep,
)
from .simulation import (
    NOISE_TAGS,
    NORMALIZATION,
    EllipseSpec,
    NoiseConfig,
    ObjectParams,
    ObjectSpec,
    SampleRecord,
    apply_dark,
    apply_read,
    apply_shot,
    apply_speckle,
    object_support_mask,
    sample_object,
    simulate_sample,
)

__version__ = "0.1.0"
