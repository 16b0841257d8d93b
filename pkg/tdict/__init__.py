"""
Tensor dictionary learning with the t-product.

Learns dictionaries of tensor columns (K-TSVD) and uses them for
completion and denoising of image stacks and videos.
"""

from tdict.errors import (
    ConfigError,
    DecompositionError,
    DimensionMismatch,
    EmptyMask,
    InsufficientData,
    InvalidTensor,
    NumericalError,
    PatchTooLarge,
    RankOutOfRange,
    ShapeMismatch,
    SingularSystem,
    SymmetryViolation,
    TdictError,
    TensorFormatError,
    UnsupportedFormat,
    ValidationError,
)
from tdict.tcore import (
    FTensor3,
    bcirc,
    fft_mode3,
    fold,
    fro_norm,
    fro_norm_complex,
    identity_tensor,
    ifft_mode3,
    l112_norm,
    tprod,
    tprod_circulant,
    ttranspose,
    tube_norms,
    unfold,
)
from tdict.tsvd import TSvdFactors, Rank1Triplet, truncate, tsvd, tubal_rank, tubal_rank1_approx
from tdict.sparse import (
    SparseCodeProblem,
    SparseCodeResult,
    masked_sparse_code,
    objective,
    sparse_code,
    tube_shrink,
    x_update,
)
from tdict.ktsvd import Dictionary, TrainReport, atom_update, init_dictionary, train
from tdict.patches import (
    PatchSet,
    add_fixed_location_noise,
    apply_dead_pixels,
    extract_patches,
    psnr,
    reconstruct,
    reconstruction_error,
)
from tdict.restore import CodingSettings, RestoreReport, complete_volume, denoise_volume
from tdict.synth import PlantedModel, planted_model, planted_volume
from tdict.tensorfile import read_metadata, read_tensor, write_metadata, write_tensor

__all__ = [
    # Errors
    "TdictError",
    "ValidationError",
    "NumericalError",
    "InvalidTensor",
    "DimensionMismatch",
    "RankOutOfRange",
    "InsufficientData",
    "PatchTooLarge",
    "ShapeMismatch",
    "EmptyMask",
    "TensorFormatError",
    "UnsupportedFormat",
    "ConfigError",
    "SymmetryViolation",
    "DecompositionError",
    "SingularSystem",
    # t-product algebra
    "FTensor3",
    "fft_mode3",
    "ifft_mode3",
    "tprod",
    "tprod_circulant",
    "ttranspose",
    "identity_tensor",
    "tube_norms",
    "l112_norm",
    "fro_norm",
    "fro_norm_complex",
    "bcirc",
    "unfold",
    "fold",
    # t-SVD
    "TSvdFactors",
    "Rank1Triplet",
    "tsvd",
    "truncate",
    "tubal_rank",
    "tubal_rank1_approx",
    # Sparse coding
    "SparseCodeProblem",
    "SparseCodeResult",
    "tube_shrink",
    "sparse_code",
    "masked_sparse_code",
    "x_update",
    "objective",
    # Dictionary learning
    "Dictionary",
    "TrainReport",
    "init_dictionary",
    "atom_update",
    "train",
    # Patches and metrics
    "PatchSet",
    "extract_patches",
    "reconstruct",
    "add_fixed_location_noise",
    "apply_dead_pixels",
    "reconstruction_error",
    "psnr",
    # Completion and denoising
    "CodingSettings",
    "RestoreReport",
    "complete_volume",
    "denoise_volume",
    # Planted models
    "PlantedModel",
    "planted_model",
    "planted_volume",
    # Files
    "read_tensor",
    "write_tensor",
    "read_metadata",
    "write_metadata",
]
