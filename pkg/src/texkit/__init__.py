"""Differentiable multi-scale texture analysis for CT images.

Core pieces: a soft (Gaussian-binned) gray-level co-occurrence matrix
with an analytic backward pass, a multi-scale contrast extractor over a
grid of spatial distances and angles, a self-attention aggregated texture
loss usable in gradient-based training, a pixel-space optimizer that
demonstrates the loss end to end, and the statistical evaluation side
(hard-GLCM radiomic features, Welch tests, alignment reports, Fréchet
distance). A FastAPI service wraps everything; the CLI is a thin client.
"""

from .attention import (AttentionParams, LossOutput, attention_backward, attention_forward,
                        deviation, load_params, save_params, texture_loss,
                        texture_loss_backward)
from .errors import DomainError, FormatError, GeometryError, NumericError, TexkitError
from .glcm import (BinningConfig, Offset, SoftGlcm, soft_assignment, soft_glcm_backward,
                   soft_glcm_forward)
from .gradcheck import GradCheckReport, grad_check, make_instance
from .image import (GrayImage, PixelDomain, PreprocessConfig, crop_center_pad, load_image,
                    normalize_unit, preprocess, resample2d, rescale_to_hu, save_image)
from .optimize import OptimizeConfig, Trajectory, texture_match_optimize
from .radiomics import FEATURE_NAMES, FeatureTable, FeatureVector, feature_table, glcm_feature_vector
from .stats import AlignmentReport, WelchResult, alignment_workflow, frechet_distance, welch_test
from .texture import (OffsetGrid, TextureMatrix, contrast_descriptor, texture_matrix,
                      texture_matrix_backward)

__version__ = "0.1.0"
