"""Volumetric registration and change detection for serial CT exams.

The similarity measure is a 3D approximate average common submatrix
(A-ACSM): the average volume of the largest sub-cubes two volumes share,
checking equality only on a regular sampling lattice inside each cube.
"""

from lesiontrack.errors import (
    CatalogError,
    FormatError,
    LesiontrackError,
    ParameterError,
    PreconditionError,
    WorkflowError,
)
from lesiontrack.volume import (
    Image2D,
    Lesion,
    PhantomSpec,
    QuantizationSpec,
    Volume3D,
    generate_phantom,
    quantize,
)
from lesiontrack.ctv import load_volume, save_volume, import_raw
from lesiontrack.acsm import (
    SimilarityParams,
    SimilarityValue,
    acsm_2d,
    acsm_2d_oracle,
    acsm_3d,
    acsm_3d_oracle,
    largest_match_2d,
    largest_match_3d,
    patch_match_2d,
    patch_match_3d,
)
from lesiontrack.transform import LinearMap, RigidParams, build_map, resample
from lesiontrack.registration import (
    RegistrationResult,
    SearchSpec,
    evaluate_candidate,
    register,
)
from lesiontrack.fusion import ChangeMap, DifferenceVolume, change_report, difference, threshold
from lesiontrack.pipeline import (
    Catalog,
    ExamRecord,
    PipelineConfig,
    RunReport,
    filter_prior_exams,
    step1_compare,
    step2_compare,
)

__version__ = "0.1.0"
