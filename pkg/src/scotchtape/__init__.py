"""scotchtape: spectral clustering of annotated graphs via factor-graph encoding."""

__version__ = "0.1.0"

from .graph import (
    AnnotationSet,
    Graph,
    IncidenceMatrix,
    Partition,
    ScotchTapedGraph,
    build_incidence,
    empty_annotations,
    laplacian,
    projection_operator,
    tape,
)
from .sbm import (
    BlockSpec,
    SymmetricSpec,
    derive_seed,
    make_annotations,
    sample_sbm,
    symmetric_to_block,
)
from .spectral import (
    Spectrum,
    accuracy,
    band_edge_estimate,
    bipartition,
    element_histogram,
    leading_spectrum,
)
from .reduced import (
    ReducedModel,
    build_reduced,
    classify_taping,
    eigenvalue_shift,
    reduced_spectrum,
)
from .perturbation import (
    SeriesResult,
    brillouin_wigner_series,
    greens_apply,
    lippmann_schwinger_series,
)
from .cavity import (
    AnnotationProfileDist,
    CavityState,
    ema_solve,
    initial_state,
    predicted_accuracy,
    small_fluct_solve,
    solve_lambda,
    sweep,
    update_fields,
)
from .nmf import NmfResult, nmf_cluster
from .experiments import ExperimentConfig, ResultRecord, emit_plots, run_experiment

__all__ = [
    "AnnotationProfileDist",
    "AnnotationSet",
    "BlockSpec",
    "CavityState",
    "ExperimentConfig",
    "Graph",
    "IncidenceMatrix",
    "NmfResult",
    "Partition",
    "ReducedModel",
    "ResultRecord",
    "ScotchTapedGraph",
    "SeriesResult",
    "Spectrum",
    "SymmetricSpec",
    "accuracy",
    "band_edge_estimate",
    "bipartition",
    "brillouin_wigner_series",
    "build_incidence",
    "build_reduced",
    "classify_taping",
    "derive_seed",
    "eigenvalue_shift",
    "element_histogram",
    "ema_solve",
    "emit_plots",
    "empty_annotations",
    "greens_apply",
    "initial_state",
    "laplacian",
    "leading_spectrum",
    "lippmann_schwinger_series",
    "make_annotations",
    "nmf_cluster",
    "predicted_accuracy",
    "projection_operator",
    "reduced_spectrum",
    "run_experiment",
    "sample_sbm",
    "small_fluct_solve",
    "solve_lambda",
    "sweep",
    "symmetric_to_block",
    "tape",
    "update_fields",
]
