"""Multivariate ensemble postprocessing.

Parametric low-dimensional postprocessing (univariate and bivariate EMOS)
combined with non-parametric, template-driven reordering, plus the proper
scores and rank histograms to verify the results.
"""

from .core import (
    BIVARIATE_TRUNCATED_NORMAL,
    CasePartition,
    Climatology,
    Dataset,
    EnsembleForecast,
    MarginIndex,
    NONNEGATIVE_VARIABLES,
    Observation,
    TEMPERATURE,
    UNIVARIATE_NORMAL,
    UNIVARIATE_TRUNCATED_NORMAL,
    WIND_SPEED,
    destandardize,
    fit_climatology,
    standardize,
    standardize_values,
    training_window,
)
from .dataio import ingest_dataset, write_dataset_csv, write_ensemble_csv
from .ranking import (
    AVERAGE,
    BAND_DEPTH,
    MULTIVARIATE,
    RankingKind,
    RankResult,
    SEN,
    prerank_average,
    prerank_banddepth,
    prerank_multivariate,
    prerank_sen,
    rank_characteristics,
    rank_points,
)
from .scoring import (
    RankHistogram,
    VerificationRecord,
    accumulate_histogram,
    crps_ensemble,
    crps_normal,
    crps_truncnormal,
    energy_score,
    logscore_bivariate_truncnormal,
    observation_rank,
    reliability_index,
    variogram_score_05,
)
from .uvemos import (
    UnivariateEmosParams,
    UnivariatePredictive,
    fit_univariate_emos,
    predict,
    sample_q,
    sample_r,
)
from .bvemos import (
    BivariateEmosParams,
    BivariatePredictive,
    ensemble_cov,
    fit_bivariate_emos,
    predict_bivariate,
    sample_gibbs,
    sample_rejection,
    sample_truncated,
)
from .reorder import (
    CasePlan,
    DependenceTemplate,
    build_template_ecc,
    build_template_schaake,
    ldp_reorder,
    ldp_sample,
    reorder_case,
    reorder_univariate,
)
from .synthetic import SyntheticSpec, correlation_from_kernels, synth_generate
from .harness import (
    ExperimentConfig,
    ExperimentReport,
    FitOptions,
    bivariate_partition,
    load_config,
    run_experiment,
    univariate_partition,
)

__version__ = "0.1.0"
