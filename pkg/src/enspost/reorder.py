"""Template-driven reordering of postprocessed samples.

The pipeline splits the margins into cases, postprocesses each case with
its fitted low-dimensional model, draws N sample members per case, and
rearranges each case's sample so its multivariate rank pattern copies the
dependence template's. Member index n of the final ensemble concatenates
the rank-n-matched sample rows of every case, which is what transfers the
template's cross-case dependence onto the output.

Templates: the raw ensemble itself (ECC; forces N = M) or historical
observation vectors (Schaake shuffle).
"""

from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass

import numpy as np

from .bvemos import (
    BivariateEmosParams,
    DEFAULT_ACCEPTANCE_THRESHOLD,
    predict_bivariate,
    sample_truncated,
)
from .core import (
    BIVARIATE_TRUNCATED_NORMAL,
    CasePartition,
    Climatology,
    EnsembleForecast,
    Observation,
    UNIVARIATE_NORMAL,
)
from .errors import ConfigurationError, InsufficientHistoryError, ParameterError
from .ranking import RankingKind, SEN, compute_characteristics, rank_characteristics
from .uvemos import (
    NORMAL,
    TRUNCATED_NORMAL,
    UnivariateEmosParams,
    predict,
    sample_q,
    sample_r,
)

ECC_SOURCE = "ecc_raw_ensemble"
SCHAAKE_SOURCE = "schaake_historical_observations"

SCHEME_Q = "q"
SCHEME_R = "r"


@dataclass(frozen=True)
class DependenceTemplate:
    """N data points supplying the rank structure to impose."""

    points: np.ndarray  # (N, L)
    source: str
    margin_catalog: tuple
    dates: tuple[dt.date, ...] = ()

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        points.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "margin_catalog", tuple(self.margin_catalog))
        if self.source not in (ECC_SOURCE, SCHAAKE_SOURCE):
            raise ParameterError(f"unknown template source {self.source!r}")
        if points.ndim != 2 or points.shape[1] != len(self.margin_catalog):
            raise ParameterError("template points must be (N, L) matching the catalog")
        if not np.all(np.isfinite(points)):
            raise ParameterError("template points must be finite")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class CasePlan:
    """How to postprocess and reorder: partition, ranking, sampling, size.

    The ranking choice applies to every case. Quantile (Q) sampling is
    only defined for univariate cases; plans with any multivariate case
    must sample randomly (R).
    """

    partition: CasePartition
    ranking: RankingKind
    sampling: str
    n_members: int

    def __post_init__(self):
        if self.sampling not in (SCHEME_Q, SCHEME_R):
            raise ParameterError(f"sampling scheme must be 'q' or 'r', got {self.sampling!r}")
        if self.n_members < 1:
            raise ParameterError("n_members must be >= 1")
        if self.sampling == SCHEME_Q and any(
            len(margins) > 1 for margins, _ in self.partition.cases
        ):
            raise ConfigurationError(
                "quantile (Q) sampling has no multivariate counterpart; use scheme R"
            )


def reorder_univariate(sample, template_margin, rng: np.random.Generator) -> np.ndarray:
    """Impose a template margin's rank pattern on a one-dimensional sample.

    Output entry n is the order statistic of the sample at the template
    value's rank, ties in the template resolved at random.
    """
    x = np.asarray(sample, dtype=float)
    z = np.asarray(template_margin, dtype=float)
    if x.ndim != 1 or x.shape != z.shape:
        raise ParameterError("sample and template margin must be equal-length vectors")
    ranks = rank_characteristics(z, rng)
    return np.sort(x)[ranks - 1]


def _case_characteristics(points, ranking: RankingKind):
    pts = np.asarray(points, dtype=float)
    if pts.shape[1] == 1:
        # one-margin cases rank by value: the classical univariate rank
        return pts[:, 0]
    return compute_characteristics(pts, ranking)


def reorder_case(sample, template_case, ranking: RankingKind, rng: np.random.Generator) -> np.ndarray:
    """Reorder sample rows so their characteristic ranks match the template's.

    Both matrices are (N, L_c). For SEN ranking the caller must pass
    consistently standardized values. Template and sample ties are
    randomized independently. The output rows are exactly the sample rows,
    reindexed.
    """
    x = np.asarray(sample, dtype=float)
    z = np.asarray(template_case, dtype=float)
    if x.shape != z.shape or x.ndim != 2:
        raise ParameterError(f"sample {x.shape} and template {z.shape} must be equal (N, L_c)")
    tau = rank_characteristics(_case_characteristics(z, ranking), rng)
    tau_sample = rank_characteristics(_case_characteristics(x, ranking), rng)
    inverse = np.empty(len(x), dtype=np.int64)
    inverse[tau_sample - 1] = np.arange(len(x))
    return x[inverse[tau - 1]]


def build_template_ecc(raw: EnsembleForecast) -> DependenceTemplate:
    """The raw ensemble itself as dependence template (N = M)."""
    if not raw.exchangeable:
        warnings.warn(
            "ECC templates assume exchangeable ensemble members; the raw ensemble is flagged otherwise",
            stacklevel=2,
        )
    return DependenceTemplate(raw.members, ECC_SOURCE, raw.margin_catalog)


def build_template_schaake(
    observations, n: int, rng: np.random.Generator
) -> DependenceTemplate:
    """Stack n historical observation vectors, dates drawn uniformly
    without replacement."""
    obs: list[Observation] = list(observations)
    if len(obs) < n:
        raise InsufficientHistoryError(
            f"need {n} historical observations, only {len(obs)} available"
        )
    catalog = obs[0].margin_catalog
    for o in obs:
        if o.margin_catalog != catalog:
            raise ParameterError("historical observations must share one margin catalog")
    chosen = rng.choice(len(obs), size=n, replace=False)
    points = np.array([obs[i].values for i in chosen])
    dates = tuple(obs[i].valid_date for i in chosen)
    return DependenceTemplate(points, SCHAAKE_SOURCE, catalog, dates=dates)


def _column_positions(catalog):
    return {margin: j for j, margin in enumerate(catalog)}


def _check_inputs(raw, plan, template, fitted):
    plan.partition.validate_against(raw.margin_catalog)
    if template.margin_catalog != raw.margin_catalog:
        raise ConfigurationError("template and raw forecast must share the margin catalog")
    if template.n_points != plan.n_members:
        raise ConfigurationError(
            f"plan wants {plan.n_members} members but template has {template.n_points} points"
        )
    if template.source == ECC_SOURCE and plan.n_members != raw.n_members:
        raise ConfigurationError("an ECC template fixes the output size to the raw ensemble's")
    if len(fitted) != plan.partition.n_cases:
        raise ConfigurationError(
            f"need {plan.partition.n_cases} fitted parameter sets, got {len(fitted)}"
        )


def _draw_case_sample(kind, params, raw_case, scheme, n, crng, sampler_options):
    if kind == BIVARIATE_TRUNCATED_NORMAL:
        if not isinstance(params, BivariateEmosParams):
            raise ConfigurationError("bivariate case needs BivariateEmosParams")
        dist = predict_bivariate(params, raw_case)
        return sample_truncated(dist, n, crng, **sampler_options)
    if not isinstance(params, UnivariateEmosParams):
        raise ConfigurationError("univariate case needs UnivariateEmosParams")
    family = NORMAL if kind == UNIVARIATE_NORMAL else TRUNCATED_NORMAL
    if params.family != family:
        raise ConfigurationError(f"case kind {kind} does not match fitted family {params.family}")
    dist = predict(params, raw_case[:, 0])
    draw = sample_q(dist, n) if scheme == SCHEME_Q else sample_r(dist, n, crng)
    return draw.reshape(n, 1)


def _standardize_case(values, cols, clim: Climatology):
    return (values - clim.mean[cols]) / clim.std[cols]


def ldp_sample(
    raw: EnsembleForecast,
    plan: CasePlan,
    fitted,
    rng: np.random.Generator,
    *,
    acceptance_threshold: float = DEFAULT_ACCEPTANCE_THRESHOLD,
    burn_in: int = 100,
    thinning: int = 1,
) -> EnsembleForecast:
    """Postprocess every case and stack the unordered samples.

    This is the dependence-blind reference: per-case margins are correct
    but nothing ties member indices together across cases. Uses the same
    per-case random substreams as :func:`ldp_reorder`, so with an equal
    seed the drawn sample points coincide with the reordered ensemble's.
    """
    plan.partition.validate_against(raw.margin_catalog)
    if len(fitted) != plan.partition.n_cases:
        raise ConfigurationError(
            f"need {plan.partition.n_cases} fitted parameter sets, got {len(fitted)}"
        )
    positions = _column_positions(raw.margin_catalog)
    sampler_options = dict(
        acceptance_threshold=acceptance_threshold, burn_in=burn_in, thinning=thinning
    )
    out = np.empty((plan.n_members, raw.n_margins))
    case_rngs = rng.spawn(plan.partition.n_cases)
    for (margins, kind), params, crng in zip(plan.partition.cases, fitted, case_rngs):
        cols = [positions[m] for m in margins]
        sample = _draw_case_sample(
            kind, params, raw.members[:, cols], plan.sampling, plan.n_members, crng, sampler_options
        )
        out[:, cols] = sample
    return EnsembleForecast(raw.valid_date, out, raw.margin_catalog, exchangeable=True)


def ldp_reorder(
    raw: EnsembleForecast,
    plan: CasePlan,
    template: DependenceTemplate,
    fitted,
    rng: np.random.Generator,
    *,
    climatology: Climatology | None = None,
    acceptance_threshold: float = DEFAULT_ACCEPTANCE_THRESHOLD,
    burn_in: int = 100,
    thinning: int = 1,
) -> EnsembleForecast:
    """Postprocess per case, then impose the template's rank structure.

    ``fitted`` supplies one parameter set per case, in partition order.
    SEN ranking compares values across margins, so it requires a
    climatology; both template and sample are standardized with it before
    ranking and the output keeps original units. Cases consume independent
    random substreams spawned in case order, which makes the result
    independent of case execution order.
    """
    _check_inputs(raw, plan, template, fitted)
    if plan.ranking.tag == SEN and climatology is None:
        raise ConfigurationError("SEN ranking needs a climatology for standardization")
    positions = _column_positions(raw.margin_catalog)
    sampler_options = dict(
        acceptance_threshold=acceptance_threshold, burn_in=burn_in, thinning=thinning
    )
    out = np.empty((plan.n_members, raw.n_margins))
    case_rngs = rng.spawn(plan.partition.n_cases)
    for (margins, kind), params, crng in zip(plan.partition.cases, fitted, case_rngs):
        cols = [positions[m] for m in margins]
        template_case = template.points[:, cols]
        sample = _draw_case_sample(
            kind, params, raw.members[:, cols], plan.sampling, plan.n_members, crng, sampler_options
        )
        if plan.ranking.tag == SEN and len(cols) > 1:
            template_ranked = _standardize_case(template_case, cols, climatology)
            sample_ranked = _standardize_case(sample, cols, climatology)
        else:
            template_ranked = template_case
            sample_ranked = sample
        tau = rank_characteristics(_case_characteristics(template_ranked, plan.ranking), crng)
        tau_sample = rank_characteristics(_case_characteristics(sample_ranked, plan.ranking), crng)
        inverse = np.empty(plan.n_members, dtype=np.int64)
        inverse[tau_sample - 1] = np.arange(plan.n_members)
        out[:, cols] = sample[inverse[tau - 1]]
    return EnsembleForecast(raw.valid_date, out, raw.margin_catalog, exchangeable=True)
