"""Experiment runner: fit, postprocess, score, and report.

For every test date the harness fits univariate EMOS per margin and
bivariate EMOS per station on a sliding training window, then builds and
scores six reference ensembles:

* ``raw``: the unprocessed ensemble;
* ``emos_ecc_r``: univariate EMOS margins, random sampling, raw-ensemble
  template reordering per margin;
* ``bivariate_emos_unordered``: per-station bivariate samples, stacked
  without reordering;
* ``bivariate_emos_ecc_<ranking>``: the same bivariate samples reordered
  per station against the raw-ensemble template, for each configured
  ranking (multivariate / average pre-rank, signed Euclidean norm).

Energy and variogram scores are computed on climatology-standardized
values; rank histograms of all three flavors are accumulated per
ensemble. Scores average over ``samples_per_date`` independent sample
draws per date, and a date that fails any fit is skipped for every
ensemble so all comparisons stay paired.

Randomness is keyed by (seed, date index, repetition, role), which makes
reports byte-identical for a fixed seed regardless of worker parallelism.
"""

from __future__ import annotations

import datetime as dt
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from pathlib import Path

import numpy as np

from . import dataio
from .core import (
    BIVARIATE_TRUNCATED_NORMAL,
    CasePartition,
    Climatology,
    Dataset,
    TEMPERATURE,
    UNIVARIATE_NORMAL,
    UNIVARIATE_TRUNCATED_NORMAL,
    WIND_SPEED,
    fit_climatology,
    standardize_values,
)
from .errors import (
    ConfigurationError,
    DegenerateFitError,
    DegeneratePredictiveError,
    ExperimentError,
    FitError,
    ParameterError,
)
from .ranking import AVERAGE, MULTIVARIATE, RankingKind, SEN
from .reorder import (
    CasePlan,
    SCHEME_R,
    build_template_ecc,
    ldp_reorder,
    ldp_sample,
)
from .scoring import (
    HISTOGRAM_KINDS,
    RankHistogram,
    VerificationRecord,
    energy_score,
    observation_rank,
    reliability_index,
    variogram_score_05,
)
from .synthetic import SyntheticSpec, correlation_from_kernels, synth_generate
from .uvemos import fit_univariate_emos
from .bvemos import fit_bivariate_emos

ENSEMBLE_RAW = "raw"
ENSEMBLE_EMOS_ECC_R = "emos_ecc_r"
ENSEMBLE_UNORDERED = "bivariate_emos_unordered"
ECC_PREFIX = "bivariate_emos_ecc_"

METRIC_ES = "energy_score"
METRIC_VS = "variogram_score_05"

# rng stream roles (part of the derivation key, never reused across purposes)
_ROLE_UV = 1
_ROLE_BV = 2
_ROLE_HIST = 3
_ROLE_RAW_HIST = 4


def ecc_ensemble_name(ranking_tag: str) -> str:
    return ECC_PREFIX + ranking_tag


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings forwarded to the EMOS fitters."""

    maxiter: int = 500
    tol: float = 1e-8
    restarts: int = 8
    stall_tol: float | None = None
    warm_start: bool = False
    min_training: int = 10


#: Settings tuned for large batch runs: regression warm starts and a
#: stagnation tolerance far below score resolution but cheap to reach.
EXPERIMENT_FIT_OPTIONS = FitOptions(
    maxiter=400, tol=1e-6, restarts=4, stall_tol=2e-3, warm_start=True
)


@dataclass(frozen=True)
class ExperimentConfig:
    output_dir: str = "out"
    seed: int = 0
    window_days: int = 50
    samples_per_date: int = 200
    rankings: tuple[str, ...] = (MULTIVARIATE, AVERAGE, SEN)
    threads: int = 1
    climatology_scope: str = "full"  # or "training": only pre-test observations
    synthetic: SyntheticSpec | None = field(default=None, compare=False)
    forecast_csv: str | None = None
    observation_csv: str | None = None
    fit_options: FitOptions = EXPERIMENT_FIT_OPTIONS

    def __post_init__(self):
        if self.window_days < 10:
            raise ParameterError("window_days must be >= 10")
        if self.samples_per_date < 1:
            raise ParameterError("samples_per_date must be >= 1")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")
        if self.climatology_scope not in ("full", "training"):
            raise ParameterError("climatology scope must be 'full' or 'training'")
        for tag in self.rankings:
            if tag not in (MULTIVARIATE, AVERAGE, SEN):
                raise ParameterError(f"unknown reordering ranking {tag!r}")
        if self.synthetic is None and (self.forecast_csv is None or self.observation_csv is None):
            raise ConfigurationError("need either a synthetic spec or forecast+observation files")


def univariate_partition(catalog) -> CasePartition:
    """One univariate case per margin, family chosen by variable."""
    cases = []
    for margin in catalog:
        kind = (
            UNIVARIATE_TRUNCATED_NORMAL
            if margin.variable == WIND_SPEED
            else UNIVARIATE_NORMAL
        )
        cases.append(((margin,), kind))
    return CasePartition(tuple(cases))


def bivariate_partition(catalog) -> CasePartition:
    """One (wind, temperature) case per station and lead time."""
    by_station = {}
    for margin in catalog:
        by_station.setdefault((margin.station, margin.lead_hours), {})[margin.variable] = margin
    cases = []
    for key in sorted(by_station):
        pair = by_station[key]
        if set(pair) != {WIND_SPEED, TEMPERATURE}:
            raise ConfigurationError(
                f"station/lead {key} lacks a wind+temperature pair for bivariate postprocessing"
            )
        cases.append(((pair[WIND_SPEED], pair[TEMPERATURE]), BIVARIATE_TRUNCATED_NORMAL))
    return CasePartition(tuple(cases))


def fit_partition(window, partition: CasePartition, catalog, options: FitOptions):
    """Fit every case of a partition on a training window, in case order."""
    positions = {m: j for j, m in enumerate(catalog)}
    fitted = []
    for margins, kind in partition.cases:
        cols = [positions[m] for m in margins]
        if kind == BIVARIATE_TRUNCATED_NORMAL:
            training = [(fc.members[:, cols], ob.values[cols]) for fc, ob in window]
            fitted.append(
                fit_bivariate_emos(
                    training,
                    exchangeable=True,
                    min_training=options.min_training,
                    maxiter=options.maxiter,
                    tol=options.tol,
                    restarts=options.restarts,
                    stall_tol=options.stall_tol,
                    warm_start=options.warm_start,
                )
            )
        else:
            family = "normal" if kind == UNIVARIATE_NORMAL else "truncated_normal"
            training = [(fc.members[:, cols[0]], float(ob.values[cols[0]])) for fc, ob in window]
            fitted.append(
                fit_univariate_emos(
                    training,
                    family,
                    exchangeable=True,
                    min_training=options.min_training,
                    maxiter=options.maxiter,
                    tol=options.tol,
                    restarts=options.restarts,
                    warm_start=options.warm_start,
                )
            )
    return fitted


@dataclass
class _Context:
    dataset: Dataset
    clim: Climatology
    config: ExperimentConfig
    uv_plan: CasePlan
    bv_plans: dict
    ensemble_names: tuple[str, ...]


def _rng_for(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng((seed,) + tuple(key))


def _build_context(config: ExperimentConfig, dataset: Dataset) -> _Context:
    catalog = dataset.margin_catalog
    n_out = dataset.instances[0][0].n_members  # ECC template forces N = M
    uv_plan = CasePlan(univariate_partition(catalog), RankingKind(MULTIVARIATE), SCHEME_R, n_out)
    bv_part = bivariate_partition(catalog)
    bv_plans = {}
    for tag in config.rankings:
        kind = RankingKind(SEN, 0, 1) if tag == SEN else RankingKind(tag)
        bv_plans[tag] = CasePlan(bv_part, kind, SCHEME_R, n_out)
    if config.climatology_scope == "training":
        head = dataset.instances[: config.window_days]
        clim = fit_climatology(Dataset(head, catalog))
    else:
        clim = fit_climatology(dataset)
    names = (ENSEMBLE_RAW, ENSEMBLE_EMOS_ECC_R, ENSEMBLE_UNORDERED) + tuple(
        ecc_ensemble_name(tag) for tag in config.rankings
    )
    return _Context(dataset, clim, config, uv_plan, bv_plans, names)


def _score_standardized(members, observation, clim):
    record = VerificationRecord(
        standardize_values(members, clim), standardize_values(observation, clim)
    )
    return energy_score(record), variogram_score_05(record)


@dataclass
class _DateResult:
    index: int
    skipped: bool
    score_sums: dict | None = None  # name -> (es_sum, vs_sum) over repetitions
    rank_counts: dict | None = None  # (name, kind) -> (N+1,) counts


def _evaluate_date(ctx: _Context, i: int) -> _DateResult:
    config = ctx.config
    raw_fc, obs = ctx.dataset.instances[i]
    window = ctx.dataset.instances[i - config.window_days : i]
    opts = config.fit_options
    try:
        uv_fits = fit_partition(window, ctx.uv_plan.partition, ctx.dataset.margin_catalog, opts)
        bv_part = next(iter(ctx.bv_plans.values())).partition
        bv_fits = fit_partition(window, bv_part, ctx.dataset.margin_catalog, opts)
    except (FitError, DegenerateFitError, DegeneratePredictiveError):
        return _DateResult(i, skipped=True)

    n_reps = config.samples_per_date
    n_out = ctx.uv_plan.n_members
    template = build_template_ecc(raw_fc)
    score_sums = {name: np.zeros(2) for name in ctx.ensemble_names}
    rank_counts = {
        (name, kind): np.zeros(n_out + 1, dtype=np.int64)
        for name in ctx.ensemble_names
        for kind in HISTOGRAM_KINDS
    }

    raw_scores = np.array(_score_standardized(raw_fc.members, obs.values, ctx.clim))
    score_sums[ENSEMBLE_RAW] += n_reps * raw_scores
    raw_record = VerificationRecord(raw_fc.members, obs.values)
    for k_idx, kind in enumerate(HISTOGRAM_KINDS):
        rank = observation_rank(raw_record, kind, _rng_for(config.seed, i, 0, _ROLE_RAW_HIST, k_idx))
        rank_counts[(ENSEMBLE_RAW, kind)][rank - 1] += 1

    for r in range(n_reps):
        built = {}
        built[ENSEMBLE_EMOS_ECC_R] = ldp_reorder(
            raw_fc, ctx.uv_plan, template, uv_fits, _rng_for(config.seed, i, r, _ROLE_UV)
        )
        bv_any = next(iter(ctx.bv_plans.values()))
        built[ENSEMBLE_UNORDERED] = ldp_sample(
            raw_fc, bv_any, bv_fits, _rng_for(config.seed, i, r, _ROLE_BV)
        )
        for tag, plan in ctx.bv_plans.items():
            # same (i, r, role) key as the unordered draw: the sampled points
            # coincide and only the reordering differs
            built[ecc_ensemble_name(tag)] = ldp_reorder(
                raw_fc, plan, template, bv_fits,
                _rng_for(config.seed, i, r, _ROLE_BV), climatology=ctx.clim,
            )
        for e_idx, (name, forecast) in enumerate(sorted(built.items())):
            score_sums[name] += _score_standardized(forecast.members, obs.values, ctx.clim)
            record = VerificationRecord(forecast.members, obs.values)
            for k_idx, kind in enumerate(HISTOGRAM_KINDS):
                rank = observation_rank(
                    record, kind, _rng_for(config.seed, i, r, _ROLE_HIST, e_idx, k_idx)
                )
                rank_counts[(name, kind)][rank - 1] += 1
    return _DateResult(i, skipped=False, score_sums=score_sums, rank_counts=rank_counts)


_WORKER_CTX: _Context | None = None


def _init_worker(ctx):
    global _WORKER_CTX
    _WORKER_CTX = ctx


def _evaluate_date_in_worker(i: int) -> _DateResult:
    return _evaluate_date(_WORKER_CTX, i)


@dataclass(frozen=True)
class ExperimentReport:
    output_dir: str
    mean_scores: dict  # (ensemble, metric) -> float
    reliability: dict  # (ensemble, kind) -> float
    histograms: dict  # (ensemble, kind) -> RankHistogram
    n_test_dates: int
    n_skipped: int
    files: tuple[str, ...]


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.synthetic is not None:
        return synth_generate(config.synthetic, _rng_for(config.seed, 0xDA7A))
    return dataio.ingest_dataset(config.forecast_csv, config.observation_csv)


def run_experiment(config: ExperimentConfig, dataset: Dataset | None = None) -> ExperimentReport:
    """Run the full comparison and write report CSVs to the output directory."""
    if dataset is None:
        dataset = load_dataset(config)
    if len(dataset) <= config.window_days:
        raise ExperimentError(
            f"dataset has {len(dataset)} instances; need more than window_days={config.window_days}"
        )
    ctx = _build_context(config, dataset)
    indices = range(config.window_days, len(dataset))

    if config.threads > 1:
        with ProcessPoolExecutor(
            max_workers=config.threads,
            mp_context=get_context("fork"),
            initializer=_init_worker,
            initargs=(ctx,),
        ) as pool:
            results = list(pool.map(_evaluate_date_in_worker, indices, chunksize=8))
    else:
        results = [_evaluate_date(ctx, i) for i in indices]

    scored = [res for res in results if not res.skipped]
    n_skipped = len(results) - len(scored)
    if not scored:
        raise ExperimentError("every test date was skipped; nothing to score")

    n_out = ctx.uv_plan.n_members
    total_scores = {name: np.zeros(2) for name in ctx.ensemble_names}
    total_counts = {
        (name, kind): np.zeros(n_out + 1, dtype=np.int64)
        for name in ctx.ensemble_names
        for kind in HISTOGRAM_KINDS
    }
    for res in scored:
        for name, sums in res.score_sums.items():
            total_scores[name] += sums
        for key, counts in res.rank_counts.items():
            total_counts[key] += counts

    denom = len(scored) * config.samples_per_date
    mean_scores = {}
    for name in ctx.ensemble_names:
        mean_scores[(name, METRIC_ES)] = total_scores[name][0] / denom
        mean_scores[(name, METRIC_VS)] = total_scores[name][1] / denom
    histograms = {
        key: RankHistogram(key[1], counts) for key, counts in total_counts.items()
    }
    reliability = {key: reliability_index(hist) for key, hist in histograms.items()}

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    scores_path = out / "scores.csv"
    dataio.write_scores_csv(
        [(name, metric, mean_scores[(name, metric)])
         for name in ctx.ensemble_names for metric in (METRIC_ES, METRIC_VS)],
        scores_path,
    )
    files.append(str(scores_path))

    reliability_path = out / "reliability.csv"
    dataio.write_scores_csv(
        [(name, f"reliability_{kind}", reliability[(name, kind)])
         for name in ctx.ensemble_names for kind in HISTOGRAM_KINDS],
        reliability_path,
    )
    files.append(str(reliability_path))

    for name in ctx.ensemble_names:
        hist_path = out / f"hist_{name}.csv"
        with open(hist_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(dataio.HISTOGRAM_HEADER) + "\n")
            for kind in HISTOGRAM_KINDS:
                hist = histograms[(name, kind)]
                for rank, count in enumerate(hist.counts, start=1):
                    fh.write(f"{kind},{rank},{int(count)}\n")
        files.append(str(hist_path))

    summary_path = out / "summary.csv"
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key,value\n")
        fh.write(f"seed,{config.seed}\n")
        fh.write(f"window_days,{config.window_days}\n")
        fh.write(f"samples_per_date,{config.samples_per_date}\n")
        fh.write(f"n_test_dates,{len(scored)}\n")
        fh.write(f"n_skipped_dates,{n_skipped}\n")
        fh.write(f"n_output_members,{n_out}\n")
    files.append(str(summary_path))

    return ExperimentReport(
        output_dir=str(out),
        mean_scores=mean_scores,
        reliability=reliability,
        histograms=histograms,
        n_test_dates=len(scored),
        n_skipped=n_skipped,
        files=tuple(files),
    )


# ---------------------------------------------------------------------------
# configuration files (INI-style: flat key-value pairs under section headers)

_SYNTH_DEFAULTS = dict(
    stations="3",
    days="1100",
    members="50",
    dispersion="0.55",
    bias_wind="0.6",
    bias_temperature="1.2",
    seasonal_amplitude="6.0",
    station_correlation="0.75",
    variable_correlation="0.35",
)


def synthetic_spec_from_options(options: dict) -> SyntheticSpec:
    merged = dict(_SYNTH_DEFAULTS)
    merged.update(options)
    n_stations = int(merged["stations"])
    correlation = correlation_from_kernels(
        n_stations,
        float(merged["station_correlation"]),
        float(merged["variable_correlation"]),
    )
    bias = np.tile(
        [float(merged["bias_wind"]), float(merged["bias_temperature"])], n_stations
    )
    return SyntheticSpec(
        n_stations=n_stations,
        n_days=int(merged["days"]),
        n_members=int(merged["members"]),
        correlation=correlation,
        bias=bias,
        dispersion=float(merged["dispersion"]),
        seasonal_amplitude=float(merged["seasonal_amplitude"]),
    )


def load_config(path, seed_override: int | None = None, threads_override: int | None = None) -> ExperimentConfig:
    """Parse an INI experiment config; see README for the full key list."""
    import configparser

    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigurationError(f"config file not found: {path}")

    source = parser.get("dataset", "source", fallback="synthetic")
    synthetic = None
    forecast_csv = observation_csv = None
    if source == "synthetic":
        options = dict(parser["synthetic"]) if parser.has_section("synthetic") else {}
        synthetic = synthetic_spec_from_options(options)
    elif source == "files":
        try:
            forecast_csv = parser.get("dataset", "forecast_csv")
            observation_csv = parser.get("dataset", "observation_csv")
        except configparser.NoOptionError as exc:
            raise ConfigurationError(f"files source needs forecast_csv and observation_csv: {exc}")
    else:
        raise ConfigurationError(f"unknown dataset source {source!r}")

    exp = parser["experiment"] if parser.has_section("experiment") else {}
    rankings = tuple(
        tag.strip()
        for tag in str(exp.get("rankings", "multivariate, average, sen")).split(",")
        if tag.strip()
    )
    fit = parser["fit"] if parser.has_section("fit") else {}
    defaults = EXPERIMENT_FIT_OPTIONS
    stall_raw = fit.get("stall_tol", "")
    fit_options = FitOptions(
        maxiter=int(fit.get("maxiter", defaults.maxiter)),
        tol=float(fit.get("tol", defaults.tol)),
        restarts=int(fit.get("restarts", defaults.restarts)),
        stall_tol=float(stall_raw) if stall_raw else defaults.stall_tol,
        warm_start=str(fit.get("warm_start", defaults.warm_start)).lower() in ("1", "true", "yes"),
        min_training=int(fit.get("min_training", defaults.min_training)),
    )

    seed = int(exp.get("seed", 0)) if seed_override is None else seed_override
    threads = int(exp.get("threads", 1)) if threads_override is None else threads_override
    return ExperimentConfig(
        output_dir=str(exp.get("output_dir", "out")),
        seed=seed,
        window_days=int(exp.get("window_days", 50)),
        samples_per_date=int(exp.get("samples_per_date", 200)),
        rankings=rankings,
        threads=threads,
        climatology_scope=str(exp.get("climatology", "full")),
        synthetic=synthetic,
        forecast_csv=forecast_csv,
        observation_csv=observation_csv,
        fit_options=fit_options,
    )


def with_output_dir(config: ExperimentConfig, output_dir: str) -> ExperimentConfig:
    return replace(config, output_dir=output_dir)
