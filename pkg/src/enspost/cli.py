"""Command-line entry points.

Subcommands: ``synth`` (write a synthetic dataset as CSVs), ``fit`` (dump
fitted parameters for one date), ``postprocess`` (write the reference
ensembles for one date), ``verify`` (score an ensemble CSV against
observations), ``experiment`` (full comparison run).

Exit codes: 0 success, 1 usage error, 2 data/fit/configuration error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from pathlib import Path

import numpy as np

from . import dataio, harness
from .core import fit_climatology
from .errors import EnspostError
from .reorder import build_template_ecc, ldp_reorder, ldp_sample
from .scoring import (
    HISTOGRAM_KINDS,
    VerificationRecord,
    accumulate_histogram,
    energy_score,
    reliability_index,
    variogram_score_05,
)
from .core import standardize_values


class _Parser(argparse.ArgumentParser):
    """argparse variant that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="enspost", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, date=False):
        p.add_argument("--config", required=True, help="experiment config file (INI)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        if date:
            p.add_argument("--date", default=None, help="target date (ISO), default: first test date")

    common(sub.add_parser("synth", help="write synthetic forecast/observation CSVs"))
    common(sub.add_parser("fit", help="write fitted-parameter dumps for one date"), date=True)
    common(sub.add_parser("postprocess", help="write reference ensembles for one date"), date=True)

    verify = sub.add_parser("verify", help="score an ensemble CSV against observations")
    verify.add_argument("--ensemble-csv", required=True)
    verify.add_argument("--observations", required=True)
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--out", default=None, help="write the score report here (default: stdout)")

    experiment = sub.add_parser("experiment", help="run the full comparison")
    common(experiment)
    experiment.add_argument("--threads", type=int, default=None, help="worker parallelism cap")

    return parser


def _load(args, threads=None):
    config = harness.load_config(args.config, seed_override=args.seed, threads_override=threads)
    if args.out is not None:
        config = harness.with_output_dir(config, args.out)
    return config


def _cmd_synth(args) -> int:
    config = _load(args)
    dataset = harness.load_dataset(config)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_dataset_csv(dataset, out / "forecast.csv", out / "observations.csv")
    print(f"wrote {out / 'forecast.csv'} and {out / 'observations.csv'} "
          f"({len(dataset)} dates, {dataset.instances[0][0].n_members} members)")
    return 0


def _target_index(dataset, config, date_arg):
    if date_arg is None:
        return config.window_days
    target = dt.date.fromisoformat(date_arg)
    for i, d in enumerate(dataset.dates):
        if d == target:
            return i
    raise EnspostError(f"date {target} not in dataset")


def _cmd_fit(args) -> int:
    config = _load(args)
    dataset = harness.load_dataset(config)
    i = _target_index(dataset, config, args.date)
    window = dataset.instances[i - config.window_days : i]
    date = dataset.dates[i]
    catalog = dataset.margin_catalog
    opts = config.fit_options

    uv_part = harness.univariate_partition(catalog)
    uv_fits = harness.fit_partition(window, uv_part, catalog, opts)
    bv_part = harness.bivariate_partition(catalog)
    bv_fits = harness.fit_partition(window, bv_part, catalog, opts)

    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    uv_rows = []
    for (margins, _), params in zip(uv_part.cases, uv_fits):
        margin = margins[0]
        uv_rows.append((date, margin.station, margin.variable, "a", params.a))
        uv_rows.append((date, margin.station, margin.variable, "b", float(params.b[0])))
        uv_rows.append((date, margin.station, margin.variable, "c", params.c))
        uv_rows.append((date, margin.station, margin.variable, "d", params.d))
    dataio.write_univariate_params_csv(uv_rows, out / "univariate_params.csv")

    bv_rows = []
    for (margins, _), params in zip(bv_part.cases, bv_fits):
        station = margins[0].station
        for r in range(2):
            bv_rows.append((date, station, "A", r + 1, 1, float(params.a[r])))
            for c in range(2):
                bv_rows.append((date, station, "B", r + 1, c + 1, float(params.b[0][r, c])))
                bv_rows.append((date, station, "C", r + 1, c + 1, float(params.c[r, c])))
                bv_rows.append((date, station, "D", r + 1, c + 1, float(params.d[r, c])))
    dataio.write_bivariate_params_csv(bv_rows, out / "bivariate_params.csv")
    print(f"wrote parameter dumps for {date} to {out}")
    return 0


def _cmd_postprocess(args) -> int:
    config = _load(args)
    dataset = harness.load_dataset(config)
    i = _target_index(dataset, config, args.date)
    ctx = harness._build_context(config, dataset)
    raw_fc, _ = dataset.instances[i]
    window = dataset.instances[i - config.window_days : i]
    opts = config.fit_options
    uv_fits = harness.fit_partition(window, ctx.uv_plan.partition, dataset.margin_catalog, opts)
    bv_part = next(iter(ctx.bv_plans.values())).partition
    bv_fits = harness.fit_partition(window, bv_part, dataset.margin_catalog, opts)

    template = build_template_ecc(raw_fc)
    named = [(harness.ENSEMBLE_RAW, raw_fc)]
    named.append(
        (harness.ENSEMBLE_EMOS_ECC_R,
         ldp_reorder(raw_fc, ctx.uv_plan, template, uv_fits,
                     harness._rng_for(config.seed, i, 0, harness._ROLE_UV)))
    )
    bv_any = next(iter(ctx.bv_plans.values()))
    named.append(
        (harness.ENSEMBLE_UNORDERED,
         ldp_sample(raw_fc, bv_any, bv_fits, harness._rng_for(config.seed, i, 0, harness._ROLE_BV)))
    )
    for tag, plan in ctx.bv_plans.items():
        named.append(
            (harness.ecc_ensemble_name(tag),
             ldp_reorder(raw_fc, plan, template, bv_fits,
                         harness._rng_for(config.seed, i, 0, harness._ROLE_BV),
                         climatology=ctx.clim))
        )
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "postprocessed.csv"
    dataio.write_ensemble_csv(named, path)
    print(f"wrote {path} for {dataset.dates[i]}")
    return 0


def _cmd_verify(args) -> int:
    ensembles = dataio.read_ensemble_csv(args.ensemble_csv)
    first = next(iter(ensembles.values()))
    catalog = first[0].margin_catalog
    obs_records = _read_observations_as_records(args.observations, catalog)
    clim = obs_records["climatology"]
    obs_by_date = obs_records["by_date"]

    rows = []
    for name in sorted(ensembles):
        records = []
        for forecast in ensembles[name]:
            if forecast.valid_date not in obs_by_date:
                continue
            records.append(
                VerificationRecord(forecast.members, obs_by_date[forecast.valid_date], catalog)
            )
        if not records:
            raise EnspostError(f"no observation dates match ensemble {name!r}")
        std_records = [
            VerificationRecord(
                standardize_values(rec.ensemble, clim), standardize_values(rec.observation, clim)
            )
            for rec in records
        ]
        es = float(np.mean([energy_score(rec) for rec in std_records]))
        vs = float(np.mean([variogram_score_05(rec) for rec in std_records]))
        rows.append((name, harness.METRIC_ES, es))
        rows.append((name, harness.METRIC_VS, vs))
        for k_idx, kind in enumerate(HISTOGRAM_KINDS):
            rng = np.random.default_rng((args.seed, 0x5C07E, k_idx))
            hist = accumulate_histogram(records, kind, rng)
            rows.append((name, f"reliability_{kind}", reliability_index(hist)))
    text = dataio.render_scores(rows)
    if args.out is None:
        sys.stdout.write(text)
    else:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    return 0


def _read_observations_as_records(path, catalog):
    """Observations CSV -> per-date vectors aligned with the catalog."""
    from .dataio import _read_observations

    by_date_raw = _read_observations(path)
    by_date = {}
    for date, values in by_date_raw.items():
        if set(catalog) <= set(values):
            by_date[date] = np.array([values[m] for m in catalog])
    if not by_date:
        raise EnspostError(f"no complete observation vectors in {path}")
    matrix = np.array(list(by_date.values()))
    from .core import Climatology

    clim = Climatology(catalog, matrix.mean(axis=0), matrix.std(axis=0, ddof=1))
    return {"by_date": by_date, "climatology": clim}


def _cmd_experiment(args) -> int:
    config = _load(args, threads=args.threads)
    report = harness.run_experiment(config)
    print(f"scored {report.n_test_dates} dates ({report.n_skipped} skipped), "
          f"reports in {report.output_dir}")
    for name in sorted({key[0] for key in report.mean_scores}):
        es = report.mean_scores[(name, harness.METRIC_ES)]
        vs = report.mean_scores[(name, harness.METRIC_VS)]
        print(f"  {name:38s} ES {es:8.4f}  VS {vs:8.4f}")
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "fit": _cmd_fit,
    "postprocess": _cmd_postprocess,
    "verify": _cmd_verify,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except EnspostError as exc:
        print(f"enspost {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"enspost {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
