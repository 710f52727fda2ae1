"""
Command-line entry point.

Usage::

    mwrelay <subcommand> [--config FILE] [--key value ...]

Every configuration key (see :data:`mwrelay.config.KEYS`) is also a flag,
with underscores written as dashes (``--snr-db 5``, ``--m-grid 8,16,32``).
Flags override the file. Exit status is 0 on success, 2 on configuration
errors, 3 when a Monte-Carlo result is undersampled (the file is still
written) and 1 on I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import analytics, experiments, simulator
from .channel import ConfigError, estimation_moments
from .config import KEYS, SUBCOMMANDS, RunConfig, config_echo, parse_config
from .results import ResultTable, render_csv, render_json, write_results

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_UNDERSAMPLED = 0, 1, 2, 3

_HELP = {
    "closed-form": "per-user closed-form SINR and SE",
    "monte-carlo": "empirical SINR and SE against the closed form",
    "sweep-m": "sum SE versus the number of relay antennas",
    "sweep-tau": "sum SE versus training length and the optimal tau per SNR",
    "cdf": "sum SE over random user drops, multi-way and two-way",
    "compare-two-way": "per-user SE of multi-way and two-way relaying",
    "scaling": "finite-M SE under 1/M power scaling against its limit",
}


def flag_name(key: str) -> str:
    return "--" + key.replace("_", "-")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value configuration file")
    for key, (_, default, text) in KEYS.items():
        suffix = "" if default is None else f" (default {default})"
        common.add_argument(flag_name(key), dest=key, default=None, metavar="VALUE",
                            help=text + suffix)
    parser = argparse.ArgumentParser(
        prog="mwrelay", description="Multi-way massive MIMO relaying laboratory.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common], help=_HELP[name])
    return parser


def _beta(cfg: RunConfig) -> np.ndarray:
    return experiments.resolve_beta(cfg.fading, cfg.params.K, cfg["seed"])


def _closed_form(cfg: RunConfig):
    params = cfg.params
    profile = estimation_moments(_beta(cfg), params.tau, params.P_p)
    rep = analytics.se_per_user(params, profile, cfg["t"], cfg["form"])
    rows = [(k, float(rep.sinr[k]), float(rep.se[k]), term.var, term.iu, term.an)
            for k, term in enumerate(rep.terms)]
    derived = {"alpha": rep.alpha1, "se_sum": rep.se_sum}
    return ("k", "sinr", "se", "var", "iu", "an"), rows, derived, False


def _monte_carlo(cfg: RunConfig):
    params = cfg.params
    profile = estimation_moments(_beta(cfg), params.tau, params.P_p)
    t, form = cfg["t"], cfg["form"]
    closed = analytics.sinr_all(params, profile, t, form)
    res = simulator.run_trials(params, profile, cfg["trials"], cfg["seed"],
                               cfg["workers"], t, form=form)
    pl = analytics.prelog(params)
    hw = res.half_width
    rows = [(k, float(closed[k]), float(res.sinr_hat[k]), float(hw["sinr"][k]),
             float(pl * np.log2(1.0 + closed[k])), float(res.se_hat[k]), float(hw["se"][k]))
            for k in range(params.K)]
    derived = {"alpha": res.alpha, "alpha_hat": res.alpha_hat,
               "alpha_hat_halfwidth": float(hw["alpha_hat"]), "power": res.power,
               "power_halfwidth": float(hw["power"])}
    columns = ("k", "sinr_closed", "sinr_mc", "sinr_halfwidth", "se_closed", "se_mc",
               "se_halfwidth")
    return columns, rows, derived, res.undersampled


def _record(rec: experiments.ExperimentRecord):
    return rec.columns, rec.rows, rec.derived, rec.undersampled


def _sweep_m(cfg: RunConfig):
    spec = experiments.SweepSpec("M", cfg["m_grid"], cfg.params, _beta(cfg),
                                 cfg["engines"], cfg["trials"], cfg["seed"], cfg["form"],
                                 cfg["workers"])
    return _record(experiments.sweep(spec))


def _sweep_tau(cfg: RunConfig):
    return _record(experiments.optimal_tau(cfg.params, _beta(cfg), cfg["snr_grid_db"],
                                           cfg["tau_range"] == "full", cfg["form"],
                                           cfg["workers"]))


def _cdf(cfg: RunConfig):
    spec = experiments.CdfSpec(cfg["drops"], cfg.params, cfg.geometry,
                               experiments.PROTOCOLS, cfg["seed"], cfg["form"],
                               cfg["workers"])
    return _record(experiments.cdf_over_drops(spec).record)


def _compare_two_way(cfg: RunConfig):
    params = cfg.params
    profile = estimation_moments(_beta(cfg), params.tau, params.P_p)
    return _record(experiments.compare_two_way(params, profile, form=cfg["form"]))


def _scaling(cfg: RunConfig):
    return _record(experiments.power_scaling_study(
        cfg.params, _beta(cfg), cfg["E_u"], cfg["E_r"], cfg["m_grid"], cfg["form"],
        cfg["workers"]))


RUNNERS = {
    "closed-form": _closed_form,
    "monte-carlo": _monte_carlo,
    "sweep-m": _sweep_m,
    "sweep-tau": _sweep_tau,
    "cdf": _cdf,
    "compare-two-way": _compare_two_way,
    "scaling": _scaling,
}


def run(cfg: RunConfig) -> tuple[ResultTable, bool]:
    """Execute ``cfg`` and return its result table and undersampled flag."""
    columns, rows, derived, undersampled = RUNNERS[cfg.subcommand](cfg)
    return ResultTable(tuple(columns), list(rows), config_echo(cfg), dict(derived)), \
        undersampled


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in KEYS}
    try:
        cfg = parse_config(args.subcommand, args.config, overrides)
        table, undersampled = run(cfg)
    except ConfigError as exc:
        key = f" [{exc.key}]" if exc.key else ""
        print(f"mwrelay: configuration error{key}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out, fmt = cfg["out"], cfg["format"]
    if out is None:
        sys.stdout.write(render_json(table) if fmt == "json" else render_csv(table))
    else:
        try:
            write_results(table, out, fmt)
        except OSError as exc:
            print(f"mwrelay: {exc}", file=sys.stderr)
            return EXIT_IO
    if undersampled:
        print("mwrelay: Monte-Carlo result is undersampled (a 95% half-width exceeds "
              "10% of its statistic); increase --trials", file=sys.stderr)
        return EXIT_UNDERSAMPLED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
