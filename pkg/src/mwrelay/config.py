"""
Run configuration: a flat ``key=value`` file and/or command-line flags.

Powers are given in dB under the keys ``pp_db``, ``snr_db`` (user power)
and ``pr_db``; :func:`parse_config` converts them to linear scale once and
stores the result in :class:`~mwrelay.channel.SystemParams`. Everything
downstream is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import CellGeometry, ConfigError, SystemParams
from .experiments import db_to_linear

SUBCOMMANDS = ("closed-form", "monte-carlo", "sweep-m", "sweep-tau", "cdf",
               "compare-two-way", "scaling")
FORMATS = ("csv", "json", "both")


def _int(text: str) -> int:
    value = float(text)
    if value != int(value):
        raise ValueError(f"not an integer: {text}")
    return int(value)


def _float(text: str) -> float:
    return float(text)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _ints(text: str) -> tuple:
    return tuple(_int(v) for v in text.split(",") if v.strip())


def _choice(*allowed):
    def parse(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}")
        return text
    return parse


def _path(text: str):
    return text or None


# key -> (parser, default, help). ``None`` defaults are resolved per
# subcommand by ``_resolve_defaults``.
KEYS = {
    "M": (_int, 8, "relay antennas"),
    "K": (_int, 5, "users"),
    "T": (_int, 200, "coherence interval in symbols"),
    "tau": (_int, None, "pilot length (default K)"),
    "pp_db": (_float, 0.0, "pilot power in dB"),
    "snr_db": (_float, 0.0, "user data power in dB"),
    "pr_db": (_float, 10.0, "relay power in dB"),
    "fading": (_choice("fixed", "geometry"), "fixed", "fixed gains or one random drop"),
    "beta": (_floats, (1.0,), "fixed large-scale gains, one value or K values"),
    "D_d": (_float, 1000.0, "cell diameter in metres"),
    "d_0": (_float, 200.0, "reference distance in metres"),
    "nu": (_float, 4.0, "path-loss exponent"),
    "sigma_z_db": (_float, 8.0, "shadowing standard deviation in dB"),
    "form": (_choice("reference", "exact"), "reference", "closed-form variant"),
    "engines": (_choice("closed_form", "monte_carlo", "both"), None, "sweep engines"),
    "t": (_int, 1, "broadcast slot"),
    "m_grid": (_ints, None, "comma-separated antenna counts"),
    "snr_grid_db": (_floats, (-10.0, -5.0, 0.0, 5.0, 10.0), "comma-separated SNRs in dB"),
    "tau_range": (_choice("half", "full"), "half", "search tau over [K, T/2] or [K, T]"),
    "drops": (_int, 500, "user drops for the CDF"),
    "E_u": (_float, 10.0, "scaled user energy"),
    "E_r": (_float, 10.0, "scaled relay energy"),
    "trials": (_int, 10_000, "Monte-Carlo trials"),
    "seed": (_int, 0, "random seed"),
    "workers": (_int, 1, "worker threads"),
    "out": (_path, None, "output path (stdout if unset)"),
    "format": (_choice(*FORMATS), "csv", "csv, json or both"),
}

_DEFAULT_M_GRID = {
    "sweep-m": (8, 16, 32, 64, 128, 256, 500),
    "scaling": tuple(2 ** n for n in range(6, 13)),
}
_DB_KEYS = {"pp_db": "P_p", "snr_db": "P_u", "pr_db": "P_r"}
ECHO_PREFIX = "# config: "
# execution settings: they never change results, so they stay out of the
# echo and out of RunConfig equality
RUNTIME_KEYS = ("workers", "out", "format")


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration of one CLI run.

    ``params`` holds linear powers; ``options`` holds the parsed value of
    every result-affecting key (dB keys as given) and is what gets echoed
    into result files. ``runtime`` holds workers, output path and format.
    """

    subcommand: str
    params: SystemParams
    options: dict = field(default_factory=dict)
    runtime: dict = field(default_factory=dict, compare=False)

    def __getitem__(self, key):
        if key in RUNTIME_KEYS:
            return self.runtime[key]
        return self.options[key]

    @property
    def geometry(self) -> CellGeometry:
        o = self.options
        return CellGeometry(o["D_d"], o["d_0"], o["nu"], o["sigma_z_db"])

    @property
    def beta(self) -> np.ndarray:
        beta = np.asarray(self.options["beta"], dtype=float)
        return np.full(self.params.K, beta[0]) if beta.size == 1 else beta

    @property
    def fading(self):
        return self.geometry if self.options["fading"] == "geometry" else self.beta


def read_key_values(text: str, source: str = "<text>") -> dict:
    """Raw ``key -> string`` pairs from a flat key=value text.

    Blank lines and ``#`` comments are skipped, except that ``# config:``
    echo lines written by :func:`mwrelay.results.write_results` are read as
    ordinary entries.
    """
    out = {}
    echo = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith(ECHO_PREFIX.strip()):
            line = line[len(ECHO_PREFIX.strip()):].strip()
            echo = True
        elif not line or line.startswith("#"):
            continue
        elif echo:
            # the table of a results file starts here
            break
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _resolve_defaults(subcommand: str, values: dict) -> dict:
    if values["tau"] is None:
        values["tau"] = values["K"]
    if values["m_grid"] is None:
        values["m_grid"] = _DEFAULT_M_GRID.get(subcommand, _DEFAULT_M_GRID["sweep-m"])
    if values["engines"] is None:
        values["engines"] = "both" if subcommand == "sweep-m" else "closed_form"
    return values


def parse_config(subcommand: str | None = None, path=None,
                 overrides: dict | None = None) -> RunConfig:
    """Build a :class:`RunConfig` from an optional file plus overrides.

    ``overrides`` maps keys to strings (as given on the command line) and
    wins over the file. Raises :class:`ConfigError` naming the key for
    unknown keys, unparsable values, nonpositive powers and invalid system
    constants.
    """
    raw = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}", "config") from exc
        raw.update(read_key_values(text, str(path)))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    file_sub = raw.pop("subcommand", None)
    subcommand = subcommand or file_sub
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}", "subcommand")

    values = {key: spec[1] for key, spec in KEYS.items()}
    for key, text in raw.items():
        if key not in KEYS:
            raise ConfigError(f"unknown configuration key {key!r}", key)
        try:
            values[key] = KEYS[key][0](str(text))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})", key) from exc
    values = _resolve_defaults(subcommand, values)

    linear = {}
    for key, name in _DB_KEYS.items():
        p = float(db_to_linear(values[key]))
        if not (p > 0 and math.isfinite(p)):
            raise ConfigError(f"{key} must give a positive finite power, got {values[key]}",
                              key)
        linear[name] = p
    params = SystemParams(values["M"], values["K"], values["T"], values["tau"], **linear)
    if len(values["beta"]) not in (1, params.K):
        raise ConfigError(f"beta needs 1 or K={params.K} values", "beta")
    if any(b <= 0 for b in values["beta"]):
        raise ConfigError("beta values must be positive", "beta")
    for key in ("trials", "workers", "drops"):
        if values[key] < 1:
            raise ConfigError(f"{key} must be positive", key)
    if not 1 <= values["t"] <= params.K - 1:
        raise ConfigError(f"t must lie in [1, K-1], got {values['t']}", "t")
    if values["fading"] == "geometry":
        CellGeometry(values["D_d"], values["d_0"], values["nu"], values["sigma_z_db"])
    runtime = {key: values.pop(key) for key in RUNTIME_KEYS}
    return RunConfig(subcommand, params, values, runtime)


def format_option(value) -> str:
    """Text form of a parsed option that parses back to the same value."""
    if value is None:
        return ""
    if isinstance(value, tuple):
        return ",".join(format_option(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_echo(cfg: RunConfig) -> list:
    """``key=value`` lines that reproduce ``cfg`` through :func:`parse_config`."""
    lines = [f"subcommand={cfg.subcommand}"]
    lines += [f"{key}={format_option(cfg.options[key])}" for key in KEYS
              if key not in RUNTIME_KEYS]
    return lines
