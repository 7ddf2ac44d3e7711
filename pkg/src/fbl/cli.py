"""``fbl`` command line: figure datasets, parameter sweeps and simulation reports.

Exit codes: 0 success, 2 config error, 3 numeric or truncation error,
1 for I/O failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from fbl import focksim, rates
from fbl.distmath import ChannelParams, g_closed, v_closed
from fbl.errors import ConfigError, FBLError
from fbl.rates import ConstraintParams, Method

EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 1

LN2 = math.log(2.0)

FIG2_EPS = 1e-6
FIG2_NS = 0.1
FIG3_EPS = 1e-3
FIG3_NS = 0.1783


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: str | Path, header: list[str], rows: list[list[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _write_text(path, buf.getvalue())


def _write_text(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _json_safe(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: str | Path, payload: dict) -> None:
    _write_text(path, json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n")


# -- unit handling -----------------------------------------------------------

def _scale(units: str, power: int = 1) -> float:
    if units == "bits":
        return 1.0
    if units == "nats":
        return LN2**power
    raise ConfigError(f"units: expected 'bits' or 'nats', got {units!r}")


# -- figure data -------------------------------------------------------------

def fig1_grid() -> np.ndarray:
    """200 log-spaced points on [1e-4, 1e4] that include N_S = 1 exactly."""
    return np.concatenate((np.logspace(-4.0, 0.0, 100), np.logspace(0.0, 4.0, 101)[1:]))


def fig2_grid() -> np.ndarray:
    return np.unique(np.round(np.logspace(2.0, 7.0, 51)).astype(np.int64))


def fig3_grid() -> np.ndarray:
    return np.unique(np.round(np.logspace(1.0, 6.0, 61)).astype(np.int64))


def cmd_fig1(output: str | Path, units: str = "bits") -> None:
    k = _scale(units, 2)
    rows = []
    for x in fig1_grid():
        v = v_closed(float(x))
        vh = rates.heterodyne_dispersion(float(x))
        rows.append([float(x), v * k, vh * k, v / vh])
    write_csv(output, ["n_s", "v", "v_het", "ratio"], rows)


def cmd_fig2(output: str | Path, units: str = "bits") -> None:
    k = _scale(units)
    ch = ChannelParams(1.0, FIG2_NS)
    cap = g_closed(FIG2_NS)
    het_cap = rates.heterodyne_capacity(FIG2_NS)
    rows = []
    for n in fig2_grid():
        n = int(n)
        rows.append([
            n,
            rates.holevo_second_order(ch, n, FIG2_EPS).rate * k,
            rates.heterodyne_second_order(ch, n, FIG2_EPS).rate * k,
            cap * k,
            het_cap * k,
        ])
    write_csv(output, ["n", "holevo_rate", "heterodyne_rate", "holevo_capacity", "het_capacity"], rows)


def cmd_fig3(output: str | Path, units: str = "bits") -> None:
    """BPSK comparison; the reliability-function curve is not produced."""
    k = _scale(units)
    c1 = rates.bpsk_dolinar_capacity(FIG3_NS)
    c_inf = rates.bpsk_holevo(FIG3_NS)
    p = rates.dolinar_crossover(FIG3_NS)
    rows = []
    for n in fig3_grid():
        n = int(n)
        rows.append([
            n,
            c1 * k,
            c_inf * k,
            rates.dt_bound_bsc(n, p, FIG3_EPS).rate * k,
            rates.bpsk_ensemble_second_order(FIG3_NS, n, FIG3_EPS).rate * k,
        ])
    write_csv(output, ["n", "c1", "c_infinity", "dt_bound_rate", "bpsk_normal_rate"], rows)


# -- configs -----------------------------------------------------------------

def _require(d: dict, key: str, kind: type | tuple, where: str) -> Any:
    if key not in d:
        raise ConfigError(f"{where}{key}: missing")
    val = d[key]
    if isinstance(val, bool) and kind is not bool:
        raise ConfigError(f"{where}{key}: expected {_kind_name(kind)}, got boolean")
    if not isinstance(val, kind):
        raise ConfigError(f"{where}{key}: expected {_kind_name(kind)}, got {type(val).__name__}")
    return val


def _kind_name(kind) -> str:
    if isinstance(kind, tuple):
        return " or ".join(k.__name__ for k in kind)
    return kind.__name__


NUMBER = (int, float)
SWEEP_VARIABLES = ("n", "N_S", "eps")
FIXED_KEYS = ("n", "eps", "mean_photon", "transmissivity", "delta1", "delta2", "ww14_constant")


@dataclass
class GridSpec:
    variable: str
    min: float
    max: float
    points: int
    scale: str = "linear"

    @classmethod
    def from_dict(cls, d: Any) -> "GridSpec":
        if not isinstance(d, dict):
            raise ConfigError("grid: expected an object")
        variable = _require(d, "variable", str, "grid.")
        if variable not in SWEEP_VARIABLES:
            raise ConfigError(f"grid.variable: expected one of {SWEEP_VARIABLES}, got {variable!r}")
        lo = float(_require(d, "min", NUMBER, "grid."))
        hi = float(_require(d, "max", NUMBER, "grid."))
        points = _require(d, "points", int, "grid.")
        scale = d.get("scale", "linear")
        if scale not in ("linear", "log"):
            raise ConfigError(f"grid.scale: expected 'linear' or 'log', got {scale!r}")
        if not lo < hi:
            raise ConfigError("grid.min: must be smaller than grid.max")
        if points < 2:
            raise ConfigError("grid.points: must be >= 2")
        if scale == "log" and lo <= 0.0:
            raise ConfigError("grid.min: must be > 0 for a log grid")
        if variable == "eps" and not (0.0 < lo and hi < 1.0):
            raise ConfigError("grid.min: eps grid must lie inside (0, 1)")
        if variable == "n" and lo < 1.0:
            raise ConfigError("grid.min: n grid must start at >= 1")
        return cls(variable, lo, hi, points, scale)

    def values(self) -> list:
        if self.scale == "log":
            vals = np.logspace(math.log10(self.min), math.log10(self.max), self.points)
        else:
            vals = np.linspace(self.min, self.max, self.points)
        if self.variable == "n":
            return [int(v) for v in np.unique(np.round(vals).astype(np.int64))]
        return [float(v) for v in vals]


@dataclass
class SweepConfig:
    method: Method
    grid: GridSpec
    fixed: dict = field(default_factory=dict)
    output: str = "sweep.csv"
    format: str = "csv"
    units: str = "bits"

    @classmethod
    def from_dict(cls, d: Any) -> "SweepConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        method = _require(d, "method", str, "")
        try:
            method = Method(method)
        except ValueError:
            raise ConfigError(
                f"method: expected one of {[m.value for m in Method]}, got {method!r}"
            ) from None
        grid = GridSpec.from_dict(_require(d, "grid", dict, ""))
        fixed = d.get("fixed", {})
        if not isinstance(fixed, dict):
            raise ConfigError("fixed: expected an object")
        for key, val in fixed.items():
            if key not in FIXED_KEYS:
                raise ConfigError(f"fixed.{key}: unknown parameter")
            if isinstance(val, bool) or not isinstance(val, NUMBER):
                raise ConfigError(f"fixed.{key}: expected a number")
        if "eps" in fixed and not 0.0 < fixed["eps"] < 1.0:
            raise ConfigError("fixed.eps: must lie in (0, 1)")
        fmt_ = d.get("format", "csv")
        if fmt_ not in ("csv", "json"):
            raise ConfigError(f"format: expected 'csv' or 'json', got {fmt_!r}")
        units = d.get("units", "bits")
        if units not in ("bits", "nats"):
            raise ConfigError(f"units: expected 'bits' or 'nats', got {units!r}")
        output = d.get("output", "sweep.csv")
        if not isinstance(output, str):
            raise ConfigError("output: expected a path string")
        cfg = cls(method, grid, dict(fixed), output, fmt_, units)
        cfg._check_required()
        return cfg

    def _check_required(self) -> None:
        need = {"n", "eps", "mean_photon"} - {self._axis_key()}
        if self.method is Method.CONSTRAINED_NORMAL:
            need |= {"delta1", "delta2", "ww14_constant"}
        for key in sorted(need):
            if key not in self.fixed:
                raise ConfigError(f"fixed.{key}: missing (required by method {self.method.value})")

    def _axis_key(self) -> str:
        return "mean_photon" if self.grid.variable == "N_S" else self.grid.variable

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "grid": asdict(self.grid),
            "fixed": dict(self.fixed),
            "output": self.output,
            "format": self.format,
            "units": self.units,
        }


@dataclass
class SimConfig:
    ensemble: dict
    M: int
    eps: float
    eta_slack: float
    d: int
    trials: int
    seed: int | None = None
    output: str = "report.json"
    defect_tolerance: float = focksim.DEFECT_TOL

    @classmethod
    def from_dict(cls, d: Any) -> "SimConfig":
        if not isinstance(d, dict):
            raise ConfigError("config: expected a JSON object")
        ens = _require(d, "ensemble", dict, "")
        kind = _require(ens, "kind", str, "ensemble.")
        if kind not in [k.value for k in focksim.EnsembleKind]:
            raise ConfigError(f"ensemble.kind: unknown ensemble {kind!r}")
        M = _require(d, "M", int, "")
        eps = float(_require(d, "eps", NUMBER, ""))
        eta = float(_require(d, "eta_slack", NUMBER, ""))
        dim = _require(d, "d", int, "")
        trials = _require(d, "trials", int, "")
        seed = d.get("seed")
        if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
            raise ConfigError("seed: expected a non-negative integer")
        if M < 1:
            raise ConfigError("M: must be >= 1")
        if not 0.0 < eta < eps < 1.0:
            raise ConfigError("eta_slack: need 0 < eta_slack < eps < 1")
        if dim < 1:
            raise ConfigError("d: must be >= 1")
        if trials < 1:
            raise ConfigError("trials: must be >= 1")
        output = d.get("output", "report.json")
        if not isinstance(output, str):
            raise ConfigError("output: expected a path string")
        tol = d.get("defect_tolerance", focksim.DEFECT_TOL)
        if isinstance(tol, bool) or not isinstance(tol, NUMBER) or not 0.0 <= tol < 1.0:
            raise ConfigError("defect_tolerance: expected a number in [0, 1)")
        tol = float(tol)
        cfg = cls(dict(ens), M, eps, eta, dim, trials, seed, output, tol)
        cfg.build_ensemble()
        return cfg

    def build_ensemble(self) -> focksim.EnsembleSpec:
        ens = self.ensemble
        kind = focksim.EnsembleKind(ens["kind"])
        try:
            if kind is focksim.EnsembleKind.FINITE:
                entries = _require(ens, "states", list, "ensemble.")
                states, probs = [], []
                for i, entry in enumerate(entries):
                    where = f"ensemble.states[{i}]."
                    if not isinstance(entry, dict):
                        raise ConfigError(f"{where[:-1]}: expected an object")
                    probs.append(float(_require(entry, "probability", NUMBER, where)))
                    if "alpha" in entry:
                        re, im = _pair(entry["alpha"], where + "alpha")
                        states.append(focksim.coherent_state(complex(re, im), self.d))
                    elif "amplitudes" in entry:
                        amps = [complex(*_pair(a, where + "amplitudes")) for a in entry["amplitudes"]]
                        states.append(focksim.FockVector.from_amplitudes(amps))
                    else:
                        raise ConfigError(f"{where}alpha: give 'alpha' or 'amplitudes'")
                return focksim.EnsembleSpec.finite(states, probs)
            mean = float(_require(ens, "mean_photon", NUMBER, "ensemble."))
            eta = float(ens.get("transmissivity", 1.0))
            return focksim.EnsembleSpec(kind, mean, eta)
        except FBLError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"ensemble: {exc}") from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["ensemble"] = dict(self.ensemble)
        return out


def _pair(val: Any, where: str) -> tuple[float, float]:
    if (
        not isinstance(val, list)
        or len(val) != 2
        or not all(isinstance(v, NUMBER) and not isinstance(v, bool) for v in val)
    ):
        raise ConfigError(f"{where}: expected [re, im]")
    return float(val[0]), float(val[1])


def load_json(path: str | Path) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


# -- sweep / simulate --------------------------------------------------------

SWEEP_HEADER = ["n", "eps", "mean_photon", "transmissivity", "log_m", "rate", "method", "feasible"]


def _rate_point(method: Method, params: dict) -> rates.RatePoint:
    n = int(params["n"])
    eps = float(params["eps"])
    ch = ChannelParams(float(params.get("transmissivity", 1.0)), float(params["mean_photon"]))
    if method is Method.HOLEVO_NORMAL:
        return rates.holevo_second_order(ch, n, eps)
    if method is Method.HETERODYNE_NORMAL:
        return rates.heterodyne_second_order(ch, n, eps)
    if method is Method.BPSK_HOLEVO_NORMAL:
        return rates.bpsk_ensemble_second_order(ch.received_photon, n, eps)
    if method is Method.BPSK_DOLINAR_CAPACITY:
        return rates.bpsk_dolinar_point(ch.received_photon, n, eps)
    if method is Method.DT_BOUND:
        return rates.dt_bound_bsc(n, rates.dolinar_crossover(ch.received_photon), eps)
    cp = ConstraintParams(
        float(params["delta1"]), float(params["delta2"]), float(params["ww14_constant"])
    )
    return rates.constrained_second_order(ch, n, eps, cp)


def cmd_sweep(cfg: SweepConfig, output: str | Path | None = None) -> Path:
    k = _scale(cfg.units)
    axis = cfg._axis_key()
    rows = []
    for val in cfg.grid.values():
        params = dict(cfg.fixed)
        params[axis] = val
        params.setdefault("transmissivity", 1.0)
        pt = _rate_point(cfg.method, params)
        rows.append([
            pt.n, pt.eps, float(params["mean_photon"]), float(params["transmissivity"]),
            pt.log_m * k, pt.rate * k, pt.method.value, pt.feasible,
        ])
    out = Path(output or cfg.output)
    if cfg.format == "csv":
        write_csv(out, SWEEP_HEADER, rows)
    else:
        write_json(out, {
            "config": cfg.to_dict(),
            "units": cfg.units,
            "rows": [dict(zip(SWEEP_HEADER, r)) for r in rows],
        })
    return out


def thread_count() -> int:
    raw = os.environ.get("FBL_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"FBL_THREADS: expected an integer, got {raw!r}") from None


def cmd_simulate(cfg: SimConfig, output: str | Path | None = None) -> Path:
    if cfg.seed is None:
        raise ConfigError("seed: missing (set it in the config or pass --seed)")
    ens = cfg.build_ensemble()
    report = focksim.theorem1_verify(
        ens, cfg.M, cfg.eps, cfg.eta_slack, cfg.d, cfg.trials, cfg.seed,
        workers=thread_count(), defect_tolerance=cfg.defect_tolerance,
    )
    out = Path(output or cfg.output)
    write_json(out, {"config": cfg.to_dict(), "report": report.to_dict()})
    return out


# -- entry point -------------------------------------------------------------

def _units(args) -> str:
    return "nats" if args.nats else "bits"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fbl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("fig1", "dispersions v and v_het over N_S"),
        ("fig2", "normal-approximation rates vs n at N_S=0.1, eps=1e-6"),
        ("fig3", "BPSK rates vs n at N_S=0.1783, eps=1e-3"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--out", required=True, help="CSV output path")
        _add_units(p)
    p = sub.add_parser("sweep", help="evaluate one rate method over a grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="override the config's output path")
    _add_units(p)
    p = sub.add_parser("simulate", help="Monte Carlo check of the one-shot SRM bound")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="override the config's output path")
    return parser


def _add_units(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--nats", action="store_true", help="report in nats")
    g.add_argument("--bits", action="store_true", help="report in bits (default)")


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    figures: dict[str, Callable] = {"fig1": cmd_fig1, "fig2": cmd_fig2, "fig3": cmd_fig3}
    try:
        if args.command in figures:
            figures[args.command](args.out, _units(args))
        elif args.command == "sweep":
            cfg = SweepConfig.from_dict(load_json(args.config))
            if args.nats or args.bits:
                cfg.units = _units(args)
            cmd_sweep(cfg, args.out)
        else:
            cfg = SimConfig.from_dict(load_json(args.config))
            if args.seed is not None:
                cfg.seed = args.seed
            cmd_simulate(cfg, args.out)
    except ConfigError as exc:
        print(f"fbl: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FBLError as exc:
        print(f"fbl: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"fbl: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


def main() -> None:
    sys.exit(run())
