"""Command-line interface.

    coupledcool <subcommand> [--config FILE] [--<param> VALUE ...] [--output PATH]
                [--format csv|json] [--workers N] [subcommand options]

Subcommands: steady, spectrum, response, cool, sweep, power, optimize.
Parameters come from the config file (``key = value`` with unit-suffixed
keys such as ``mass_kg``) and are overridden by flags named after the
fields (``--mass``, ``--delta-tilde1``, ...).  Exit codes: 0 success,
1 physics/numerics error (JSON record on stderr), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cooling, response, steadystate, sweep
from .errors import CoolingError, InvalidParam, UnstableSystem
from .model import CONFIG_KEYS, SystemParams, load_config, params_from_mapping, validate
from .output import csv_text, json_text, jsonable, write_atomic

SUBCOMMANDS = ("steady", "spectrum", "response", "cool", "sweep", "power", "optimize")
DEFAULT_FORMAT = {
    "steady": "json", "spectrum": "csv", "response": "csv", "cool": "json",
    "sweep": "csv", "power": "csv", "optimize": "json",
}
# argparse only treats "-12" and "-1.5" as numbers; accept exponents too
_NUMBER = re.compile(r"^-(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


class UsageError(Exception):
    """Bad command line or config; exit status 2."""


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self._negative_number_matcher = _NUMBER

    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    subcommand: str
    params: SystemParams
    output: str | None
    format: str
    workers: int
    options: dict = field(default_factory=dict)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _grid(values, what: str):
    lo, hi, n = values
    n_int = int(n)
    if n_int != n or n_int < 2:
        raise UsageError(f"{what}: point count must be an integer >= 2, got {n}")
    return np.linspace(lo, hi, n_int)


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="plain-text key = value parameter file")
    params = common.add_argument_group("parameters (override the config file)")
    for name, key in CONFIG_KEYS.items():
        params.add_argument(_flag(name), dest=f"param_{name}", type=float, metavar=key.upper())
    common.add_argument("--output", "-o", help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("--workers", type=int, default=1, help="worker processes for sweeps")

    parser = _Parser(prog="coupledcool", description="Optical cooling in coupled cavities.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    sub.add_parser("steady", parents=[common], help="equilibrium fields, position and couplings")

    p = sub.add_parser("spectrum", parents=[common], help="cavity photon numbers versus detuning")
    p.add_argument("--delta-grid", nargs=3, type=float, metavar=("LO", "HI", "N"),
                   help="detuning grid in rad/s (default: -3 to +1 omega_t, 801 points)")

    p = sub.add_parser("response", parents=[common], help="chi_o, chi and S_xx versus frequency")
    p.add_argument("--omega-grid", nargs=3, type=float, metavar=("LO", "HI", "N"),
                   help="frequency grid in rad/s (default: 0.5 to 1.5 omega_m, 2001 points)")
    p.add_argument("--approx", action="store_true",
                   help="append single- and double-Lorentzian S_xx columns")

    sub.add_parser("cool", parents=[common], help="cooling rates by every method at one point")

    p = sub.add_parser("sweep", parents=[common], help="maximum cooling rate over a parameter plane")
    p.add_argument("--plane", choices=sweep.PLANES, default="mu_d")
    p.add_argument("--axis1", nargs=3, type=float, metavar=("LO", "HI", "N"))
    p.add_argument("--axis2", nargs=3, type=float, metavar=("LO", "HI", "N"))
    p.add_argument("--methods", default="sl,dl,exact")
    p.add_argument("--detuning-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--n-seed", type=int, default=sweep.DEFAULT_SEEDS)

    p = sub.add_parser("power", parents=[common], help="maximum cooling rate versus laser power")
    p.add_argument("--powers", type=_float_list, help="comma-separated powers in W")
    p.add_argument("--mu-values", type=_float_list, help="comma-separated mu values in rad/s")
    p.add_argument("--method", choices=sweep.METHODS, default="exact")
    p.add_argument("--detuning-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--n-seed", type=int, default=sweep.DEFAULT_SEEDS)

    p = sub.add_parser("optimize", parents=[common], help="best detuning for each method")
    p.add_argument("--methods", default="sl,dl,exact")
    p.add_argument("--detuning-range", nargs=2, type=float, metavar=("LO", "HI"))
    p.add_argument("--n-seed", type=int, default=sweep.DEFAULT_SEEDS)
    return parser


def _resolve_params(ns) -> SystemParams:
    values: dict[str, float] = {}
    if ns.config:
        try:
            values.update(load_config(ns.config))
        except KeyError as exc:
            raise UsageError(f"unknown config key {exc.args[0]!r} in {ns.config}") from None
        except (OSError, ValueError) as exc:
            raise UsageError(str(exc)) from None
    for name, key in CONFIG_KEYS.items():
        value = getattr(ns, f"param_{name}")
        if value is not None:
            values[key] = value
    # a flag for one position mode replaces the other mode from the file
    if ns.param_cos2k1x0 is not None:
        values.pop("x_trap_m", None)
    if ns.param_x_trap is not None:
        values.pop("cos2k1x0", None)
    try:
        params = params_from_mapping(values)
    except KeyError as exc:
        raise UsageError(f"missing required parameter(s): {exc.args[0]}") from None
    try:
        return validate(params)
    except InvalidParam as exc:
        key = CONFIG_KEYS.get(exc.name, exc.name)
        raise UsageError(f"invalid {key}: {exc.reason}") from None


def parse(argv=None) -> RunConfig:
    """Parse arguments and config into a RunConfig; raises UsageError."""
    ns = build_parser().parse_args(argv)
    if ns.workers < 1:
        raise UsageError(f"--workers must be >= 1, got {ns.workers}")
    params = _resolve_params(ns)
    options = {
        k: v for k, v in vars(ns).items()
        if not k.startswith("param_") and k not in ("config", "output", "format", "workers", "subcommand")
    }
    if "methods" in options:
        methods = tuple(m.strip().lower() for m in options["methods"].split(",") if m.strip())
        unknown = [m for m in methods if m not in sweep.METHODS]
        if unknown or not methods:
            raise UsageError(f"--methods: unknown method(s) {unknown}; choose from {sweep.METHODS}")
        options["methods"] = methods
    if "n_seed" in options and options["n_seed"] < 32:
        raise UsageError(f"--n-seed must be >= 32, got {options['n_seed']}")
    return RunConfig(
        subcommand=ns.subcommand,
        params=params,
        output=ns.output,
        format=ns.format or DEFAULT_FORMAT[ns.subcommand],
        workers=ns.workers,
        options=options,
    )


# --- subcommands -----------------------------------------------------------------

def _flatten(prefix: str, value, out: dict) -> None:
    if isinstance(value, dict):
        for key, inner in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), inner, out)
    elif isinstance(value, complex):
        out[f"{prefix}.re"], out[f"{prefix}.im"] = value.real, value.imag
    elif isinstance(value, (list, tuple)):
        for i, inner in enumerate(value):
            _flatten(f"{prefix}.{i}", inner, out)
    else:
        out[prefix] = value


def _record(cfg: RunConfig, payload: dict, settings: dict | None = None) -> str:
    if cfg.format == "json":
        return json_text(cfg.params, payload, settings)
    flat: dict = {}
    _flatten("", payload, flat)
    row = [v.item() if isinstance(v, np.generic) else v for v in flat.values()]
    return csv_text(cfg.params, list(flat), [row], settings)


def _table(cfg: RunConfig, columns, rows, settings: dict | None = None) -> str:
    if cfg.format == "csv":
        return csv_text(cfg.params, columns, rows, settings)
    payload = {"columns": list(columns), "rows": [list(r) for r in rows]}
    return json_text(cfg.params, payload, settings)


def _equilibrium_record(eq) -> dict:
    return {
        "alpha1": eq.alpha1, "alpha2": eq.alpha2, "x0_m": eq.x0,
        "delta_tilde1_rad_s": eq.delta_tilde1, "delta2_rad_s": eq.delta2,
        "omega_m_rad_s": eq.omega_m, "g0_rad_s_m": eq.g0, "g_rad_s": eq.g,
        "n1": eq.n1, "n2": eq.n2, "cos2k1x0": eq.cos2k1x0, "iterations": eq.iterations,
    }


def _run_steady(cfg):
    eq = steadystate.solve_equilibrium(cfg.params)
    return _record(cfg, {"equilibrium": _equilibrium_record(eq)})


def _run_spectrum(cfg):
    w = cfg.params.omega_trap
    grid_spec = cfg.options.get("delta_grid") or (-3 * w, 1 * w, 801)
    grid = _grid(grid_spec, "--delta-grid")
    table = steadystate.photon_number_scan(cfg.params, grid)
    return _table(cfg, ("delta_tilde1_rad_s", "n1", "n2"), [tuple(map(float, r)) for r in table])


def _run_response(cfg):
    params = cfg.params
    eq = steadystate.solve_equilibrium(params)
    verdict = response.stability_check(response.drift_matrix(eq, params))
    if not verdict.stable:
        raise UnstableSystem("S_xx is undefined for an unstable system", max_re=verdict.max_re)
    grid_spec = cfg.options.get("omega_grid") or (0.5 * eq.omega_m, 1.5 * eq.omega_m, 2001)
    omega = _grid(grid_spec, "--omega-grid")
    chi_o = response.chi_o(eq, params, omega)
    chi = response.chi(eq, params, omega)
    sxx = response.s_xx(eq, params, omega, check_stability=False)
    columns = ["omega_rad_s", "re_chi_o", "im_chi_o", "re_chi", "im_chi", "s_xx"]
    data = [omega, chi_o.real, chi_o.imag, chi.real, chi.imag, sxx]
    settings = {}
    if cfg.options.get("approx"):
        columns += ["s_xx_sl", "s_xx_dl"]
        data.append(response.approx_psd(eq, params, omega, "SL"))
        _, modes, c1, c2, fell_back = cooling.dl_rate(eq, params)
        settings["dl_fallback"] = fell_back
        if fell_back:
            data.append(np.full_like(omega, np.nan))
        else:
            data.append(response.approx_psd(eq, params, omega, "DL", modes=modes, constants=(c1, c2)))
    rows = [tuple(float(col[i]) for col in data) for i in range(len(omega))]
    return _table(cfg, columns, rows, settings)


def _run_cool(cfg):
    params = cfg.params
    eq = steadystate.solve_equilibrium(params)
    result = cooling.cooling_result(params, eq)
    modes = result.modes
    payload = {
        "cooling": {
            "gamma_opt_sl": result.gamma_opt_sl,
            "gamma_eff_sl": params.gamma_m + result.gamma_opt_sl,
            "gamma_eff_dl": result.gamma_eff_dl,
            "gamma_eff_exact": result.gamma_eff_exact,
            "gamma_eff_lyapunov": result.gamma_eff_lyapunov,
            "c1": result.c1,
            "c2": result.c2,
            "dl_fallback": result.dl_fallback,
            "stable": result.stable,
            "max_re": result.max_re,
            "g_over_kappa1": eq.g / params.kappa1,
        },
        "modes": None if modes is None else {
            "omega_m1": modes.omega_m1, "omega_m2": modes.omega_m2,
            "gamma_1": modes.gamma_1, "gamma_2": modes.gamma_2,
            "s0": modes.s0, "s1": modes.s1, "s2": modes.s2,
        },
    }
    return _record(cfg, payload)


def _run_sweep(cfg):
    opts = cfg.options
    axis1 = _grid(opts["axis1"], "--axis1") if opts.get("axis1") else None
    axis2 = _grid(opts["axis2"], "--axis2") if opts.get("axis2") else None
    grid = sweep.plane_sweep(
        cfg.params, opts["plane"], axis1, axis2, opts["methods"],
        detuning_range=opts.get("detuning_range"), n_seed=opts["n_seed"], workers=cfg.workers,
    )
    names = {"mu": "mu_rad_s", "d": "d_rad_s", "delta_tilde1": "delta_tilde1_rad_s"}
    settings = {
        "plane": grid.plane,
        "axis1": names[grid.axis1_name],
        "axis2": names[grid.axis2_name],
        "methods": ",".join(grid.methods),
        "normalized_by": grid.norm_method,
        "reference_gamma_opt": grid.reference,
        "detuning_range": " ".join(repr(float(v)) for v in grid.settings["detuning_range"]),
        "n_seed": grid.settings["n_seed"],
    }
    columns = ("axis1", "axis2", "gamma_sl", "gamma_dl", "gamma_exact", "gamma_norm", "delta_star", "stable")
    return _table(cfg, columns, list(grid.rows()), settings)


def _run_power(cfg):
    opts = cfg.options
    w = cfg.params.omega_trap
    powers = opts.get("powers") or list(np.geomspace(1e-4, 1e-2, 11))
    mu_values = opts.get("mu_values") or [0.0, 0.25 * w]
    rows = sweep.power_sweep(
        cfg.params, powers, mu_values, detuning_range=opts.get("detuning_range"),
        n_seed=opts["n_seed"], method=opts["method"],
    )
    columns = ("power_w", "mu_rad_s", "d_rad_s", "gamma_max", "delta_star", "g_over_kappa1", "status")
    table = [(r.power, r.mu, r.d, r.gamma_max, r.delta_star, r.g_over_kappa1, r.status) for r in rows]
    settings = {"method": opts["method"], "n_seed": opts["n_seed"]}
    return _table(cfg, columns, table, settings)


def _run_optimize(cfg):
    opts = cfg.options
    params = cfg.params
    eq = steadystate.solve_equilibrium(params)
    result = {}
    for method in opts["methods"]:
        delta_star, gamma_star = sweep.maximize_over_detuning(
            params, method, opts.get("detuning_range"), opts["n_seed"]
        )
        result[method] = {"delta_star": delta_star, "gamma_opt": gamma_star}
    laws = cooling.optimal_detunings(params.mu, params.d, eq.omega_m)
    payload = {
        "optimum": result,
        "detuning_laws": {
            "anti_stokes_resonance": list(laws.denominator_min),
            "photon_number_peaks": list(laws.numerator_max),
            "joint": None if laws.joint is None else [list(j) for j in laws.joint],
        },
    }
    return _record(cfg, payload)


_RUNNERS = {
    "steady": _run_steady, "spectrum": _run_spectrum, "response": _run_response,
    "cool": _run_cool, "sweep": _run_sweep, "power": _run_power, "optimize": _run_optimize,
}


def run(cfg: RunConfig) -> int:
    """Execute ``cfg``; physics errors propagate as CoolingError."""
    if cfg.output is not None and cfg.output != "-":
        parent = Path(cfg.output).resolve().parent
        if not parent.is_dir():
            raise UsageError(f"output directory does not exist: {parent}")
    text = _RUNNERS[cfg.subcommand](cfg)
    write_atomic(cfg.output, text)
    return 0


def main(argv=None) -> int:
    try:
        cfg = parse(argv)
        return run(cfg)
    except UsageError as exc:
        print(f"coupledcool: error: {exc}", file=sys.stderr)
        return 2
    except InvalidParam as exc:
        key = CONFIG_KEYS.get(exc.name, exc.name)
        print(f"coupledcool: error: invalid {key}: {exc.reason}", file=sys.stderr)
        return 2
    except CoolingError as exc:
        print(json.dumps(jsonable(exc.as_record())), file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
