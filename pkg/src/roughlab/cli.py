"""Command-line interface: ``roughlab <subcommand> [flags]``.

Exit codes: 0 success or all verdicts passed, 1 some verdict failed,
2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, DivergentSeries, RoughlabError
from .gaussian_paths import parse_hurst, rho_power_sum, sample_fbm
from .hermite_analysis import breuer_major_sigma2, c_p, expand, hermite_eval, power_expansion
from .limit_experiments import classify_regime
from .stats_harness import CSV_COLUMNS, ExperimentConfig, dumps_json, format_real, resolve_name, run

DEFAULT_SEED = 42
EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# config-file keys and the argparse destinations they fill
CONFIG_KEYS = {
    "nu": "nu", "n": "n", "paths": "paths", "seed": "seed", "threads": "threads",
    "out": "out", "format": "format", "dim": "dim", "hermite": "hermite", "power": "power",
    "q_max": "q_max", "nus": "nus",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def parse_grid_sizes(text: str) -> list[int]:
    """``"16384"``, ``"2^14"`` or comma lists of those."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if "^" in part:
                base, exp = part.split("^")
                out.append(int(base) ** int(exp))
            else:
                out.append(int(part))
        except ValueError as exc:
            raise ConfigInvalid(f"cannot read grid size {part!r}") from exc
    if not out:
        raise ConfigInvalid("empty grid size list")
    return out


def _param_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def read_config(path: str | Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment; ``param.X`` sets experiment params."""
    values: dict = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config file {path}: {exc}") from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalid(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key.startswith("param."):
            values.setdefault("params", {})[key[6:]] = _param_value(value)
        elif key in CONFIG_KEYS:
            values[CONFIG_KEYS[key]] = value
        else:
            raise ConfigInvalid(f"{path}:{num}: unknown key {key!r}")
    return values


def _common(p: argparse.ArgumentParser, *, experiment: bool = True) -> None:
    p.add_argument("--nu", help="Hurst parameter, rational ('1/4') or decimal ('0.3')")
    p.add_argument("--n", help="grid size(s): 16384, 2^14 or a comma list")
    p.add_argument("--paths", type=int, help="number of Monte Carlo paths M")
    p.add_argument("--seed", type=int, help=f"master seed (default $ROUGHLAB_SEED or {DEFAULT_SEED})")
    p.add_argument("--threads", type=int, help="worker threads (default: logical cores)")
    p.add_argument("--out", help="directory (or file for simulate) receiving the output")
    p.add_argument("--format", choices=("json", "csv"), help="output format (default json)")
    p.add_argument("--config", help="key=value file mirroring the flags; flags win")
    if experiment:
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="experiment-specific parameter, repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="roughlab", description="Weighted Breuer-Major limits for fBm: constants, simulation, experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("constants", help="print sigma^2, rho power sums and the regime for a Hurst value")
    _common(p, experiment=False)
    p.add_argument("--hermite", default=None, help="pure Hermite function, e.g. H2")
    p.add_argument("--power", type=float, default=None, help="use |x|^p - c_p instead of H_q")
    p.add_argument("--q-max", dest="q_max", type=int, default=None, help="largest q for rho power sums")

    p = sub.add_parser("simulate", help="sample fBm paths and write them out")
    _common(p, experiment=False)
    p.add_argument("--dim", type=int, default=None, help="path dimension d")

    p = sub.add_parser("experiment", help="run a named experiment (A1..A10, smoke, area-refinement, trapezoidal-critical)")
    p.add_argument("name", help="criterion id or alias, e.g. A4 or bm-weighted-clt")
    _common(p)

    p = sub.add_parser("sweep", help="run an experiment over several Hurst values")
    p.add_argument("name")
    p.add_argument("--nus", help="comma list of Hurst values")
    _common(p)

    p = sub.add_parser("selftest", help="exact identity checks, a few seconds")
    _common(p)
    return parser


def _merge(args: argparse.Namespace) -> argparse.Namespace:
    if getattr(args, "config", None):
        conf = read_config(args.config)
        params = conf.pop("params", {})
        for key, value in conf.items():
            if getattr(args, key, None) is None:
                setattr(args, key, value)
        if hasattr(args, "param"):
            args.param = [f"{k}={v}" for k, v in params.items()] + list(args.param)
    for key, cast in (("paths", int), ("seed", int), ("threads", int), ("dim", int), ("q_max", int), ("power", float)):
        if getattr(args, key, None) is not None:
            try:
                setattr(args, key, cast(getattr(args, key)))
            except ValueError as exc:
                raise ConfigInvalid(f"bad value for {key}: {getattr(args, key)!r}") from exc
    if getattr(args, "seed", None) is None:
        env = os.environ.get("ROUGHLAB_SEED")
        try:
            args.seed = int(env) if env else DEFAULT_SEED
        except ValueError as exc:
            raise ConfigInvalid(f"ROUGHLAB_SEED must be an integer, got {env!r}") from exc
    if getattr(args, "format", None) is None:
        args.format = "json"
    if getattr(args, "nu", None) is not None:
        try:
            parse_hurst(args.nu)
        except ValueError as exc:
            raise ConfigInvalid(str(exc)) from exc
    return args


def _params(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigInvalid(f"--param expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _param_value(v.strip())
    return out


def _emit(text: str, args, filename: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text)


def cmd_constants(args) -> int:
    nu = parse_hurst(args.nu if args.nu is not None else "0.3")
    nu_f = float(nu)
    if args.power is not None:
        exp = power_expansion(args.power)
        label = f"|x|^{args.power:g} - c_p"
    else:
        name = (args.hermite or "H2").upper()
        if not name.startswith("H") or not name[1:].isdigit():
            raise ConfigInvalid(f"--hermite expects H<q>, got {args.hermite!r}")
        q = int(name[1:])
        exp = expand(lambda v: hermite_eval(q, v), Q_max=max(8, q + 4))
        label = name
    q_max = args.q_max or max(4, exp.rank + 2)
    sums = {}
    for q in range(1, q_max + 1):
        try:
            sums[str(q)] = rho_power_sum(q, nu_f)
        except DivergentSeries:
            sums[str(q)] = None
    try:
        sigma2 = breuer_major_sigma2(exp, nu_f)
    except DivergentSeries:
        sigma2 = None
    decision = classify_regime(nu, exp.rank) if exp.rank >= 1 else None
    result = {
        "nu": str(nu),
        "function": label,
        "rank": exp.rank,
        "sigma2": sigma2,
        "rho_power_sums": sums,
        "regime": decision.regime.value if decision else None,
        "ell": decision.ell if decision else None,
        "normalization_exponent": str(decision.exponent) if decision else None,
    }
    if args.power is not None:
        result["c_p"] = c_p(args.power)
    if args.format == "csv":
        rows = ["key,value"] + [f"{k},{format_real(v)}" for k, v in result.items() if not isinstance(v, dict)]
        rows += [f"rho_power_sum_{q},{format_real(v)}" for q, v in sums.items()]
        _emit("\n".join(rows) + "\n", args, "constants.csv")
    else:
        _emit(dumps_json(result), args, "constants.json")
    return EXIT_OK


def cmd_simulate(args) -> int:
    n = parse_grid_sizes(args.n or "1024")[-1]
    nu = float(parse_hurst(args.nu if args.nu is not None else "0.3"))
    M = args.paths or 10
    batch = sample_fbm(n, nu, M, d=args.dim or 1, seed=args.seed)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if out.suffix == ".npy":
            batch.to_npy(out)
        else:
            batch.to_csv(out)
    info = {"n": n, "nu": nu, "paths": M, "dim": batch.d, "seed": args.seed,
            "mean_terminal": float(np.mean(batch.values[:, 0, -1])),
            "var_terminal": float(np.var(batch.values[:, 0, -1]))}
    if args.format == "csv" and not args.out:
        np.savetxt(sys.stdout, batch.values[:, 0, :].T, fmt="%.17g", delimiter=",")
    else:
        sys.stdout.write(dumps_json(info) + "\n")
    return EXIT_OK


def _config(args, name: str, nu=None) -> ExperimentConfig:
    return ExperimentConfig(
        name=name,
        nu=nu if nu is not None else args.nu,
        ns=parse_grid_sizes(args.n) if args.n else None,
        M=args.paths,
        seed=args.seed,
        threads=args.threads,
        params=_params(args.param),
    )


def _report_out(report, args) -> None:
    for line in report.summary_lines():
        print(line, file=sys.stderr)
    if args.format == "csv":
        sys.stdout.write(report.to_csv())
    else:
        sys.stdout.write(report.to_json() + "\n")
    if args.out:
        report.write(args.out)


def cmd_experiment(args) -> int:
    report = run(_config(args, args.name))
    _report_out(report, args)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_sweep(args) -> int:
    resolve_name(args.name)
    nus = [s.strip() for s in (args.nus or args.nu or "").split(",") if s.strip()]
    if not nus:
        raise ConfigInvalid("sweep needs --nus (comma list of Hurst values)")
    reports = [run(_config(args, args.name, nu)) for nu in nus]
    for r in reports:
        for line in r.summary_lines():
            print(f"nu={r.config['nu']} {line}", file=sys.stderr)
    if args.format == "csv":
        lines = [",".join(("nu",) + CSV_COLUMNS)]
        for r in reports:
            lines += [f"{r.config['nu']}," + row for row in r.to_csv().splitlines()[1:]]
        text = "\n".join(lines) + "\n"
        _emit(text, args, "sweep.csv")
    else:
        text = "[\n" + ",\n".join(r.to_json() for r in reports) + "\n]"
        _emit(text, args, "sweep.json")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def cmd_selftest(args) -> int:
    args.name = "smoke"
    return cmd_experiment(args)


COMMANDS = {
    "constants": cmd_constants,
    "simulate": cmd_simulate,
    "experiment": cmd_experiment,
    "sweep": cmd_sweep,
    "selftest": cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args = _merge(args)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help exits 0 through argparse
        return int(exc.code or 0)
    except RoughlabError as exc:
        print(f"roughlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"roughlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
