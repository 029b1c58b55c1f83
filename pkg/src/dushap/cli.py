"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 computation error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__, kernels
from .bench import (BOUNDS_HEADER, COMPARISON_HEADER, CONVERGENCE_HEADER, ComparisonConfig,
                    SizeDistribution, bounds_experiment, convergence_experiment, manifest, render,
                    run_comparison)
from .bounds import bound_report
from .empirical_game import EmpiricalGame, Task, load_csv, partition
from .estimators import Method, estimate, substream
from .exact import ExactConfig, Form, exact_shapley
from .game_core import (GameSpec, NonFiniteUtilityError, PlayerCapError, cardinal_to_set_utility,
                        normalize_utility)
from .games import (knee_utility, linear_utility, parse_game_spec, sqrt_utility,
                    square_utility)
from .regression_game import (Mode, RegressionGameParams, closed_form_utility,
                              closed_form_value, empirical_utility_oracle,
                              make_regression_set_utility, parse_sigma, parse_theta)

log = logging.getLogger("dushap")


class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    g.add_argument("--format", choices=("csv", "json"), default=None,
                   help="output format (default: json for exact/estimate/oracle, csv otherwise)")
    g.add_argument("--out", type=Path, default=None, help="write results here instead of stdout")
    g.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    g.add_argument("--config", type=Path, default=None,
                   help="'key = value' file of defaults; flags override it")


def _game_options(p: argparse.ArgumentParser, with_I: bool = True) -> None:
    g = p.add_argument_group("game")
    g.add_argument("--sizes", type=str, default=None, help="comma-separated dataset sizes")
    g.add_argument("--sizes-file", type=Path, default=None, help="file with one size per line")
    g.add_argument("--sizes-dist", type=str, default=None,
                   help="uniform:LO:HI | pow2 | explicit:a,b,... (needs --I)")
    if with_I:
        g.add_argument("--I", type=int, default=None, help="number of players")
    g.add_argument("--game", type=str, default="sqrt",
                   help="sqrt | square | linear | regression:d=..,sigma=..[,mode=closed|empirical]"
                        " | fig2:nmax=.. (n / (10^k + n) with 10^k tracking the total size;"
                        " sizes default to U{1..nmax})")
    e = p.add_argument_group("empirical game (replaces --game when --data is given)")
    e.add_argument("--data", type=Path, default=None, help="CSV file with a header row")
    e.add_argument("--label", type=str, default="label", help="label column")
    e.add_argument("--task", choices=("clf", "reg"), default="clf")
    e.add_argument("--players", type=int, default=None, help="alias for --I")
    e.add_argument("--holdout", type=float, default=0.10, help="hold-out fraction")
    e.add_argument("--steps", type=int, default=20, help="SGD steps per coalition")
    e.add_argument("--lr", type=float, default=0.1, help="SGD learning rate")
    e.add_argument("--m-draws", type=int, default=1, help="subset draws per proxy point")


def build_parser() -> Parser:
    parser = Parser(prog="dushap", description=__doc__)
    parser.add_argument("--version", action="version", version=f"dushap {__version__}")
    sub = parser.add_subparsers(dest="subcommand", parser_class=Parser, required=True)

    p = sub.add_parser("exact", help="exact Shapley values by enumeration")
    _game_options(p)
    p.add_argument("--form", choices=("subsets", "permutations"), default="subsets")
    _common(p)
    p.set_defaults(command="exact")

    p = sub.add_parser("estimate", help="approximate Shapley values")
    _game_options(p)
    p.add_argument("--method", choices=("exact",) + tuple(m.value for m in Method), default="du")
    p.add_argument("--budget", type=int, default=None, help="terms per player (default I)")
    _common(p)
    p.set_defaults(command="estimate")

    bench = sub.add_parser("bench", help="estimator comparison experiments")
    bench_sub = bench.add_subparsers(dest="bench_command", parser_class=Parser, required=True)
    p = bench_sub.add_parser("compare", help="MSE of each estimator against exact values")
    _game_options(p)
    p.add_argument("--budget", type=int, default=None, help="terms per player (default I)")
    p.add_argument("--methods", type=str, default="mc,mc-anti,owen,du,dupp")
    p.add_argument("--estimations", type=int, default=25, help="estimations per MSE")
    p.add_argument("--repetitions", type=int, default=10, help="MSE repetitions")
    _common(p)
    p.set_defaults(command="bench compare")

    p = sub.add_parser("converge", help="KS distance of the normalised coalition size to U[0,1]")
    p.add_argument("--I", type=str, default="10,50,500", help="comma-separated player counts")
    p.add_argument("--n-max", type=int, default=100, help="sizes ~ U{1..n_max}")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--bins", type=int, default=50)
    _common(p)
    p.set_defaults(command="converge")

    p = sub.add_parser("bounds", help="DU bias bound versus MC error at budget I")
    p.add_argument("--I-grid", type=str, default="5,10,20,50,100,200,500")
    p.add_argument("--n-max", type=int, default=100)
    p.add_argument("--draws", type=int, default=100)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--sizes", type=str, default=None,
                   help="report the bound for this single instance instead (JSON)")
    p.add_argument("--game", type=str, default="fig2", help="game for --sizes")
    _common(p)
    p.set_defaults(command="bounds")

    p = sub.add_parser("oracle", help="closed-form regression utility versus simulation")
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--n", type=str, default="50", help="comma-separated pooled sizes")
    p.add_argument("--mc-reps", type=int, default=2000)
    p.add_argument("--test-samples", type=int, default=2000)
    p.add_argument("--Sigma-spec", type=str, default="identity",
                   help="identity | scaled:C | path to a d x d file")
    p.add_argument("--theta-spec", type=str, default="ones",
                   help="ones | standard-normal:SEED | path to a file")
    _common(p)
    p.set_defaults(command="oracle")
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    node = parser
    for name in command.split():
        action = next(a for a in node._actions if isinstance(a, argparse._SubParsersAction))
        node = action.choices[name]
    return node


def read_config(path: Path) -> dict[str, str]:
    out = {}
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, value = line.partition("=")
        if not eq:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def parse_args(argv: Optional[Sequence[str]]) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        if not args.config.is_file():
            parser.error(f"config file {args.config} not found")
        try:
            values = read_config(args.config)
        except UsageError as exc:
            parser.error(str(exc))
        sub = _subparser(parser, args.command)
        known = {a.dest for a in sub._actions}
        unknown = sorted(set(values) - known)
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        sub.set_defaults(**values)
        args = parser.parse_args(argv)
    if args.out is not None and not args.out.parent.exists():
        parser.error(f"output directory {args.out.parent} does not exist")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    return args


def _sizes(args) -> GameSpec:
    try:
        return _sizes_unchecked(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _sizes_unchecked(args) -> GameSpec:
    sources = [s for s in (args.sizes, args.sizes_file, args.sizes_dist) if s is not None]
    if len(sources) > 1:
        raise UsageError("give only one of --sizes, --sizes-file, --sizes-dist")
    n = args.I if getattr(args, "I", None) is not None else args.players
    if args.sizes is not None:
        g = GameSpec.parse(args.sizes)
    elif args.sizes_file is not None:
        g = GameSpec.read(args.sizes_file)
    else:
        dist = args.sizes_dist
        if dist is None:
            name, params = parse_game_spec(args.game)
            if name == "fig2":
                dist = f"uniform:1:{params.get('nmax', 100)}"
            else:
                raise UsageError("no dataset sizes given (--sizes, --sizes-file or --sizes-dist)")
        if n is None:
            raise UsageError("--sizes-dist needs --I")
        g = SizeDistribution.parse(dist).draw(n, substream(args.seed, 500))
    if n is not None and n != g.n_players:
        raise UsageError(f"--I={n} but {g.n_players} sizes were given")
    return g


def build_game(args):
    """Return ``(set utility, cardinal utility or per-player proxies, game)``."""
    g = _sizes(args)
    if args.data is not None:
        data = load_csv(args.data, args.label, Task(args.task))
        part = partition(data, g, args.seed, args.holdout)
        eg = EmpiricalGame(data, part, seed=args.seed, steps=args.steps, learning_rate=args.lr)
        proxies = [eg.cardinal_proxy(i, args.m_draws) for i in range(g.n_players)]
        return eg.set_utility(), proxies, g
    name, params = parse_game_spec(args.game)
    if name == "sqrt":
        w = sqrt_utility()
    elif name == "square":
        w = square_utility()
    elif name == "linear":
        w = linear_utility(float(params.get("c", 1.0)))
    elif name == "fig2":
        w = knee_utility(g.total)
    elif name == "regression":
        rp = RegressionGameParams(int(params.get("d", 10)), float(params.get("sigma", 1.0)))
        mode = Mode(params.get("mode", "closed"))
        w = closed_form_utility(rp)
        if mode is Mode.EMPIRICAL:
            u = make_regression_set_utility(rp, np.eye(rp.d), np.ones(rp.d), g, mode, args.seed)
            return u, w, g
    else:
        raise UsageError(f"unknown game {name!r}")
    return normalize_utility(cardinal_to_set_utility(w, g)), w, g


def _config_dict(args) -> dict:
    skip = {"config", "out", "format", "threads"}
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in sorted(vars(args).items()) if k not in skip}


def _emit(args, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)


def _valuation_output(args, vv, g) -> str:
    meta = manifest(_config_dict(args), args.seed)
    fmt = args.format or "json"
    if fmt == "json":
        body = {"manifest": meta, "sizes": list(g.sizes), "result": vv.to_dict()}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    rows = [(i, float(v)) for i, v in enumerate(vv.values)]
    return render(("player", "value"), rows, meta, "csv")


def cmd_exact(args) -> str:
    u, _, g = build_game(args)
    cfg = ExactConfig(form=Form(args.form))
    return _valuation_output(args, exact_shapley(u, g, cfg), g)


def cmd_estimate(args) -> str:
    u, w, g = build_game(args)
    if args.method == "exact":
        vv = exact_shapley(u, g)
    else:
        budget = args.budget if args.budget is not None else g.n_players
        vv = estimate(args.method, g, u=u, w=w, budget_terms=budget, seed=args.seed,
                      threads=args.threads)
    return _valuation_output(args, vv, g)


def cmd_bench_compare(args) -> str:
    u, w, g = build_game(args)
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    dist = args.sizes_dist or f"explicit:{','.join(map(str, g.sizes))}"
    cfg = ComparisonConfig(g.n_players, SizeDistribution.parse(dist), methods, args.budget,
                           args.estimations, args.repetitions, args.seed, args.threads)
    table = run_comparison(cfg, u, w, g)
    meta = manifest(dict(_config_dict(args), sizes=list(g.sizes)), args.seed)
    return render(COMPARISON_HEADER, table.csv_rows(), meta, args.format or "csv")


def cmd_converge(args) -> str:
    dist = SizeDistribution("uniform", 1, args.n_max)
    rows = [convergence_experiment(I, dist, args.samples, args.seed, args.bins).csv_row()
            for I in _int_list(args.I)]
    return render(CONVERGENCE_HEADER, rows, manifest(_config_dict(args), args.seed),
                  args.format or "csv")


def cmd_bounds(args) -> str:
    if args.sizes is not None:
        g = GameSpec.parse(args.sizes)
        name, params = parse_game_spec(args.game)
        w = {"fig2": lambda: knee_utility(g.total), "sqrt": sqrt_utility}.get(name)
        if name == "regression":
            w = lambda: closed_form_utility(RegressionGameParams(int(params.get("d", 10)),
                                                                 float(params.get("sigma", 1.0))))
        if w is None:
            raise UsageError(f"unknown game {name!r}")
        report = bound_report(w(), g, args.delta)
        body = {"manifest": manifest(_config_dict(args), args.seed), "report": json.loads(report.to_json())}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    rows = bounds_experiment(_int_list(args.I_grid), args.n_max, args.draws, args.delta,
                             args.seed, args.threads)
    return render(BOUNDS_HEADER, rows, manifest(_config_dict(args), args.seed),
                  args.format or "csv")


def cmd_oracle(args) -> str:
    params = RegressionGameParams(args.d, args.sigma)
    Sigma = parse_sigma(args.Sigma_spec, args.d)
    theta = parse_theta(args.theta_spec, args.d)
    rows = []
    for n in _int_list(args.n):
        closed = closed_form_value(params, n)
        emp = empirical_utility_oracle(params, Sigma, theta, n, args.mc_reps, args.test_samples,
                                       args.seed)
        rows.append((n, closed, emp, abs(emp - closed) / abs(closed)))
    return render(("n", "closed_form", "empirical", "relative_error"), rows,
                  manifest(_config_dict(args), args.seed), args.format or "json")


COMMANDS = {"exact": cmd_exact, "estimate": cmd_estimate, "bench compare": cmd_bench_compare,
            "converge": cmd_converge, "bounds": cmd_bounds, "oracle": cmd_oracle}


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        _emit(args, COMMANDS[args.command](args))
    except UsageError as exc:
        print(f"dushap: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, PlayerCapError,
            NonFiniteUtilityError, OSError, KeyError) as exc:
        print(f"dushap: computation failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
