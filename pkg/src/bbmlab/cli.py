"""Command line front end: one subcommand per experiment plus `oracle`.

Exit codes: 0 success, 1 runtime failure (including runs where more than
10 percent of replicas failed), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (ConfigError, REQUIRED_KEYS, _jsonable, load_config,
                          parse_complex, run)
from .oracles import (bridge_barrier_bound, envelope_curve,
                      gaussian_tail_bound, limit_max_cdf,
                      many_to_two_pair_moment, martingale_second_moment)
from .partition import m_of_t
from .phase import classify, limiting_free_energy


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bbmlab",
        description="Branching random energy simulations at complex "
                    "temperature")
    sub = parser.add_subparsers(dest="command")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="base seed override")
    common.add_argument("--replicas", type=int, help="replica count override")
    common.add_argument("--out", help="output directory override")
    common.add_argument("--threads", type=int,
                        help="worker processes (default: all cores)")
    for name in sorted(REQUIRED_KEYS):
        sub.add_parser(name, parents=[common],
                       help=f"run the {name} experiment")
    oracle = sub.add_parser("oracle", help="evaluate one closed form")
    oracle.add_argument("name", help="which quantity (see `oracle list`)")
    oracle.add_argument("args", nargs="*", help="positional arguments")
    return parser


_ORACLE_USAGE = {
    "m_of_t": "m_of_t T",
    "gaussian_tail": "gaussian_tail X",
    "bridge_bound": "bridge_bound A T",
    "envelope": "envelope S T GAMMA",
    "martingale_m2": "martingale_m2 BETA T K",
    "pair_moment": "pair_moment LAMBDA RHO TAU T K",
    "free_energy": "free_energy BETA",
    "classify": "classify BETA",
    "limit_max_cdf": "limit_max_cdf Y C Z",
}


def _oracle_value(name: str, raw: list[str]):
    if name == "m_of_t":
        (t,) = map(float, raw)
        return m_of_t(t)
    if name == "gaussian_tail":
        (x,) = map(float, raw)
        return gaussian_tail_bound(x)
    if name == "bridge_bound":
        a, t = map(float, raw)
        return bridge_barrier_bound(a, t)
    if name == "envelope":
        s, t, gamma = map(float, raw)
        return envelope_curve(s, t, gamma)
    if name == "martingale_m2":
        beta = parse_complex(raw[0])
        t, k = float(raw[1]), float(raw[2])
        return martingale_second_moment(beta, t, k, allow_unbounded=True)
    if name == "pair_moment":
        lam = parse_complex(raw[0])
        rho, tau, t, k = map(float, raw[1:])
        return many_to_two_pair_moment(lam, rho, tau, t, k)
    if name == "free_energy":
        return limiting_free_energy(parse_complex(raw[0]))
    if name == "classify":
        return classify(parse_complex(raw[0])).region.value
    if name == "limit_max_cdf":
        y, c, z = map(float, raw)
        return limit_max_cdf(y, c, z)
    raise ConfigError(f"unknown oracle {name!r}")


def _run_oracle(args) -> int:
    if args.name == "list":
        for usage in _ORACLE_USAGE.values():
            print(usage)
        return 0
    try:
        value = _oracle_value(args.name, args.args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (TypeError, ValueError) as exc:
        usage = _ORACLE_USAGE.get(args.name, "")
        print(f"error: {exc}" + (f" (usage: {usage})" if usage else ""),
              file=sys.stderr)
        return 2
    print(value)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "oracle":
        return _run_oracle(args)
    overrides = {
        "experiment": args.command,
        "seed": args.seed,
        "replicas": args.replicas,
        "output_dir": args.out,
        "threads": args.threads,
    }
    try:
        cfg, provided = load_config(args.config, overrides)
        result = run(cfg, provided)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(result.run_dir)
    print(json.dumps(_jsonable(result.summary), indent=2, sort_keys=True))
    if result.failures:
        print(f"{len(result.failures)} of {result.tasks} tasks failed",
              file=sys.stderr)
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
