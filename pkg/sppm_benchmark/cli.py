"""
Command-line entry point.

Subcommands:
    run <config.json>     run an experiment file
    preset <name>         run an embedded experiment (fig1 ... fig4)
    list-presets          show the embedded experiments
    certify               print the rate certificate of one method
    verify                run the verification suite

Exit codes: 0 success, 1 I/O failure, 2 configuration error,
3 invalid certificate, 4 verification failure.
"""

import argparse
import logging
from pathlib import Path
from typing import Optional, Sequence

from .config import METHOD_NAMES, PRESETS, THEORY, MethodConfig, get_preset, load_config
from .core.benchmark import DEFAULT_RESULTS_DIR, SPPMBenchmark
from .core.problem import similarity_pair_problem, toy_problem
from .exceptions import CertificateInvalid, ConfigError, SPPMError
from .verification import SCALES, verify_all

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_CERTIFICATE = 3
EXIT_VERIFICATION = 4

FIXTURE_PROBLEMS = {
    "toy1": toy_problem,
    "similarity": similarity_pair_problem,
}


def _setting(value: str):
    """A number or the literal 'theory'"""
    if value == THEORY:
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or '{THEORY}', got {value!r}")


def build_arg_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Base seed, overrides the config.")
    common.add_argument("--out-dir", type=Path, default=DEFAULT_RESULTS_DIR,
                        help="Directory for CSV, SVG and metadata files.")
    common.add_argument("--runs", type=int, default=None, help="Runs per cell, overrides the config.")
    common.add_argument("--quiet", action="store_true", help="Only log warnings and errors.")

    parser = argparse.ArgumentParser(
        prog="sppm-benchmark",
        description="Stochastic proximal point experiments, certificates and checks.")
    commands = parser.add_subparsers(dest="command", required=True)

    run_parser = commands.add_parser("run", parents=[common], help="Run an experiment file.")
    run_parser.add_argument("config", type=Path, help="Path to the experiment JSON.")

    preset_parser = commands.add_parser("preset", parents=[common], help="Run an embedded experiment.")
    preset_parser.add_argument("name", choices=sorted(PRESETS), help="Preset name.")

    commands.add_parser("list-presets", parents=[common], help="List embedded experiments.")

    certify = commands.add_parser("certify", parents=[common],
                                  help="Print the rate certificate of one method.")
    certify.add_argument("--method", required=True, choices=METHOD_NAMES)
    certify.add_argument("--problem", default=None,
                         help="toy1, similarity or a problem JSON file; random instance when omitted.")
    certify.add_argument("--n", type=int, default=10, help="Random instance size.")
    certify.add_argument("--d", type=int, default=3, help="Random instance dimension.")
    certify.add_argument("--data-seed", type=int, default=42)
    certify.add_argument("--lambda-constant", type=float, default=None,
                         help="Constant ridge weight; powers-of-two rule when omitted.")
    certify.add_argument("--gamma", type=_setting, default=THEORY, help="Stepsize or 'theory'.")
    certify.add_argument("--alpha", type=_setting, default=None,
                         help="Lyapunov weight or 'theory'; the method's own when omitted.")
    certify.add_argument("--epsilon", type=float, default=1e-2, help="Target accuracy.")
    certify.add_argument("--p", type=float, default=None, help="Refresh probability (lsvrp).")
    certify.add_argument("--tau", type=int, default=None, help="Subset size (sppm-nice).")

    verify = commands.add_parser("verify", parents=[common], help="Run the verification suite.")
    verify.add_argument("--scale", choices=sorted(SCALES), default="quick")
    return parser


def _run_config(args: argparse.Namespace, config) -> int:
    config = config.with_overrides(seed=args.seed, runs=args.runs)
    benchmark = SPPMBenchmark()
    outcome = benchmark.run_experiment(config, out_dir=args.out_dir)
    benchmark.print_experiment_report(outcome)
    return EXIT_OK


def _certify(args: argparse.Namespace) -> int:
    benchmark = SPPMBenchmark()
    if args.problem in FIXTURE_PROBLEMS:
        problem = FIXTURE_PROBLEMS[args.problem]()
        benchmark.load_problem(problem)
    elif args.problem is not None:
        problem = benchmark.load_problem_from_file(args.problem)
    else:
        rule = "powers-of-two" if args.lambda_constant is None else {"constant": args.lambda_constant}
        problem = benchmark.create_random_problem(
            f"random-n{args.n}-d{args.d}-s{args.data_seed}", args.n, args.d,
            seed=args.data_seed, lambda_rule=rule)

    entry = {"name": args.method, "gamma": args.gamma, "epsilon": args.epsilon}
    for key in ("alpha", "p", "tau"):
        if getattr(args, key) is not None:
            entry[key] = getattr(args, key)
    method_config = MethodConfig.from_dict(entry, path="certify")

    report = benchmark.certify(problem.name, method_config, args.gamma)
    print(f"method:       {report['method']} ({report['family']})")
    print(f"problem:      {report['problem']}")
    print(f"gamma:        {report['gamma']!r}")
    print(f"alpha:        {report['alpha']!r}")
    print(f"theta:        {report['theta']!r}")
    print(f"zeta:         {report['zeta']!r}")
    print(f"neighborhood: {report['neighborhood']!r}")
    print(f"gamma*:       {report['gamma_star']!r}")
    print(f"iterations:   {report['iterations']} (epsilon={report['epsilon']!r}, psi0={report['psi0']:.6g})")
    return EXIT_OK


def _verify(args: argparse.Namespace) -> int:
    reports = verify_all(args.scale, seed=0 if args.seed is None else args.seed)
    for report in reports:
        print(report.to_json())
    return EXIT_OK if all(report.passed for report in reports) else EXIT_VERIFICATION


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_arg_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "run":
            return _run_config(args, load_config(args.config))
        if args.command == "preset":
            return _run_config(args, get_preset(args.name))
        if args.command == "list-presets":
            for name in sorted(PRESETS):
                config = get_preset(name)
                methods = ", ".join(m.display_name() for m in config.methods)
                print(f"{name}: n={config.problem.n} d={config.problem.d} "
                      f"iterations={config.iterations} runs={config.runs} methods={methods}")
            return EXIT_OK
        if args.command == "certify":
            return _certify(args)
        return _verify(args)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except CertificateInvalid as e:
        logger.error(f"Certificate invalid: {e}")
        return EXIT_CERTIFICATE
    except (OSError, SPPMError) as e:
        logger.error(f"Failed: {e}")
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
