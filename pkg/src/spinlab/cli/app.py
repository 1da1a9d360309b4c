"""
``spinlab`` command line entry point.

Results go to standard output as JSON (or a table for ``acceptance``); logs
and progress bars go to standard error.  Exit codes: 0 pass, 1 criterion
failure, 2 usage or configuration error, 3 infeasible model.
"""
import argparse
import json
import sys
import time
from datetime import datetime, timezone
from typing import Any, Dict, List, Optional

from .. import __version__
from ..core.exceptions import SpinLabError
from ..dynamics.chains import CHAIN_NAMES
from ..dynamics.mixing import EXACT, MONTE_CARLO
from ..oracle.matrices import RESAMPLE_BLOCK, RESAMPLE_COMPLEMENT
from ..partition.partition import MODES
from ..services.acceptance_service import SUITES, AcceptanceService, format_report
from ..services.experiment_service import ExperimentService
from ..services.manifest_service import to_jsonable
from ..utils.config import get_config, reset_config
from ..utils.logger import get_logger, set_level

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="root seed for every random stream")
    common.add_argument("--jobs", type=int, default=None, help="worker processes for independent replicas")
    common.add_argument("--output-dir", default=None, help="directory for manifests, CSV and JSON outputs")
    common.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--config", default=None, help="directory holding default.yaml")
    return common


def _system_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--graph", required=True, help="graph file or generator spec such as cycle:8")
    parser.add_argument("--model", required=True, help="model JSON file or inline JSON object")
    parser.add_argument("--pinning", default=None, help="JSON file mapping vertex to spin")


def _chain_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--chain", default="glauber", choices=CHAIN_NAMES)
    parser.add_argument("--partition", default=None, help="partition JSON file")
    parser.add_argument("--k", type=int, default=None, help="blocks to construct when no partition file is given")
    parser.add_argument("--xi", type=float, default=1.0)
    parser.add_argument("--partition-mode", default="general", choices=MODES)
    parser.add_argument("--ell", type=int, default=None, help="kept blocks of the down-up walk")
    parser.add_argument("--M", type=int, default=1)
    parser.add_argument("--eta", type=float, default=1.0)
    parser.add_argument("--t0", type=int, default=None)
    parser.add_argument("--t1", type=int, default=None)
    parser.add_argument("--c-const", type=float, default=None)
    parser.add_argument("--mode", default=RESAMPLE_COMPLEMENT, choices=[RESAMPLE_COMPLEMENT, RESAMPLE_BLOCK])


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="spinlab",
        description="Exact oracles, Markov chains and couplings for multi-spin systems",
    )
    parser.add_argument("--version", action="version", version=f"spinlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gap = sub.add_parser("gap", parents=[common], help="spectral gap and relaxation time of a chain")
    _system_options(gap)
    _chain_options(gap)

    sample = sub.add_parser("sample", parents=[common], help="independent replicas of a chain")
    _system_options(sample)
    _chain_options(sample)
    sample.add_argument("--replicas", type=int, default=1000)
    sample.add_argument("--steps", type=int, default=1, help="transitions per replica")
    sample.add_argument("--eps", type=float, default=0.05, help="target accuracy of the SimDownUp schedule")

    mix = sub.add_parser("mix", parents=[common], help="mixing-time estimate and TV curve")
    _system_options(mix)
    _chain_options(mix)
    mix.add_argument("--eps", type=float, default=0.25)
    mix.add_argument("--replicas", type=int, default=1000)
    mix.add_argument("--estimation", default=EXACT, choices=[EXACT, MONTE_CARLO])
    mix.add_argument("--monotone", action="store_true", help="start Monte Carlo runs from the bipartite maximal state")

    partition = sub.add_parser("partition", parents=[common], help="randomized degree-partition construction")
    partition.add_argument("--graph", required=True)
    partition.add_argument("--k", type=int, required=True)
    partition.add_argument("--xi", type=float, default=1.0)
    partition.add_argument("--mode", default="general", choices=MODES)
    partition.add_argument("--bound", type=int, default=None, help="per-block cap for bipartite_left mode")

    ci = sub.add_parser("ci", parents=[common], help="empirical coupling independence")
    ci.add_argument("--graph", required=True)
    ci.add_argument("--model", required=True)
    ci.add_argument("--coupling", default="two-spin", choices=["two-spin", "coloring", "independent"])
    ci.add_argument("--pairs", type=int, default=10)
    ci.add_argument("--samples", type=int, default=1000)
    ci.add_argument("--target", type=float, default=None)
    ci.add_argument("--pinnings", default="random", choices=["all", "random", "empty"])
    ci.add_argument("--max-pinned", type=int, default=2)
    ci.add_argument("--delta", type=float, default=0.05, help="confidence level of the Bernstein intervals")

    censor = sub.add_parser("censor-check", parents=[common], help="censoring inequality on a monotone system")
    censor.add_argument("--graph", required=True)
    censor.add_argument("--model", required=True)
    censor.add_argument("--c-const", type=float, nargs="+", default=[1.0, 2.0], help="schedule lengths ceil(c n)")
    censor.add_argument("--masks", type=int, default=256, help="random masks for schedules too long to enumerate")
    censor.add_argument("--orders", default="bipartite", choices=["bipartite", "identity"])

    acceptance = sub.add_parser("acceptance", parents=[common], help="run an acceptance suite")
    acceptance.add_argument("suite", help=f"one of: {', '.join(SUITES)}")
    acceptance.add_argument("--quick", action="store_true", help="smaller Monte Carlo sample sizes")
    acceptance.add_argument("--inject-fault", type=int, default=None, metavar="N", help="force criterion N to fail")
    return parser


def _chain_kwargs(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "partition": args.partition,
        "k": args.k,
        "xi": args.xi,
        "partition_mode": args.partition_mode,
        "ell": args.ell,
        "M": args.M,
        "eta": args.eta,
        "t0": args.t0,
        "t1": args.t1,
        "c_const": args.c_const,
        "mode": args.mode,
    }


def _print(data: Any) -> None:
    print(json.dumps(to_jsonable(data), indent=2, sort_keys=True))


def _run_acceptance(args: argparse.Namespace, service: ExperimentService) -> int:
    started, clock = datetime.now(timezone.utc), time.perf_counter()
    report = AcceptanceService(args.seed, args.quick, args.inject_fault).run(args.suite)
    print(format_report(report))
    path = service.manifests.write_json(f"acceptance-{args.suite}.json", report.model_dump())
    outcome = {"passed": report.passed, "failed": [r.criterion for r in report.failed()]}
    service.manifests.write_manifest(
        "acceptance",
        {"suite": args.suite, "quick": args.quick, "inject_fault": args.inject_fault},
        args.seed,
        started,
        time.perf_counter() - clock,
        outcome,
        [path],
    )
    for r in report.failed():
        print(f"criterion {r.criterion} failed: {r.name}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_FAILED


def _dispatch(args: argparse.Namespace) -> int:
    jobs = args.jobs if args.jobs is not None else get_config().get_int("experiments.jobs", 1)
    service = ExperimentService(args.seed, jobs, args.output_dir)
    if args.command == "acceptance":
        return _run_acceptance(args, service)
    if args.command == "gap":
        result = service.run_gap(args.graph, args.model, args.chain, args.pinning, **_chain_kwargs(args))
    elif args.command == "sample":
        result = service.run_sample(
            args.graph, args.model, args.chain, args.replicas, args.steps, args.pinning,
            epsilon=args.eps, **_chain_kwargs(args),
        )
    elif args.command == "mix":
        result = service.run_mix(
            args.graph, args.model, args.chain, args.eps, args.replicas, args.estimation,
            args.monotone, args.pinning, **_chain_kwargs(args),
        )
    elif args.command == "partition":
        result = service.run_partition(args.graph, args.k, args.xi, args.mode, args.bound)
    elif args.command == "ci":
        result = service.run_ci(
            args.graph, args.model, args.coupling, args.pairs, args.samples, args.target,
            args.pinnings, args.max_pinned, args.delta,
        )
    else:
        result = service.run_censor_check(args.graph, args.model, args.c_const, args.masks, args.orders)
    _print(result)
    if result.get("meets_target") is False or result.get("holds") is False:
        return EXIT_FAILED
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    try:
        if args.config:
            reset_config(args.config)
        if args.log_level:
            set_level(args.log_level)
        return _dispatch(args)
    except SpinLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except (OSError, ValueError) as e:
        logger.error(f"Failed to run {args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
