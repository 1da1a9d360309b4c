"""
Experiment orchestration for the command line.

Every experiment builds its inputs, runs, writes its CSV/JSON outputs and
exactly one run manifest, and returns a summary dict for standard output.
"""
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from .manifest_service import ManifestService
from ..core.exceptions import ConfigurationError, StateCapError
from ..core.graph import Graph, parse_graph_spec
from ..core.models import build_model, load_model_file, load_pinning_file
from ..core.system import HammingWeight, SpinSystem, condition, config_to_string
from ..coupling.estimate import PinningSpec, estimate_ci
from ..dynamics.censoring import (
    bipartite_orders,
    censoring_inequality_check,
    check_monotone,
    max_state,
    random_censor_masks,
    random_schedule,
)
from ..dynamics.chains import Chain, build_chain
from ..dynamics.downup import feasible_start
from ..dynamics.mixing import EXACT, estimate_mixing
from ..dynamics.rng import RandomStream
from ..dynamics.simdownup import SimDownUpParams, set_simdownup_schedule
from ..models.schemas import GapReport, ModelSpec
from ..oracle.exact import ExactDistribution, divergence, enumerate_gibbs, tv_estimation_bias
from ..oracle.matrices import RESAMPLE_COMPLEMENT, pinned_mixing_time, spectrum
from ..partition.partition import (
    BIPARTITE_LEFT,
    GENERAL,
    Partition,
    bipartite_lll_condition,
    bipartite_partition_parameters,
    construct_partition,
    lll_condition,
    partition_parameters,
)
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

MAX_EXHAUSTIVE_MASKS = 16


def load_model(model: str) -> ModelSpec:
    """A model file path or an inline JSON object."""
    if Path(model).exists():
        return load_model_file(model)
    try:
        return ModelSpec.model_validate(json.loads(model))
    except (json.JSONDecodeError, ValidationError) as e:
        logger.error(f"Failed to parse model {model!r}: {e}")
        raise ConfigurationError("model must be a JSON file or an inline JSON object", {"model": model}) from e


def build_system(graph: str, model: str, pinning: Optional[str] = None) -> SpinSystem:
    system = build_model(parse_graph_spec(graph), load_model(model))
    if pinning:
        system = condition(system, load_pinning_file(pinning))
    return system


def _run_chunk(args: Tuple[Any, ...]) -> np.ndarray:
    chain, start, replicas, steps, seed, path = args
    configs = np.tile(start, (replicas, 1))
    return chain.run_batch(configs, steps, RandomStream(seed, path))


class ExperimentService:
    """Runs the ``gap``, ``sample``, ``mix``, ``partition``, ``ci`` and ``censor-check`` experiments."""

    def __init__(self, seed: int = 0, jobs: int = 1, output_dir: Optional[str] = None):
        """Initialize the experiment service."""
        if seed < 0:
            raise ConfigurationError("seed must be non-negative", {"seed": seed})
        if jobs < 1:
            raise ConfigurationError("jobs must be positive", {"jobs": jobs})
        self.seed = seed
        self.jobs = jobs
        self.manifests = ManifestService(output_dir)
        self.config = get_config()

    def stream(self, *path: int) -> RandomStream:
        return RandomStream(self.seed, path)

    # Shared builders

    def build_partition(
        self,
        system: SpinSystem,
        partition: Optional[str] = None,
        k: Optional[int] = None,
        xi: float = 1.0,
        mode: str = GENERAL,
        bound: Optional[int] = None,
    ) -> Tuple[Partition, Dict[str, Any]]:
        """Load ``partition`` from JSON, or construct one with ``k`` blocks."""
        graph = system.graph
        if partition:
            cover = graph.left if mode == BIPARTITE_LEFT else None
            try:
                return Partition.from_json(Path(partition).read_text(), cover), {"source": partition}
            except OSError as e:
                logger.error(f"Failed to read partition file {partition}: {e}")
                raise ConfigurationError(f"Invalid partition file: {partition}") from e
        if k is None:
            raise ConfigurationError("either --partition or --k is required")
        self._warn_lll(graph, k, xi, mode, bound)
        p, stats = construct_partition(graph, k, xi, mode, self.stream(1), bound=bound)
        return p, stats.as_dict()

    def _warn_lll(self, graph: Graph, k: int, xi: float, mode: str, bound: Optional[int]) -> None:
        if mode == BIPARTITE_LEFT:
            delta_left = bound if bound is not None else max((graph.degree(v) for v in graph.left), default=0)
            delta_right = max((graph.degree(v) for v in graph.right), default=0)
            theta = delta_right / delta_left if delta_left else math.inf
            holds = math.isfinite(theta) and bipartite_lll_condition(delta_left, theta, k)
        else:
            holds = lll_condition(graph.max_degree, k, xi)
        if not holds:
            logger.warning(
                f"Local-lemma condition fails for k={k}, xi={xi} ({mode}); construction may exhaust its budget"
            )

    def build_chain(
        self,
        name: str,
        system: SpinSystem,
        partition: Optional[Partition] = None,
        ell: Optional[int] = None,
        M: int = 1,
        eta: float = 1.0,
        epsilon: float = 0.05,
        t0: Optional[int] = None,
        t1: Optional[int] = None,
        c_const: Optional[float] = None,
        mode: str = RESAMPLE_COMPLEMENT,
    ) -> Chain:
        params = None
        if name == "simdownup":
            if partition is None:
                raise ConfigurationError("simdownup needs a partition")
            params = self.simdownup_params(system, partition, M, eta, epsilon, t0, t1, c_const)
        return build_chain(name, system, partition, ell, M, params, mode)

    def simdownup_params(
        self,
        system: SpinSystem,
        partition: Partition,
        M: int,
        eta: float,
        epsilon: float,
        t0: Optional[int] = None,
        t1: Optional[int] = None,
        c_const: Optional[float] = None,
    ) -> SimDownUpParams:
        """Explicit ``--t0/--t1``, or the schedule from the exact pinned mixing time."""
        if t0 is not None and t1 is not None:
            return SimDownUpParams(t0, t1, partition.k - 2 * M, M, eta, partition.k)
        pinned = pinned_mixing_time(system, eta)
        if not math.isfinite(pinned.value):
            raise ConfigurationError("pinned Glauber dynamics does not mix; pass --t0 and --t1")
        t_mix_eta = max(1, math.ceil(pinned.value))
        params = set_simdownup_schedule(t_mix_eta, system.n, epsilon, M, eta, c_const, partition.k)
        if t1 is not None:
            params = SimDownUpParams(params.T0, t1, params.base_level, M, eta, params.k)
        if t0 is not None:
            params = SimDownUpParams(t0, params.T1, params.base_level, M, eta, params.k)
        return params

    def _finish(
        self,
        experiment: str,
        parameters: Dict[str, Any],
        started: datetime,
        clock: float,
        outcome: Dict[str, Any],
        outputs: List[Path],
    ) -> Dict[str, Any]:
        manifest = self.manifests.write_manifest(
            experiment, parameters, self.seed, started, time.perf_counter() - clock, outcome, outputs
        )
        return {"experiment": experiment, "manifest": str(manifest), **outcome}

    # Experiments

    def run_gap(
        self, graph: str, model: str, chain: str = "glauber", pinning: Optional[str] = None, **chain_options: Any
    ) -> Dict[str, Any]:
        started, clock = datetime.now(timezone.utc), time.perf_counter()
        parameters = {"graph": graph, "model": model, "chain": chain, "pinning": pinning, **chain_options}
        system = build_system(graph, model, pinning)
        partition, _ = self._chain_partition(system, chain, chain_options)
        built = self.build_chain(chain, system, partition, **self._chain_kwargs(chain_options))
        matrix = built.transition_matrix()
        summary = spectrum(matrix)
        report = GapReport(
            chain=chain,
            states=matrix.size,
            lambda2=summary.lambda2,
            gap=summary.gap,
            t_rel=summary.t_rel,
            min_eigenvalue=summary.min_eigenvalue,
        )
        logger.info(f"Gap of {chain}: gap={report.gap:.6g}, t_rel={report.t_rel:.6g}")
        path = self.manifests.write_json(f"gap-{chain}.json", report.model_dump())
        return self._finish("gap", parameters, started, clock, report.model_dump(), [path])

    def run_sample(
        self,
        graph: str,
        model: str,
        chain: str = "glauber",
        replicas: int = 1000,
        steps: int = 1,
        pinning: Optional[str] = None,
        **chain_options: Any,
    ) -> Dict[str, Any]:
        """``replicas`` independent runs of ``steps`` transitions from a fixed start.

        Replicas are split into chunks of ``experiments.chunk_size``; chunk ``i``
        draws from ``child(2, i)`` of the run seed, so samples do not depend on
        ``jobs``.
        """
        if replicas < 1 or steps < 0:
            raise ConfigurationError("replicas must be positive and steps non-negative")
        started, clock = datetime.now(timezone.utc), time.perf_counter()
        parameters = {
            "graph": graph, "model": model, "chain": chain, "replicas": replicas,
            "steps": steps, "pinning": pinning, **chain_options,
        }
        system = build_system(graph, model, pinning)
        partition, _ = self._chain_partition(system, chain, chain_options)
        built = self.build_chain(chain, system, partition, **self._chain_kwargs(chain_options))
        start = feasible_start(system)
        samples = self._run_replicas(built, start, replicas, steps)

        outcome: Dict[str, Any] = {"replicas": replicas, "steps": steps, "start": config_to_string(start, system.q)}
        try:
            mu = enumerate_gibbs(system)
            empirical = ExactDistribution.from_samples(samples, tuple(range(system.n)), system.q)
            outcome["tv"] = divergence("tv", empirical, mu)
            outcome["bias_bound"] = tv_estimation_bias(mu.size, replicas)
        except StateCapError:
            logger.warning("State space above the enumeration cap; skipping the exact TV")
        rows = ((r, config_to_string(x, system.q)) for r, x in enumerate(samples))
        csv_path = self.manifests.write_csv(f"samples-{chain}.csv", ["replica", "config"], rows)
        return self._finish("sample", parameters, started, clock, outcome, [csv_path])

    def _run_replicas(self, chain: Chain, start: np.ndarray, replicas: int, steps: int) -> np.ndarray:
        chunk = max(1, self.config.get_int("experiments.chunk_size", 5000))
        jobs_args = [
            (chain, start, min(chunk, replicas - lo), steps, self.seed, (2, i))
            for i, lo in enumerate(range(0, replicas, chunk))
        ]
        logger.info(f"Running {replicas} replicas of {chain.name} in {len(jobs_args)} chunks")
        if self.jobs > 1 and len(jobs_args) > 1:
            with ProcessPoolExecutor(max_workers=self.jobs) as pool:
                parts = list(pool.map(_run_chunk, jobs_args))
        else:
            parts = [_run_chunk(args) for args in jobs_args]
        return np.concatenate(parts, axis=0)

    def run_mix(
        self,
        graph: str,
        model: str,
        chain: str = "glauber",
        epsilon: float = 0.25,
        replicas: int = 1000,
        estimation: str = EXACT,
        monotone: bool = False,
        pinning: Optional[str] = None,
        **chain_options: Any,
    ) -> Dict[str, Any]:
        started, clock = datetime.now(timezone.utc), time.perf_counter()
        parameters = {
            "graph": graph, "model": model, "chain": chain, "epsilon": epsilon, "replicas": replicas,
            "estimation": estimation, "monotone": monotone, "pinning": pinning, **chain_options,
        }
        system = build_system(graph, model, pinning)
        partition, _ = self._chain_partition(system, chain, chain_options)
        built = self.build_chain(chain, system, partition, **self._chain_kwargs(chain_options))
        orders = bipartite_orders(system) if monotone else None
        estimate = estimate_mixing(built, epsilon, replicas, self.stream(3), estimation, orders=orders, progress=True)
        outputs = []
        if estimate.curve:
            rows = ((t, tv) for t, tv in enumerate(estimate.curve))
            outputs.append(self.manifests.write_csv(f"mix-{chain}.csv", ["step", "tv"], rows))
        return self._finish("mix", parameters, started, clock, estimate.to_dict(), outputs)

    def run_partition(
        self, graph: str, k: int, xi: float = 1.0, mode: str = GENERAL, bound: Optional[int] = None
    ) -> Dict[str, Any]:
        started, clock = datetime.now(timezone.utc), time.perf_counter()
        parameters = {"graph": graph, "k": k, "xi": xi, "mode": mode, "bound": bound}
        g = parse_graph_spec(graph)
        self._warn_lll(g, k, xi, mode, bound)
        p, stats = construct_partition(g, k, xi, mode, self.stream(1), bound=bound)
        path = self.manifests.path_for("partition.json")
        path.write_text(p.to_json() + "\n", encoding="utf-8")
        outcome = {"k": p.k, "sizes": list(p.sizes), "stats": stats.as_dict()}
        return self._finish("partition", parameters, started, clock, outcome, [path])

    def run_ci(
        self,
        graph: str,
        model: str,
        coupling: str = "two-spin",
        pairs: int = 10,
        samples: int = 1000,
        target: Optional[float] = None,
        pinning_mode: str = "random",
        max_pinned: int = 2,
        delta: float = 0.05,
    ) -> Dict[str, Any]:
        started, clock = datetime.now(timezone.utc), time.perf_counter()
        parameters = {
            "graph": graph, "model": model, "coupling": coupling, "pairs": pairs, "samples": samples,
            "target": target, "pinning_mode": pinning_mode, "max_pinned": max_pinned, "delta": delta,
        }
        system = build_system(graph, model)
        estimate = estimate_ci(
            system,
            HammingWeight.unit(system.n),
            coupling,
            PinningSpec(pinning_mode, max_pinned),
            pairs,
            samples,
            self.stream(4),
            target,
            delta,
            self.jobs,
        )
        path = self.manifests.write_json(f"ci-{coupling}.json", estimate.to_dict())
        outcome = {
            "value": estimate.value,
            "label": estimate.label,
            "cases": len(estimate.cases),
            "meets_target": estimate.meets_target,
        }
        return self._finish("ci", parameters, started, clock, outcome, [path])

    def run_censor_check(
        self,
        graph: str,
        model: str,
        c_values: Sequence[float] = (1.0, 2.0),
        masks: int = 256,
        orders: str = "bipartite",
    ) -> Dict[str, Any]:
        """Censoring inequality for schedules of ``ceil(c * n)`` updates, one per ``c``.

        Schedules up to ``MAX_EXHAUSTIVE_MASKS`` updates are checked against
        every mask, longer ones against ``masks`` random masks.
        """
        started, clock = datetime.now(timezone.utc), time.perf_counter()
        parameters = {"graph": graph, "model": model, "c_values": list(c_values), "masks": masks, "orders": orders}
        system = build_system(graph, model)
        if orders == "bipartite":
            order_list = bipartite_orders(system)
        elif orders == "identity":
            order_list = [tuple(range(system.q))] * system.n
        else:
            raise ConfigurationError(f"Unknown orders: {orders}", {"known": ["bipartite", "identity"]})
        monotone = check_monotone(system, order_list)
        start = max_state(system, order_list)
        sweep = []
        for i, c in enumerate(c_values):
            length = max(1, math.ceil(c * system.n))
            schedule = random_schedule(system, length, self.stream(5, i, 0))
            mask_list = None
            if length > MAX_EXHAUSTIVE_MASKS:
                mask_list = random_censor_masks(length, masks, self.stream(5, i, 1))
            report = censoring_inequality_check(system, schedule, start, mask_list)
            sweep.append(
                {
                    "c": c,
                    "length": length,
                    "masks_checked": report.masks_checked,
                    "violations": report.violations,
                    "tv_full": report.tv_full,
                    "worst_margin": report.worst_margin,
                    "holds": report.holds,
                }
            )
        columns = ("c", "length", "masks_checked", "violations", "tv_full", "worst_margin")
        rows = (tuple(s[key] for key in columns) for s in sweep)
        path = self.manifests.write_csv(
            "censor-check.csv", ["c", "length", "masks", "violations", "tv_full", "worst_margin"], rows
        )
        outcome = {
            "monotone": monotone.monotone,
            "violation": monotone.violation,
            "holds": all(s["holds"] for s in sweep),
            "sweep": sweep,
        }
        return self._finish("censor-check", parameters, started, clock, outcome, [path])

    # Option plumbing shared by gap / sample / mix

    def _chain_partition(
        self, system: SpinSystem, chain: str, options: Dict[str, Any]
    ) -> Tuple[Optional[Partition], Dict[str, Any]]:
        if chain == "glauber":
            return None, {}
        mode = BIPARTITE_LEFT if chain == "bipartite-block" else options.get("partition_mode", GENERAL)
        k = options.get("k")
        if k is None and not options.get("partition"):
            M = options.get("M", 1)
            if mode == BIPARTITE_LEFT:
                graph = system.graph
                delta_left = max((graph.degree(v) for v in graph.left), default=1)
                delta_right = max((graph.degree(v) for v in graph.right), default=0)
                k = bipartite_partition_parameters(delta_right / max(delta_left, 1), M)
            else:
                k = partition_parameters(M, options.get("eta", 1.0)).k
        return self.build_partition(system, options.get("partition"), k, options.get("xi", 1.0), mode)

    @staticmethod
    def _chain_kwargs(options: Dict[str, Any]) -> Dict[str, Any]:
        keys = ("ell", "M", "eta", "epsilon", "t0", "t1", "c_const", "mode")
        return {key: options[key] for key in keys if options.get(key) is not None}
