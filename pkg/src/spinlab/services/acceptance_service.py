"""
Acceptance suites: exact small-instance numerics and property checks.

Each criterion is a method that records named comparisons ``value <= limit``
on a ``_Checks`` object.  Injecting a fault into criterion ``N`` shifts every
limit of that criterion to ``-inf`` so each of its comparisons fails.
"""
import math
import time
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.exceptions import ConfigurationError, SpinLabError
from ..core.graph import Graph
from ..core.models import (
    alpha_star,
    lambda_critical,
    make_bipartite_hardcore,
    make_hardcore,
    make_list_coloring,
    make_two_spin,
)
from ..core.system import SPIN_MINUS, SPIN_PLUS, SpinSystem, condition
from ..coupling.estimate import coupling_validity, empirical_disagreement
from ..coupling.recursive import get_coupler, sample_coupling
from ..coupling.saw import build_saw_tree, coupling_influence_bound, saw_root_marginal
from ..dynamics.censoring import (
    bipartite_orders,
    censoring_inequality_check,
    check_monotone,
    max_state,
    random_schedule,
)
from ..dynamics.chains import SimDownUpSampler
from ..dynamics.downup import comparison_bound, feasible_start, local_to_global_bound
from ..dynamics.rng import RandomStream
from ..dynamics.simdownup import set_simdownup_schedule
from ..models.schemas import AcceptanceReport, CriterionResult
from ..oracle.exact import (
    ExactDistribution,
    divergence,
    enumerate_gibbs,
    partition_function,
    tv_estimation_bias,
    vertex_marginal,
)
from ..oracle.matrices import block_matrix, glauber_matrix, pinned_mixing_time, relaxation_time, worst_tv
from ..partition.partition import (
    BIPARTITE_LEFT,
    GENERAL,
    Partition,
    construct_partition,
    verify_degree_partition,
    verify_left_partition,
)
from ..utils.config import get_config
from ..utils.logger import get_logger

logger = get_logger(__name__)

SUITES: Dict[str, Tuple[int, ...]] = {
    "oracle": (1, 2, 12),
    "saw": (3,),
    "coupling": (4, 5, 10),
    "chains": (6, 7, 11),
    "partition": (8,),
    "censoring": (9,),
    "all": tuple(range(1, 13)),
}


def acceptance_corpus() -> List[Tuple[str, SpinSystem]]:
    """Twelve small systems (n <= 8) covering every model family."""
    return [
        ("hardcore P5 l=1", make_hardcore(Graph.path(5), 1.0)),
        ("hardcore C6 l=2", make_hardcore(Graph.cycle(6), 2.0)),
        ("hardcore star3 l=0.5", make_hardcore(Graph.star(3), 0.5)),
        ("hardcore K4 l=1", make_hardcore(Graph.complete(4), 1.0)),
        ("ferro C5", make_two_spin(Graph.cycle(5), 2.0, 2.0, 0.8)),
        ("antiferro P6", make_two_spin(Graph.path(6), 0.5, 0.5, 1.2)),
        ("ferro K33", make_two_spin(Graph.complete_bipartite(3, 3), 1.5, 1.5, 1.0)),
        ("antiferro C7", make_two_spin(Graph.cycle(7), 0.3, 0.8, 1.5)),
        ("coloring C4 q=3", make_list_coloring(Graph.cycle(4), [range(3)] * 4)),
        ("list coloring P4", make_list_coloring(Graph.path(4), [[0, 1], [0, 1, 2], [1, 2], [0, 2]])),
        ("coloring star3 q=3", make_list_coloring(Graph.star(3), [range(3)] * 4)),
        ("bipartite hardcore K23", make_bipartite_hardcore(Graph.complete_bipartite(2, 3), 1.0)),
    ]


def random_pinning(system: SpinSystem, stream: RandomStream) -> Dict[int, int]:
    """Restriction of a Gibbs sample to a random set of free vertices, leaving one free."""
    config = enumerate_gibbs(system).sample(stream, 1)[0]
    free = np.asarray(system.free_vertices, dtype=np.int64)
    if len(free) < 2:
        return {}
    size = int(stream.integers(0, len(free)))
    chosen = stream.choice(free, size=size, replace=False)
    return {int(u): int(config[u]) for u in chosen}


def _bipartite_graph(n: int, edges: Sequence[Tuple[int, int]]) -> Graph:
    return Graph.from_edges(n, edges, ([v for v in range(n) if v % 2 == 0], [v for v in range(n) if v % 2 == 1]))


class _Checks:
    def __init__(self, shift: float = 0.0):
        self.shift = shift
        self.failures: List[str] = []
        self.metrics: Dict[str, Any] = {}

    def at_most(self, label: str, value: float, limit: float) -> bool:
        value = float(value)
        self.metrics[label] = value
        ok = value <= limit + self.shift
        if not ok:
            self.failures.append(f"{label}: {value:.6g} > {limit + self.shift:.6g}")
        return ok

    def close(self, label: str, value: float, expected: float, tol: float) -> bool:
        return self.at_most(f"{label} error", abs(float(value) - expected), tol)

    def holds(self, label: str, condition: bool) -> bool:
        return self.at_most(label, 0.0 if condition else 1.0, 0.0)


class AcceptanceService:
    """Runs the acceptance criteria by suite."""

    def __init__(self, seed: int = 0, quick: bool = False, inject_fault: Optional[int] = None):
        """Initialize the acceptance service."""
        if inject_fault is not None and inject_fault not in SUITES["all"]:
            raise ConfigurationError("fault injection needs a criterion number in 1..12", {"criterion": inject_fault})
        self.seed = seed
        self.quick = quick
        self.inject_fault = inject_fault
        self.sigma_slack = get_config().get_float("coupling.sigma_slack", 4.0)
        self.criteria: Dict[int, Tuple[str, Callable[[_Checks, RandomStream], None]]] = {
            1: ("oracle correctness", self._oracle_correctness),
            2: ("stationarity and reversibility", self._reversibility),
            3: ("SAW root marginals", self._saw_marginals),
            4: ("coupling disagreement vs tree influence", self._influence_bound),
            5: ("coupling marginal validity", self._coupling_validity),
            6: ("local-to-global and comparison", self._local_to_global),
            7: ("SimDownUp accuracy", self._simdownup_accuracy),
            8: ("partition construction", self._partition_construction),
            9: ("censoring inequality", self._censoring),
            10: ("list-coloring coupling bound", self._coloring_bound),
            11: ("Glauber gap scaling on cycles", self._gap_scaling),
            12: ("model constants", self._constants),
        }

    def _scaled(self, full: int, quick: int) -> int:
        return quick if self.quick else full

    def run(self, suite: str) -> AcceptanceReport:
        if not suite or suite not in SUITES:
            raise ConfigurationError(f"Unknown acceptance suite: {suite!r}", {"known": sorted(SUITES)})
        logger.info(f"Running acceptance suite {suite} (quick={self.quick})")
        results = [self.run_criterion(n) for n in SUITES[suite]]
        report = AcceptanceReport(suite=suite, quick=self.quick, passed=all(r.passed for r in results), results=results)
        for r in report.failed():
            logger.error(f"Criterion {r.criterion} ({r.name}) failed: {r.detail}")
        return report

    def run_criterion(self, n: int) -> CriterionResult:
        name, check = self.criteria[n]
        checks = _Checks(-math.inf if n == self.inject_fault else 0.0)
        started = time.perf_counter()
        try:
            check(checks, RandomStream(self.seed, (100 + n,)))
        except (SpinLabError, ArithmeticError) as e:
            logger.error(f"Criterion {n} ({name}) raised: {e}")
            checks.failures.append(f"error: {e}")
        elapsed = time.perf_counter() - started
        passed = not checks.failures
        logger.info(f"Criterion {n} ({name}): {'pass' if passed else 'FAIL'} in {elapsed:.2f}s")
        return CriterionResult(
            criterion=n,
            name=name,
            passed=passed,
            detail="; ".join(checks.failures) or "ok",
            runtime_seconds=elapsed,
            metrics=checks.metrics,
        )

    # Criteria

    def _oracle_correctness(self, checks: _Checks, stream: RandomStream) -> None:
        p3 = make_hardcore(Graph.path(3), 1.0)
        checks.close("Z(P3)", partition_function(p3), 5.0, 1e-12)
        checks.close("mu(P3 middle=+)", vertex_marginal(p3, 1)[SPIN_PLUS], 0.2, 1e-12)
        checks.close("Z(K2)", partition_function(make_hardcore(Graph.complete(2), 1.0)), 3.0, 1e-12)

    def _reversibility(self, checks: _Checks, stream: RandomStream) -> None:
        worst_balance, lowest = 0.0, math.inf
        for name, system in acceptance_corpus():
            blocks = [range(0, system.n, 2), range(1, system.n, 2)]
            for matrix in (glauber_matrix(system), block_matrix(system, blocks)):
                worst_balance = max(worst_balance, matrix.detailed_balance_violation())
                lowest = min(lowest, float(matrix.eigenvalues()[-1]))
        checks.at_most("detailed balance violation", worst_balance, 1e-12)
        checks.at_most("negated min eigenvalue", -lowest, 1e-10)

    def _saw_marginals(self, checks: _Checks, stream: RandomStream) -> None:
        count = self._scaled(20, 5)
        worst, roots = 0.0, 0
        for i, (name, system) in enumerate(acceptance_corpus()):
            if system.q != 2:
                continue
            pinnings = [{}] + [random_pinning(system, stream.child(i, j)) for j in range(count)]
            for tau in pinnings:
                conditioned = condition(system, tau)
                for r in conditioned.free_vertices:
                    tree = build_saw_tree(conditioned, r)
                    error = np.abs(saw_root_marginal(tree) - vertex_marginal(conditioned, r)).max()
                    worst = max(worst, float(error))
                    roots += 1
        checks.metrics["roots checked"] = roots
        checks.at_most("SAW marginal error", worst, 1e-10)

    def _influence_bound(self, checks: _Checks, stream: RandomStream) -> None:
        samples = self._scaled(100000, 5000)
        tree7 = Graph.from_edges(7, [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5), (2, 6)])
        coupler = get_coupler("two-spin")
        j = 0
        for gname, graph in (("tree7", tree7), ("C6", Graph.cycle(6))):
            for factor in (0.5, 1.0):
                system = make_hardcore(graph, factor * lambda_critical(3))
                bound = coupling_influence_bound(system, {}, 0)
                xs, ys = sample_coupling(coupler, system, {}, 0, SPIN_MINUS, SPIN_PLUS, samples, stream.child(j))
                j += 1
                freq, sigma = empirical_disagreement(xs, ys)
                limit = np.array([bound[u] for u in range(system.n)]) + self.sigma_slack * sigma
                checks.at_most(f"{gname} l={factor}*l_c disagreement excess", float((freq - limit).max()), 1e-12)

    def _coupling_validity(self, checks: _Checks, stream: RandomStream) -> None:
        samples = self._scaled(100000, 5000)
        cases = [
            ("hardcore C6", "two-spin", make_hardcore(Graph.cycle(6), 1.0), 0, SPIN_MINUS, SPIN_PLUS),
            ("antiferro P6", "two-spin", make_two_spin(Graph.path(6), 0.5, 0.5, 1.2), 2, SPIN_MINUS, SPIN_PLUS),
            ("coloring C4", "coloring", make_list_coloring(Graph.cycle(4), [range(3)] * 4), 0, 0, 1),
            (
                "list coloring P4",
                "coloring",
                make_list_coloring(Graph.path(4), [[0, 1], [0, 1, 2], [1, 2], [0, 2]]),
                1,
                0,
                2,
            ),
        ]
        for i, (name, coupling, system, v, a, b) in enumerate(cases):
            x_result, y_result = coupling_validity(coupling, system, {}, v, a, b, samples, stream.child(i))
            checks.holds(f"{name} X side valid", x_result.passed)
            checks.holds(f"{name} Y side valid", y_result.passed)
        system = make_hardcore(Graph.cycle(6), 1.0)
        x_result, y_result = coupling_validity(
            "swapped", system, {}, 0, SPIN_MINUS, SPIN_PLUS, self._scaled(10000, 1000), stream.child(len(cases))
        )
        checks.holds("swapped coupling rejected", not (x_result.passed and y_result.passed))

    def _local_to_global(self, checks: _Checks, stream: RandomStream) -> None:
        system = make_hardcore(Graph.path(6), 1.0)
        p = Partition.from_blocks([[0, 3], [1, 4], [2, 5]])
        for ell in (1, 2):
            l2g = local_to_global_bound(system, p, ell)
            checks.at_most(f"ell={ell} t_rel(k<->ell) over product", l2g.t_rel, l2g.bound * (1 + 1e-8) + 1e-8)
            comparison = comparison_bound(system, p, ell, 0.5)
            checks.at_most(
                f"ell={ell} t_rel(GD) over comparison bound",
                comparison.t_rel_glauber,
                comparison.bound * (1 + 1e-8) + 1e-8,
            )

    def _simdownup_accuracy(self, checks: _Checks, stream: RandomStream) -> None:
        epsilon = 0.05
        samples = self._scaled(100000, 10000)
        chunk = max(1, get_config().get_int("experiments.chunk_size", 5000))
        system = make_hardcore(Graph.path(6), 1.0)
        p = Partition.from_blocks([[0, 3], [1, 4], [2, 5]])
        t_mix_eta = max(1, math.ceil(pinned_mixing_time(system, 1.0).value))
        params = set_simdownup_schedule(t_mix_eta, system.n, epsilon, 1, 1.0, k=3)
        sampler = SimDownUpSampler(system, p, params)
        checks.metrics["schedule"] = params.to_dict()
        checks.at_most("exact worst-start TV", worst_tv(sampler.transition_matrix(), 1), epsilon)

        mu = enumerate_gibbs(system)
        start = feasible_start(system)
        parts = []
        for c, lo in enumerate(range(0, samples, chunk)):
            configs = np.tile(start, (min(chunk, samples - lo), 1))
            parts.append(sampler.run_batch(configs, 1, stream.child(c)))
        empirical = ExactDistribution.from_samples(np.concatenate(parts), tuple(range(system.n)), system.q)
        bias = tv_estimation_bias(mu.size, samples)
        checks.at_most("empirical TV", divergence("tv", empirical, mu), epsilon + bias)

    def _partition_construction(self, checks: _Checks, stream: RandomStream) -> None:
        runs = self._scaled(100, 10)
        graph = Graph.random_regular(200, 32, seed=self.seed)
        rounds, failures = [], 0
        for s in range(runs):
            p, stats = construct_partition(graph, 4, 1.0, GENERAL, stream.child(0, s))
            failures += not verify_degree_partition(graph, p, 1.0).ok
            rounds.append(stats.total_rounds)
        checks.at_most("unverified partitions", failures, 0)
        checks.at_most("mean rounds", float(np.mean(rounds)), 10.0)

        bipartite = Graph.random_bipartite(60, 8, 20, seed=self.seed)
        p, _ = construct_partition(bipartite, 6, 1.0, BIPARTITE_LEFT, stream.child(1), bound=8)
        checks.holds("left partition verifies", verify_left_partition(bipartite, p, 8).ok)

    def _censoring(self, checks: _Checks, stream: RandomStream) -> None:
        instances = [
            ("K23 l=1", make_bipartite_hardcore(Graph.complete_bipartite(2, 3), 1.0)),
            ("C6 l=1.5", make_bipartite_hardcore(_bipartite_graph(6, [(i, (i + 1) % 6) for i in range(6)]), 1.5)),
            ("P7 l=0.8", make_bipartite_hardcore(_bipartite_graph(7, [(i, i + 1) for i in range(6)]), 0.8)),
        ]
        for i, (name, system) in enumerate(instances):
            orders = bipartite_orders(system)
            checks.holds(f"{name} monotone", check_monotone(system, orders).monotone)
            schedule = random_schedule(system, 10, stream.child(i))
            report = censoring_inequality_check(system, schedule, max_state(system, orders))
            checks.at_most(f"{name} censoring violations", report.violations, 0)

        odd = make_hardcore(Graph.cycle(5), 1.0)
        alternating = [(0, 1) if v % 2 == 0 else (1, 0) for v in range(5)]
        checks.holds("odd cycle violates monotonicity", not check_monotone(odd, alternating).monotone)

    def _coloring_bound(self, checks: _Checks, stream: RandomStream) -> None:
        samples = self._scaled(10000, 1000)
        system = make_list_coloring(Graph.cycle(6), [range(6)] * 6)
        delta = 6 / 2 - alpha_star()
        bound = 9 / (2 * delta) + 1
        xs, ys = sample_coupling(get_coupler("coloring"), system, {}, 0, 0, 1, samples, stream)
        distances = (xs != ys).sum(axis=1).astype(float)
        sigma = float(distances.std(ddof=1)) / math.sqrt(samples)
        checks.metrics["bound"] = bound
        checks.at_most("mean Hamming distance", float(distances.mean()), bound + self.sigma_slack * sigma)

    def _gap_scaling(self, checks: _Checks, stream: RandomStream) -> None:
        lam = 0.5 * lambda_critical(3)
        per_vertex = {}
        for n in range(4, 13):
            system = make_hardcore(Graph.cycle(n), lam)
            per_vertex[n] = relaxation_time(glauber_matrix(system)) / n
        checks.metrics["t_rel / n"] = per_vertex
        checks.at_most("t_rel/n band ratio", max(per_vertex.values()) / min(per_vertex.values()), 3.0)

    def _constants(self, checks: _Checks, stream: RandomStream) -> None:
        checks.close("lambda_critical(3)", lambda_critical(3), 4.0, 0.0)
        alpha = alpha_star()
        checks.at_most("alpha_star residual", abs(alpha - math.exp(1.0 / alpha)), 1e-12)
        checks.holds("alpha_star in (1.76, 1.77)", 1.76 < alpha < 1.77)


def format_report(report: AcceptanceReport) -> str:
    """Plain-text per-criterion table."""
    lines = [f"{'#':>3}  {'criterion':<42} {'result':<6} {'seconds':>8}  detail"]
    for r in report.results:
        lines.append(
            f"{r.criterion:>3}  {r.name:<42} {'pass' if r.passed else 'FAIL':<6} {r.runtime_seconds:>8.2f}  {r.detail}"
        )
    lines.append(f"suite {report.suite}: {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines)
