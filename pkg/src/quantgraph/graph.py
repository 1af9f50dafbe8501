"""Per-node fits across all nodes and assembly of the undirected graph."""

from __future__ import annotations

import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, NeighborhoodPosterior, PriorConfig, QuantileGrid, build_node_problem
from .mcmc import run_chain
from .vb import run_vb


@dataclass
class Graph:
    """Symmetric adjacency with zero diagonal plus per-edge sign labels.

    signs maps each present edge, keyed by the sorted 1-based node pair, to
    one of 'positive', 'negative', 'inconclusive'.
    """

    adjacency: np.ndarray
    signs: dict
    node_names: list[str]
    threshold: float = 0.5

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be square")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency diagonal must be zero")
        if set(self.signs) != set(self.edges()):
            raise ValueError("signs must be defined exactly for the edges present")

    @property
    def p(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        """Sorted list of 1-based edge pairs (i < j)."""
        ii, jj = np.nonzero(np.triu(self.adjacency, k=1))
        return [(int(i) + 1, int(j) + 1) for i, j in zip(ii, jj)]


@dataclass
class FitReport:
    """Everything one fit run produced: the per-node posteriors, the graph,
    the engine and configuration used, and the total wall time."""

    posteriors: list[NeighborhoodPosterior]
    graph: Graph
    engine: str
    total_wall_time: float
    config: dict = field(default_factory=dict)


class NodeFitError(RuntimeError):
    """Raised after all nodes have been attempted when any of them failed."""

    def __init__(self, failures, posteriors):
        self.failures = failures
        self.posteriors = posteriors
        detail = "; ".join(f"node {k}: {msg}" for k, msg in failures)
        super().__init__(f"{len(failures)} node fit(s) failed: {detail}")


def node_rng_key(seed: int, name: str) -> list[int]:
    """Stable per-node stream key: the master seed plus a hash of the column
    name, so relabeling columns relabels streams with them."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return [int(seed), int.from_bytes(digest[:8], "little")]


def _fit_one(d: Dataset, k: int, grid: QuantileGrid, priors: PriorConfig,
             engine: str, cfg) -> NeighborhoodPosterior:
    problem = build_node_problem(d, k)
    if engine == "mcmc":
        rng = np.random.default_rng(node_rng_key(cfg.seed, d.column_names[k - 1]))
        return run_chain(problem, grid, priors, cfg, rng=rng)
    if engine == "vb":
        return run_vb(problem, grid, priors, cfg)
    raise ValueError(f"unknown engine {engine!r}; expected 'mcmc' or 'vb'")


def fit_all_nodes(d: Dataset, grid: QuantileGrid, priors: PriorConfig,
                  engine: str, cfg, jobs: int = 1) -> list[NeighborhoodPosterior]:
    """Fit every node's neighborhood with the chosen engine.

    Node fits are independent; with jobs > 1 they run concurrently, and the
    per-node rng streams make the results identical either way. Individual
    failures do not abort the remaining nodes: they are collected and raised
    together afterwards.
    """
    if not d.standardized:
        raise ValueError("dataset must be standardized before fitting")
    if engine not in ("mcmc", "vb"):
        raise ValueError(f"unknown engine {engine!r}; expected 'mcmc' or 'vb'")
    results: dict[int, NeighborhoodPosterior] = {}
    failures: list[tuple[int, str]] = []

    def attempt(k: int):
        try:
            results[k] = _fit_one(d, k, grid, priors, engine, cfg)
        except Exception as exc:   # noqa: BLE001 - reported per node
            failures.append((k, str(exc)))

    if jobs <= 1:
        for k in range(1, d.p + 1):
            attempt(k)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(attempt, range(1, d.p + 1)))
    posteriors = [results[k] for k in sorted(results)]
    if failures:
        raise NodeFitError(sorted(failures), posteriors)
    return posteriors


def assemble_graph(posteriors: list[NeighborhoodPosterior], threshold: float = 0.5,
                   node_names: list[str] | None = None) -> Graph:
    """OR-rule graph: an undirected edge is present when either node's fit
    includes the other with probability strictly above the threshold."""
    posteriors = sorted(posteriors, key=lambda r: r.node_index)
    p = len(posteriors)
    expected = set(range(1, p + 1))
    if {r.node_index for r in posteriors} != expected:
        raise ValueError("need exactly one posterior per node 1..P")
    directed = np.zeros((p, p), dtype=np.int64)
    for r in posteriors:
        if set(r.predictor_map) != expected - {r.node_index}:
            raise ValueError(f"node {r.node_index}: predictor map is inconsistent "
                             "with the node set")
        for pos, j in enumerate(r.predictor_map):
            if r.incl_prob[pos] > threshold:
                directed[j - 1, r.node_index - 1] = 1
    adjacency = ((directed + directed.T) > 0).astype(np.int64)
    if node_names is None:
        node_names = [f"V{k}" for k in range(1, p + 1)]
    ii, jj = np.nonzero(np.triu(adjacency, k=1))
    edges = [(int(a) + 1, int(b) + 1) for a, b in zip(ii, jj)]
    signs = _signs_for_edges(posteriors, edges, threshold)
    return Graph(adjacency=adjacency, signs=signs, node_names=list(node_names),
                 threshold=threshold)


def edge_signs(posteriors: list[NeighborhoodPosterior], graph: Graph) -> dict:
    """Label each edge by the coefficient means of the direction(s) that
    selected it: positive if every available mean across quantiles is > 0,
    negative if all are < 0, inconclusive otherwise."""
    return _signs_for_edges(posteriors, graph.edges(), graph.threshold)


def _signs_for_edges(posteriors, edges, threshold):
    by_node = {r.node_index: r for r in posteriors}
    signs = {}
    for (i, j) in edges:
        means = []
        for target, other in ((i, j), (j, i)):
            r = by_node[target]
            pos = r.predictor_map.index(other)
            if r.incl_prob[pos] > threshold:
                means.extend(r.coef_mean[:, pos + 1])
        means = np.array(means)
        if means.size and np.all(means > 0):
            signs[(i, j)] = "positive"
        elif means.size and np.all(means < 0):
            signs[(i, j)] = "negative"
        else:
            signs[(i, j)] = "inconclusive"
    return signs
