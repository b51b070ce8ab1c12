"""Synthetic benchmark generator: pathway graphs, covariance, datasets.

The generator builds a "true" covariate graph out of randomly populated,
possibly overlapping pathways (each pathway is connected by a random spanning
tree plus sprinkled extra edges), derives a diagonally dominant precision-like
matrix A from the graph, and uses the rescaled inverse of A as the predictor
covariance.  Predictors are partially correlated only along true-graph edges.
Five scenarios control how the working graph handed to the estimator relates
to the truth, from exactly right to completely scrambled.

All randomness flows through counter-based generators with named streams
(graph/edge-signs/splits/working-graph), so each component is independently
reproducible from the scenario seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .data import Dataset
from .exceptions import DataError
from .graph import SparseGraph

# Named sub-streams of a scenario seed.
_STREAM_GRAPH = 0
_STREAM_SIGNS = 1
_STREAM_SPLITS = 2
_STREAM_WORKING = 3

_MAX_DENSE_P = 10_000

_PARTIAL_CORR_CUTOFF = 0.5


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one named sub-stream of a seed."""
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(stream,)))
    )


@dataclass(frozen=True)
class ScenarioSpec:
    """Full description of one synthetic experiment.

    ``independent_tail`` appends that many extra predictors that are
    independent standard normal and carry no graph structure (used to reach
    very large p without a dense p-by-p covariance).  ``nb_dispersion`` is
    the negative-binomial dispersion of the pathway sizes (mean
    ``mu_path``, variance ``mu_path + mu_path^2 / nb_dispersion``).
    """

    p: int
    n: int
    q: int
    g_pathways: int
    mu_path: float = 30.0
    p1: float = 0.05
    scenario: int = 1
    independent_tail: int = 0
    seed: int = 0
    nb_dispersion: float = 10.0

    def __post_init__(self):
        if self.scenario not in (1, 2, 3, 4, 5):
            raise ValueError("scenario must be in 1..5")
        if not 0 <= self.p1 <= 1:
            raise ValueError("p1 must be in [0, 1]")
        if self.mu_path < 2:
            raise ValueError("mu_path must be >= 2")
        if not 0 < self.q <= self.p:
            raise ValueError("require 0 < q <= p")
        if not 0 <= self.independent_tail <= self.p - self.q:
            raise ValueError("independent_tail must leave room for q structured variables")
        if self.nb_dispersion <= 0:
            raise ValueError("nb_dispersion must be positive")

    @property
    def structured_p(self) -> int:
        return self.p - self.independent_tail


@dataclass
class CovarianceModel:
    """Truth pieces produced by :func:`build_covariance`.

    ``sigma_chol`` is the lower Cholesky factor of the unit-diagonal
    structured-block covariance (None when the block is empty or edgeless,
    meaning identity).  ``s_values`` are the per-edge 0/1 signs and
    ``partial_corr`` the per-edge partial correlations of the realized
    unit-diagonal covariance, both aligned with ``g0.edges``.
    """

    g0: SparseGraph
    structured_p: int
    sigma_chol: Optional[np.ndarray]
    s_values: np.ndarray
    partial_corr: np.ndarray


@dataclass
class SyntheticTruth:
    """Everything needed to sample data and score selection accuracy."""

    beta0: np.ndarray
    g0: SparseGraph
    sigma_chol: Optional[np.ndarray]
    working_graph: SparseGraph
    structured_p: int
    s_values: np.ndarray
    partial_corr: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.beta0)


def _spanning_tree_edges(members: np.ndarray, rng: np.random.Generator) -> list:
    """Random tree on ``members`` grown by repeatedly wiring an unconnected
    node to a uniformly chosen connected one."""
    m = members.shape[0]
    if m < 2:
        return []
    order = rng.permutation(m)
    connected = [order[0], order[1]]
    edges = [(members[order[0]], members[order[1]])]
    unconnected = list(order[2:])
    while unconnected:
        pick = int(rng.integers(len(unconnected)))
        node = unconnected.pop(pick)
        anchor = connected[int(rng.integers(len(connected)))]
        edges.append((members[anchor], members[node]))
        connected.append(node)
    return edges


def generate_pathway_graph(spec: ScenarioSpec) -> SparseGraph:
    """True covariate graph built from overlapping random pathways.

    The first pathway is exactly the important variables; remaining pathway
    sizes are negative binomial with mean ``mu_path`` (floored at 2) and
    members are drawn uniformly.  Each pathway is wired as a random spanning
    tree, then every absent within-pathway pair gains an edge independently
    with probability ``p1``.  For scenarios 2 and 4 the non-first pathways
    draw members from the unimportant variables only, so no edge crosses
    between important and unimportant variables.
    """
    rng = stream_rng(spec.seed, _STREAM_GRAPH)
    p_s = spec.structured_p
    q = spec.q
    if spec.scenario in (2, 4):
        pool = np.arange(q, p_s)
    else:
        pool = np.arange(p_s)

    nb_n = spec.nb_dispersion
    nb_p = nb_n / (nb_n + spec.mu_path)

    edge_set = set()

    def add_pathway(members: np.ndarray):
        for j, k in _spanning_tree_edges(members, rng):
            edge_set.add((min(j, k), max(j, k)))
        m = members.shape[0]
        if m >= 2 and spec.p1 > 0:
            iu, ku = np.triu_indices(m, k=1)
            hits = rng.random(iu.shape[0]) < spec.p1
            for a, b in zip(members[iu[hits]], members[ku[hits]]):
                edge_set.add((min(a, b), max(a, b)))

    add_pathway(np.arange(q))
    for _ in range(max(spec.g_pathways - 1, 0)):
        size = max(2, int(rng.negative_binomial(nb_n, nb_p)))
        size = min(size, pool.shape[0])
        if size < 2:
            continue
        members = rng.choice(pool, size=size, replace=False)
        add_pathway(members)

    if edge_set:
        edges = np.array(sorted(edge_set), dtype=np.int64)
    else:
        edges = np.empty((0, 2), dtype=np.int64)
    return SparseGraph(p=spec.p, edges=edges)


def build_covariance(
    g0: SparseGraph, q: int, seed: int, structured_p: Optional[int] = None
) -> CovarianceModel:
    """Covariance of the structured predictors from the true graph.

    Starts from ``A = I``; each true edge (j, k) gets
    ``A_jk = -S_jk / (max(D_j, D_k) * 1.1 + 0.1)`` where ``S_jk`` is 1 when
    both endpoints are important and Bernoulli(1/2) otherwise.  The
    covariance is ``A^{-1}`` rescaled to unit diagonal; by construction A is
    strictly diagonally dominant, hence positive definite, and two predictors
    are partially correlated only if they share a true edge.

    The per-edge partial correlation of the unit-diagonal covariance equals
    ``-A_jk / sqrt(A_jj A_kk) = -A_jk`` (inverting the diagonal rescaling
    maps the precision matrix to ``D^{1/2} A D^{1/2}``, which leaves the
    normalized off-diagonals untouched).
    """
    p_s = g0.p if structured_p is None else structured_p
    if p_s > _MAX_DENSE_P:
        raise DataError(
            f"dense covariance construction capped at {_MAX_DENSE_P} "
            f"structured variables (got {p_s}); use an independent tail"
        )
    edges = g0.edges
    if edges.size and edges.max() >= p_s:
        raise DataError("graph edges must lie inside the structured block")

    rng = stream_rng(seed, _STREAM_SIGNS)
    m = edges.shape[0]
    s_values = np.ones(m, dtype=np.int64)
    if m:
        js, ks = edges[:, 0], edges[:, 1]
        non_important = ~((js < q) & (ks < q))
        s_values[non_important] = rng.integers(0, 2, size=int(non_important.sum()))
        deg = g0.degrees
        a_off = -s_values / (np.maximum(deg[js], deg[ks]) * 1.1 + 0.1)
        partial_corr = -a_off
    else:
        a_off = np.empty(0)
        partial_corr = np.empty(0)

    if m == 0 or p_s == 0:
        return CovarianceModel(
            g0=g0,
            structured_p=p_s,
            sigma_chol=None,
            s_values=s_values,
            partial_corr=partial_corr,
        )

    a = np.eye(p_s)
    a[edges[:, 0], edges[:, 1]] = a_off
    a[edges[:, 1], edges[:, 0]] = a_off
    sigma = np.linalg.inv(a)
    del a
    d = np.sqrt(np.diag(sigma))
    sigma /= d[:, None]
    sigma /= d[None, :]
    np.fill_diagonal(sigma, 1.0)
    chol = np.linalg.cholesky(sigma)
    return CovarianceModel(
        g0=g0,
        structured_p=p_s,
        sigma_chol=chol,
        s_values=s_values,
        partial_corr=partial_corr,
    )


def _random_graph_same_size(p: int, m: int, rng: np.random.Generator) -> SparseGraph:
    """Uniformly random simple graph on p nodes with exactly m edges."""
    total = p * (p - 1) // 2
    if m > total:
        raise ValueError("more edges requested than pairs available")
    if m > total // 2:
        codes = rng.permutation(total)[:m].astype(np.int64)
    else:
        # Rejection sampling: each accepted code is uniform over the
        # remaining pairs, so the m-subset is uniform.
        chosen: set = set()
        while len(chosen) < m:
            for v in rng.integers(0, total, size=2 * (m - len(chosen)) + 8):
                chosen.add(int(v))
                if len(chosen) == m:
                    break
        codes = np.sort(np.fromiter(chosen, dtype=np.int64, count=m))
    # Decode pair codes laid out row-major over the strict upper triangle.
    js = (
        p
        - 2
        - np.floor(
            np.sqrt(-8.0 * codes + 4.0 * p * (p - 1) - 7.0) / 2.0 - 0.5
        ).astype(np.int64)
    )
    ks = codes + js + 1 - (p * (p - 1) - (p - js) * (p - js - 1)) // 2
    return SparseGraph.from_edge_array(p, np.column_stack([js, ks]))


def derive_working_graph(
    cov: CovarianceModel, scenario: int, seed: int, p: Optional[int] = None
) -> SparseGraph:
    """Working graph handed to the estimator under each scenario.

    1, 2: the true graph; 3, 4: a uniformly random graph with the same number
    of edges; 5: the true edges whose partial correlation exceeds 0.5.
    """
    p = cov.g0.p if p is None else p
    if scenario in (1, 2):
        return cov.g0
    if scenario in (3, 4):
        rng = stream_rng(seed, _STREAM_WORKING)
        return _random_graph_same_size(p, cov.g0.n_edges, rng)
    if scenario == 5:
        keep = cov.partial_corr > _PARTIAL_CORR_CUTOFF
        return SparseGraph(p=p, edges=cov.g0.edges[keep])
    raise ValueError("scenario must be in 1..5")


def generate_truth(spec: ScenarioSpec) -> SyntheticTruth:
    """Compose graph, covariance, and working graph for one scenario."""
    g0 = generate_pathway_graph(spec)
    cov = build_covariance(g0, spec.q, spec.seed, structured_p=spec.structured_p)
    working = derive_working_graph(cov, spec.scenario, spec.seed, p=spec.p)
    beta0 = np.zeros(spec.p)
    beta0[: spec.q] = 1.0
    return SyntheticTruth(
        beta0=beta0,
        g0=g0,
        sigma_chol=cov.sigma_chol,
        working_graph=working,
        structured_p=cov.structured_p,
        s_values=cov.s_values,
        partial_corr=cov.partial_corr,
    )


@dataclass
class SimulatedSplits:
    train: Dataset
    valid: Dataset
    test: Dataset


def default_split_seed(scenario_seed: int) -> int:
    """Split seed derived from the scenario seed (shared by CLI and runner)."""
    return int(
        np.random.SeedSequence(scenario_seed, spawn_key=(_STREAM_SPLITS,)).generate_state(1)[0]
    )


def sample_dataset(
    truth: SyntheticTruth, spec: ScenarioSpec, split_seed: Optional[int] = None
) -> SimulatedSplits:
    """Draw train/validation/test splits of ``spec.n`` rows each.

    Rows are ``x ~ N(0, Sigma)`` for the structured block (via the stored
    Cholesky factor), independent standard normal for the tail, and
    ``y = x' beta0 + eps`` with unit-variance noise.  Bit-reproducible for a
    fixed ``split_seed``.
    """
    if split_seed is None:
        split_seed = default_split_seed(spec.seed)
    p_s = truth.structured_p
    datasets = []
    for split_index in range(3):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence(split_seed, spawn_key=(split_index,)))
        )
        x = np.empty((spec.n, spec.p))
        z = rng.standard_normal((spec.n, p_s))
        if truth.sigma_chol is not None:
            x[:, :p_s] = z @ truth.sigma_chol.T
        else:
            x[:, :p_s] = z
        if spec.p > p_s:
            x[:, p_s:] = rng.standard_normal((spec.n, spec.p - p_s))
        eps = rng.standard_normal(spec.n)
        y = x[:, : spec.q] @ truth.beta0[: spec.q] + eps
        datasets.append(Dataset.from_arrays(x, y))
    return SimulatedSplits(*datasets)
