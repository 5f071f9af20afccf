"""Brute-force and closed-form verifiers for the influence and smoothing
claims behind the model, runnable on small graphs.

Two independent routes exist for each quantity:

* feature influence via reverse-mode differentiation vs. random-walk
  probabilities (path enumeration / matrix powers),
* label influence via differentiation of the unrolled clamped propagation
  vs. a dynamic program over unlabeled-restricted paths,
* Monte-Carlo label influence over random labeled sets vs. the closed-form
  geometric sum of normalized feature influences,
* per-class influence sums vs. propagated label mass,
* Dirichlet energy before/after one aggregation step,
* the feature-to-label smoothing bound under a linear ground-truth map.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, pick, row_reset
from .graph import SparseGraph
from .propagation import normalized_adjacency, spmm


def feature_influence_jacobian(graph: SparseGraph, weights, k: int,
                               a: int, b: int) -> float:
    """Normalized feature influence of b on a after k averaging layers.

    Computed by differentiating k applications of T = D^-1 A (linear regime:
    identity transforms and activation, where the influence is exact).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    op = normalized_adjacency(graph, weights)
    x0 = Tensor(np.zeros((graph.n_nodes, 1)), requires_grad=True)
    x = x0
    for _ in range(k):
        x = spmm(op, x)
    pick(x, a, 0).backward()
    infl = x0.grad[:, 0]
    return float(infl[b] / infl.sum())


def walk_probability(graph: SparseGraph, weights, k: int, a: int, b: int,
                     enumerate_paths: bool | None = None) -> float:
    """(T^k)[a, b]: probability a k-step random walk from a ends at b.

    Explicit path enumeration for n <= 10 (or when forced), matrix power
    otherwise.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    op = normalized_adjacency(graph, weights)
    if enumerate_paths is None:
        enumerate_paths = graph.n_nodes <= 10
    if not enumerate_paths:
        return float(np.linalg.matrix_power(op.to_dense(), k)[a, b])
    t = op.to_dense()

    def walk(node, steps):
        if steps == 0:
            return 1.0 if node == b else 0.0
        return sum(t[node, nxt] * walk(nxt, steps - 1)
                   for nxt in graph.neighbors(node))

    return walk(a, k)


def label_influence_gradient(graph: SparseGraph, weights, k: int, a: int,
                             b: int, labeled_mask) -> float:
    """d y_a^(k) / d y_b for scalar labels under clamped propagation.

    Differentiates the unrolled iteration; the initial labels feed both the
    starting state and every per-iteration reset, so the reset contributions
    are part of the gradient.
    """
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    if labeled_mask[a]:
        raise ValueError("influence target a must be unlabeled")
    if not labeled_mask[b]:
        raise ValueError("influence source b must be labeled")
    op = normalized_adjacency(graph, weights)
    y0 = Tensor(labeled_mask.astype(float).reshape(-1, 1), requires_grad=True)
    y = y0
    for _ in range(k):
        y = row_reset(spmm(op, y), labeled_mask, y0)
    pick(y, a, 0).backward()
    return float(y0.grad[b, 0])


def unlabeled_path_sum(graph: SparseGraph, weights, k: int, a: int, b: int,
                       labeled_mask) -> float:
    """Sum over paths a -> b of length <= k whose nodes before the endpoint
    are all unlabeled, of the product of normalized edge weights.

    Dynamic program: mass is only extended out of unlabeled nodes.
    """
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    if labeled_mask[a]:
        raise ValueError("influence target a must be unlabeled")
    if not labeled_mask[b]:
        raise ValueError("influence source b must be labeled")
    t = normalized_adjacency(graph, weights).to_dense()
    unlabeled = ~labeled_mask
    g = np.zeros(graph.n_nodes)
    g[a] = 1.0
    total = 0.0
    for _ in range(k):
        g = t.T @ (g * unlabeled)
        total += g[b]
    return float(total)


@dataclass
class InfluenceQuery:
    a: int          # target node (unlabeled for label influence)
    b: int          # source node (labeled for label influence)
    k: int          # horizon
    beta: float     # fraction of unlabeled nodes


@dataclass
class Theorem2Result:
    lhs: float      # Monte-Carlo mean of the label influence
    rhs: float      # sum_j beta^j * normalized feature influence at horizon j
    abs_err: float
    stderr: float   # Monte-Carlo standard error of lhs


def check_theorem2(graph: SparseGraph, weights, k: int, a: int, b: int,
                   beta: float, trials: int, rng) -> Theorem2Result:
    """Expected label influence over random labelings vs. the closed form.

    Labeled sets are resampled i.i.d. per node with P(unlabeled) = beta and
    b forced labeled; a's status is sampled like any other node (its label
    influence is zero in trials where it is labeled, since clamping pins it).
    The per-trial influence is computed by propagating the basis label e_b
    through the clamped iteration (exact: the iteration is linear in the
    initial labels).

    The closed form assigns probability beta^j to every length-j walk, which
    matches the per-node sampling only when contributing walks never revisit
    a node; instances with graph distance d(a, b) = k satisfy this (every
    walk of length <= k from a to b is then a simple shortest path).
    """
    if not (0 < beta < 1):
        raise ValueError("beta must be in (0, 1)")
    n = graph.n_nodes
    op = normalized_adjacency(graph, weights)
    t = op.to_dense()
    labeled = rng.random((trials, n)) >= beta
    labeled[:, b] = True
    y0 = np.zeros((trials, n))
    y0[:, b] = 1.0
    y = y0.copy()
    for _ in range(k):
        y = y @ t.T
        y[labeled] = y0[labeled]
    samples = y[:, a]
    lhs = float(samples.mean())
    stderr = float(samples.std(ddof=1) / np.sqrt(trials))
    rhs = 0.0
    tj = np.eye(n)
    for j in range(1, k + 1):
        tj = tj @ t
        rhs += beta ** j * tj[a, b]  # rows of T^j sum to 1, so already normalized
    return Theorem2Result(lhs=lhs, rhs=float(rhs),
                          abs_err=abs(lhs - rhs), stderr=stderr)


def check_theorem3(graph: SparseGraph, weights, k: int, a: int,
                   labeled_mask, labels):
    """Per-class (summed label influence, propagated label mass) for node a.

    a is treated as unlabeled. The two vectors agree after normalization,
    hence LPA's argmax prediction for a maximizes intra-class influence.
    """
    labeled_mask = np.asarray(labeled_mask, dtype=bool).copy()
    labeled_mask[a] = False
    labels = np.asarray(labels)
    classes = int(labels[labeled_mask].max()) + 1 if labeled_mask.any() else 0
    t = normalized_adjacency(graph, weights).to_dense()
    n = graph.n_nodes
    # one DP from a gives influences to every labeled b at once
    unlabeled = ~labeled_mask
    g = np.zeros(n)
    g[a] = 1.0
    acc = np.zeros(n)
    for _ in range(k):
        g = t.T @ (g * unlabeled)
        acc += g
    influence_sum = np.zeros(classes)
    for b in np.flatnonzero(labeled_mask):
        influence_sum[labels[b]] += acc[b]
    # propagated mass: clamped iteration from one-hot initial labels
    y0 = np.zeros((n, classes))
    idx = np.flatnonzero(labeled_mask)
    y0[idx, labels[idx]] = 1.0
    y = y0.copy()
    for _ in range(k):
        y = t @ y
        y[labeled_mask] = y0[labeled_mask]
    lpa_mass = y[a]
    return influence_sum, lpa_mass


def dirichlet_energy(op, x: np.ndarray) -> float:
    """0.5 * sum_ij tilde_a_ij ||x_i - x_j||^2 over the normalized weights."""
    t = op.to_dense()
    x = np.asarray(x, dtype=np.float64)
    sq = (x ** 2).sum(axis=1)
    cross = x @ x.T
    return float(0.5 * (t * (sq[:, None] + sq[None, :] - 2 * cross)).sum())


def check_theorem4(graph: SparseGraph, weights, x):
    """(D(x), D(h)) with h = T x; aggregation never increases the energy."""
    op = normalized_adjacency(graph, weights)
    x = np.asarray(x, dtype=np.float64)
    return dirichlet_energy(op, x), dirichlet_energy(op, op.apply(x))


@dataclass
class SmoothingReport:
    residual_eps: np.ndarray   # per-node feature smoothing residual vectors
    lipschitz: float
    label_residual: np.ndarray  # per-node |y_i - weighted neighbor average|
    bound: np.ndarray           # L * ||eps_i||_2 per node

    def holds(self, slack: float = 1e-12) -> bool:
        return bool(np.all(self.label_residual <= self.bound + slack))


def check_theorem1_linear(graph: SparseGraph, weights, features,
                          w_map) -> SmoothingReport:
    """Label-smoothing bound under the exact linear map y = w_map . x.

    Linearity kills the higher-order remainder and makes L = ||w_map||_2
    exact, so the bound must hold to arithmetic precision.
    """
    op = normalized_adjacency(graph, weights)
    x = np.asarray(features, dtype=np.float64)
    w_map = np.asarray(w_map, dtype=np.float64).ravel()
    eps = x - op.apply(x)
    y = x @ w_map
    label_residual = np.abs(y - op.apply(y.reshape(-1, 1)).ravel())
    lipschitz = float(np.linalg.norm(w_map))
    bound = lipschitz * np.linalg.norm(eps, axis=1)
    return SmoothingReport(residual_eps=eps, lipschitz=lipschitz,
                           label_residual=label_residual, bound=bound)


def intra_class_influence(graph: SparseGraph, weights, k: int, labels,
                          class_i: int, labeled_mask) -> float:
    """Total label influence between same-class (unlabeled a, labeled b) pairs."""
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    labels = np.asarray(labels)
    total = 0.0
    t = normalized_adjacency(graph, weights).to_dense()
    unlabeled = ~labeled_mask
    sources = np.flatnonzero(labeled_mask & (labels == class_i))
    for a in np.flatnonzero(unlabeled & (labels == class_i)):
        g = np.zeros(graph.n_nodes)
        g[a] = 1.0
        acc = np.zeros(graph.n_nodes)
        for _ in range(k):
            g = t.T @ (g * unlabeled)
            acc += g
        total += acc[sources].sum()
    return float(total)


# ---------------------------------------------------------------------------
# Randomized sweeps driving the `verify` CLI and the acceptance tests.

@dataclass
class CheckResult:
    name: str
    instances: int
    max_abs_err: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json(self) -> str:
        import json

        def coerce(v):
            if isinstance(v, (np.integer,)):
                return int(v)
            if isinstance(v, (np.floating,)):
                return float(v)
            if isinstance(v, (np.bool_,)):
                return bool(v)
            if isinstance(v, np.ndarray):
                return v.tolist()
            return v

        payload = {"name": self.name, "instances": int(self.instances),
                   "max_abs_err": float(self.max_abs_err),
                   "pass": bool(self.passed)}
        payload.update({k: coerce(v) for k, v in self.details.items()})
        return json.dumps(payload)


def random_instance(rng, n_max: int = 8, connected_bias: bool = True):
    """Small random graph with random positive edge weights."""
    n = int(rng.integers(3, n_max + 1))
    pairs = set()
    # a random spanning tree keeps most instances connected
    if connected_bias:
        order = rng.permutation(n)
        for i in range(1, n):
            j = int(rng.integers(0, i))
            pairs.add((min(order[i], order[j]), max(order[i], order[j])))
    extra = int(rng.integers(0, n))
    while len(pairs) < min(n * (n - 1) // 2, (n - 1) + extra):
        u, v = rng.integers(0, n, size=2)
        if u != v:
            pairs.add((min(u, v), max(u, v)))
    graph = SparseGraph.from_edges(n, pairs)
    weights = rng.uniform(0.2, 2.0, size=graph.n_undirected_edges)
    return graph, weights


def _random_labeled_mask(rng, n: int, a: int, b: int) -> np.ndarray:
    mask = rng.random(n) < rng.uniform(0.3, 0.8)
    mask[a] = False
    mask[b] = True
    return mask


def sweep_lemma1(instances: int, seed: int, k_max: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for _ in range(instances):
        graph, weights = random_instance(rng)
        k = int(rng.integers(1, k_max + 1))
        a = int(rng.integers(0, graph.n_nodes))
        for b in range(graph.n_nodes):
            jac = feature_influence_jacobian(graph, weights, k, a, b)
            prob = walk_probability(graph, weights, k, a, b)
            max_err = max(max_err, abs(jac - prob))
    return CheckResult("lemma1_feature_influence_vs_walks", instances,
                       max_err, max_err <= 1e-10, {"seed": seed})


def sweep_lemma2(instances: int, seed: int, k_max: int = 4) -> CheckResult:
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for _ in range(instances):
        graph, weights = random_instance(rng)
        n = graph.n_nodes
        k = int(rng.integers(1, k_max + 1))
        a, b = rng.choice(n, size=2, replace=False)
        mask = _random_labeled_mask(rng, n, int(a), int(b))
        grad = label_influence_gradient(graph, weights, k, int(a), int(b), mask)
        path = unlabeled_path_sum(graph, weights, k, int(a), int(b), mask)
        max_err = max(max_err, abs(grad - path))
    return CheckResult("lemma2_label_influence_vs_paths", instances,
                       max_err, max_err <= 1e-10, {"seed": seed})


def _graph_distances(graph: SparseGraph, src: int) -> np.ndarray:
    dist = np.full(graph.n_nodes, -1)
    dist[src] = 0
    frontier = [src]
    while frontier:
        nxt = []
        for u in frontier:
            for v in graph.neighbors(u):
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    nxt.append(int(v))
        frontier = nxt
    return dist


def theorem2_instances(count: int, seed: int, k_max: int = 3):
    """Fixed (graph, weights, a, b, k) instances with d(a, b) = k <= k_max."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        graph, weights = random_instance(rng, n_max=6)
        a = int(rng.integers(0, graph.n_nodes))
        dist = _graph_distances(graph, a)
        k = int(rng.integers(1, k_max + 1))
        candidates = np.flatnonzero(dist == k)
        if len(candidates) == 0:
            continue
        b = int(rng.choice(candidates))
        out.append((graph, weights, a, b, k))
    return out


def sweep_theorem2(instances: int, seed: int, trials: int = 100_000,
                   betas=(0.3, 0.5, 0.7)) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst_sigmas = 0.0
    max_err = 0.0
    checked = 0
    for graph, weights, a, b, k in theorem2_instances(instances, seed):
        for beta in betas:
            res = check_theorem2(graph, weights, k, a, b, beta, trials, rng)
            sigmas = res.abs_err / res.stderr if res.stderr > 0 else 0.0
            worst_sigmas = max(worst_sigmas, sigmas)
            max_err = max(max_err, res.abs_err)
            checked += 1
    return CheckResult("theorem2_monte_carlo_vs_closed_form", checked,
                       max_err, worst_sigmas <= 3.0,
                       {"seed": seed, "worst_sigmas": worst_sigmas,
                        "trials": trials})


def sweep_theorem3(instances: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for _ in range(instances):
        graph, weights = random_instance(rng)
        n = graph.n_nodes
        labels = rng.integers(0, int(rng.integers(2, 4)), size=n)
        labels[0] = labels.max()  # keep the class count tight
        mask = rng.random(n) < 0.7
        a = int(rng.integers(0, n))
        mask_a = mask.copy()
        mask_a[a] = False
        if not mask_a.any():
            mask_a[(a + 1) % n] = True
        k = int(rng.integers(1, 5))
        infl, mass = check_theorem3(graph, weights, k, a, mask_a, labels)
        si, sm = infl.sum(), mass.sum()
        if si > 0 and sm > 0:
            max_err = max(max_err, float(np.abs(infl / si - mass / sm).max()))
        else:
            max_err = max(max_err, float(np.abs(infl - mass).max()))
    return CheckResult("theorem3_influence_vs_lpa_mass", instances,
                       max_err, max_err <= 1e-10, {"seed": seed})


def sweep_theorem4(instances: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(instances):
        graph, weights = random_instance(rng)
        x = rng.normal(size=(graph.n_nodes, int(rng.integers(1, 4))))
        before, after = check_theorem4(graph, weights, x)
        worst = max(worst, after - before)
    violation = max(worst, 0.0)
    return CheckResult("theorem4_energy_shrinks", instances, violation,
                       worst <= 1e-12, {"seed": seed})


def sweep_theorem1(instances: int, seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(instances):
        graph, weights = random_instance(rng)
        d = int(rng.integers(1, 4))
        x = rng.normal(size=(graph.n_nodes, d))
        w_map = rng.normal(size=d)
        rep = check_theorem1_linear(graph, weights, x, w_map)
        worst = max(worst, float((rep.label_residual - rep.bound).max()))
    violation = max(worst, 0.0)
    return CheckResult("theorem1_linear_smoothing_bound", instances, violation,
                       worst <= 1e-12, {"seed": seed})


LEMMA_SWEEPS = (sweep_lemma1, sweep_lemma2)
THEOREM_SWEEPS = (sweep_theorem1, sweep_theorem2, sweep_theorem3, sweep_theorem4)


def run_suite(suite: str, instances: int, seed: int):
    sweeps = {
        "lemmas": LEMMA_SWEEPS,
        "theorems": THEOREM_SWEEPS,
        "all": LEMMA_SWEEPS + THEOREM_SWEEPS,
    }[suite]
    results = []
    for i, sweep in enumerate(sweeps):
        n = instances
        if sweep is sweep_theorem2:
            n = min(instances, 10)  # Monte-Carlo sweeps are the slow ones
        results.append(sweep(n, seed + i))
    return results
