"""Limit historical measure: densities and functionals.

The limit measure lives on merger-history trees.  Its density with respect to
(time simplex) x (atom assignments) has a product form over the lifetime
intervals of the tree's sub-clusters:

    2^(-q(tau)) * K_xi * prod_edges exp(-Lambda(mass_e; birth_e, death_e))

and an equivalent recursive form built from the symmetry factor epsilon.
Functionals <f, mu~_t> are computed by enumerating shapes, summing over
ordered leaf-mass assignments, and integrating over node times with nested
Gauss-Legendre quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .kernels import Kernel
from .smoluchowski import MassSpectrum, SolutionPath
from .trees import (
    HistoricalTree,
    TreeShape,
    build_tree,
    edge_intervals,
    epsilon,
    hist_leaf,
    hist_node,
    internal_interaction_rate,
    kernel_product,
    shape_of,
    shapes_up_to,
    symmetry_exponent,
)


@dataclass(frozen=True)
class TreeDensityQuery:
    """A point of the density's domain: shape, leaf masses, node times, horizon.

    ``times`` are listed in pre-order over internal nodes (parent before its
    children) and must respect the tree partial order: each node's time lies
    strictly between its children's times and its parent's time, all below
    the horizon ``t``.
    """

    shape: TreeShape
    masses: tuple
    times: tuple
    t: float

    def tree(self) -> HistoricalTree:
        return build_preorder(self.shape, self.masses, self.times)


def build_preorder(shape: TreeShape, masses, times) -> HistoricalTree:
    """Historical tree from leaf masses (left to right) and internal times in
    pre-order (each parent listed before its children)."""
    if len(masses) != shape.n_leaves:
        raise ValueError("need one mass per leaf")
    if len(times) != shape.n_leaves - 1:
        raise ValueError("need one time per internal node")
    mi = iter(masses)
    ti = iter(times)

    def rec(s: TreeShape) -> HistoricalTree:
        if s.is_leaf:
            return hist_leaf(next(mi))
        tt = next(ti)
        return hist_node(tt, rec(s.left), rec(s.right))

    return rec(shape)


def _edge_exponent(tree: HistoricalTree, path: SolutionPath, t: float) -> float:
    total = 0.0
    for e in edge_intervals(tree, t):
        total += path.survival_exponent(e.mass, e.birth, e.death)
    return total


def density_product(tree: HistoricalTree, path: SolutionPath, t: float,
                    kernel: Optional[Kernel] = None) -> float:
    """Product-form density at ``tree`` with horizon ``t``."""
    kernel = kernel or path.kernel
    q = symmetry_exponent(shape_of(tree))
    return (
        2.0 ** (-q)
        * kernel_product(tree, kernel)
        * math.exp(-_edge_exponent(tree, path, t))
    )


def density_recursive(tree: HistoricalTree, path: SolutionPath, t: float,
                      kernel: Optional[Kernel] = None) -> float:
    """Recursive density: leaves carry survival exponentials, each merge
    contributes epsilon(shape) * K(mass_1, mass_2)."""
    kernel = kernel or path.kernel
    if tree.is_leaf:
        return math.exp(-path.survival_exponent(tree.mass, 0.0, t))
    s = tree.time
    if not s < t:
        raise ValueError(f"node time {s} not below horizon {t}")
    eps = epsilon(shape_of(tree))
    return (
        eps
        * kernel.evaluate(tree.left.mass, tree.right.mass)
        * density_recursive(tree.left, path, s, kernel)
        * density_recursive(tree.right, path, s, kernel)
        * math.exp(-path.survival_exponent(tree.mass, s, t))
    )


def density(query: TreeDensityQuery, path: SolutionPath,
            kernel: Optional[Kernel] = None) -> float:
    return density_product(query.tree(), path, query.t, kernel)


# ---------------------------------------------------------------------------
# quadrature over the node-time simplex


def _preorder_parents(shape: TreeShape) -> list[int]:
    """Parent index of each internal node in pre-order; -1 for the root."""
    parents: list[int] = []

    def rec(s: TreeShape, parent: int):
        if s.is_leaf:
            return
        me = len(parents)
        parents.append(parent)
        rec(s.left, me)
        rec(s.right, me)

    rec(shape, -1)
    return parents


_GL_CACHE: dict[int, tuple] = {}


def _gl(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _simplex_integral(shape: TreeShape, t: float, evaluate: Callable,
                      order: int, breakpoints: tuple = ()) -> np.ndarray:
    """Integrate ``evaluate(times)`` over node times respecting the tree order.

    Each internal node's time ranges over (0, parent time); the root over
    (0, t).  ``evaluate`` takes the pre-order time vector and returns a
    vector of integrand values, all accumulated together.  ``breakpoints``
    are known discontinuity locations of the integrand in any single time
    coordinate; panels are split there so Gauss-Legendre stays accurate.
    """
    parents = _preorder_parents(shape)
    d = len(parents)
    if d == 0:
        return np.asarray(evaluate(()), dtype=float)
    x, w = _gl(order)
    times = [0.0] * d

    def nested(level: int) -> np.ndarray:
        upper = t if parents[level] < 0 else times[parents[level]]
        cuts = [0.0] + sorted(b for b in breakpoints if 0.0 < b < upper) + [upper]
        total = None
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            pts = lo + 0.5 * (hi - lo) * (x + 1.0)
            wts = 0.5 * (hi - lo) * w
            for pt, wt in zip(pts, wts):
                times[level] = pt
                if level + 1 == d:
                    val = np.asarray(evaluate(tuple(times)), dtype=float)
                else:
                    val = nested(level + 1)
                total = wt * val if total is None else total + wt * val
        return total

    return nested(0)


@dataclass(frozen=True)
class LimitFunctionalResult:
    value: float
    error: float
    tail_bound: float


def time_integral(shape: TreeShape, masses, path: SolutionPath, t: float,
                  f: Callable, kernel: Optional[Kernel] = None,
                  tol: float = 1e-8, orders=(8, 12, 18, 27)):
    """Integral over node times of K_xi * exp(-sum Lambda) * [f(tree), 1].

    This is the labeled-tree transition functional at fixed leaf masses; no
    symmetry factor and no initial-measure weights are applied.  Returns
    (value, error, one_value, one_error) where ``one_*`` is the same integral
    with f replaced by 1.

    Discontinuity locations declared by ``f`` through a ``time_breakpoints``
    attribute split the quadrature panels.
    """
    kernel = kernel or path.kernel
    if t <= 0.0 and not shape.is_leaf:
        # node times live in (0, t): empty domain
        return 0.0, 0.0, 0.0, 0.0

    def evaluate(times):
        if len(times) == 0:
            tree = hist_leaf(masses[0])
        else:
            tree = build_preorder(shape, masses, times)
        core = kernel_product(tree, kernel) * math.exp(-_edge_exponent(tree, path, t))
        return np.array([core * f(tree), core])

    breakpoints = tuple(getattr(f, "time_breakpoints", ()))
    prev = None
    for order in orders:
        cur = _simplex_integral(shape, t, evaluate, order, breakpoints)
        if prev is not None:
            diff = np.abs(cur - prev)
            if (diff <= 0.1 * tol).all():
                return float(cur[0]), float(diff[0]), float(cur[1]), float(diff[1])
        prev = cur
    diff = np.abs(cur - prev) if len(orders) > 1 else np.abs(cur)
    return float(cur[0]), float(diff[0]), float(cur[1]), float(diff[1])


def _assignments(mu0: MassSpectrum, n: int):
    """Ordered leaf-mass assignments over the atoms of mu0 with their weights."""
    import itertools

    atoms = list(zip(mu0.masses, mu0.weights))
    for combo in itertools.product(atoms, repeat=n):
        masses = tuple(m for m, _ in combo)
        weight = 1.0
        for _, w in combo:
            weight *= w
        if weight > 0:
            yield masses, weight


def functional(f: Callable, tau_max_leaves: int, path: SolutionPath,
               kernel: Optional[Kernel], mu0: MassSpectrum, t: float,
               tol: float = 1e-8,
               mass_filter: Optional[Callable] = None) -> LimitFunctionalResult:
    """<f, mu~_t> for f supported on shapes with at most ``tau_max_leaves`` leaves.

    Sums 2^(-q(tau)) * (product of atom weights) * (time-simplex integral)
    over all canonical shapes and ordered atom assignments.  ``mass_filter``
    optionally prunes assignments by total mass before integrating.  The tail
    bound is the mu~_t-mass of trees outside the enumerated shapes, computed
    from the f == 1 integrals against the solved total cluster density.
    """
    kernel = kernel or path.kernel
    value = 0.0
    error = 0.0
    captured = 0.0
    for shape in shapes_up_to(tau_max_leaves):
        n = shape.n_leaves
        sym = 2.0 ** (-symmetry_exponent(shape))
        for masses, weight in _assignments(mu0, n):
            if mass_filter is not None and not mass_filter(sum(masses)):
                continue
            val, err, one, one_err = time_integral(
                shape, masses, path, t, f, kernel, tol=tol)
            value += sym * weight * val
            error += sym * weight * err
            captured += sym * weight * one
    tail = max(path.moment(0.0, t) - captured, 0.0)
    return LimitFunctionalResult(value, error, tail)


@dataclass(frozen=True)
class PushforwardReport:
    rows: tuple  # (mass, limit_weight, solver_weight)
    max_discrepancy: float


def pushforward_check(path: SolutionPath, mu0: MassSpectrum, kernel: Kernel,
                      t: float, n_max: int, tol: float = 1e-8) -> PushforwardReport:
    """Compare the mass pushforward of mu~_t against mu_t for small masses.

    For each total mass reachable with at most ``n_max`` atoms, sums the
    limit-measure weight over all shapes and assignments of that mass and
    compares with the solved spectrum's weight there.
    """
    sums: dict[float, float] = {}
    for shape in shapes_up_to(n_max):
        n = shape.n_leaves
        sym = 2.0 ** (-symmetry_exponent(shape))
        for masses, weight in _assignments(mu0, n):
            _, _, one, _ = time_integral(
                shape, masses, path, t, lambda tree: 1.0, kernel, tol=tol)
            key = round(sum(masses), 10)
            sums[key] = sums.get(key, 0.0) + sym * weight * one
    spectrum = path.spectrum_at(t)
    rows = []
    worst = 0.0
    for m in sorted(sums):
        solver_w = spectrum.weight_of(m)
        rows.append((m, sums[m], solver_w))
        worst = max(worst, abs(sums[m] - solver_w))
    return PushforwardReport(tuple(rows), worst)


# ---------------------------------------------------------------------------
# finite-N jump-chain density


def finite_n_jump_density(tree: HistoricalTree, t: float, N: int,
                          kernel: Kernel) -> float:
    """Density of the realized history of an isolated n-particle system.

    (K_xi / N^(n-1)) * exp(-int_0^t K_s(xi)/N ds), where K_s is the pairwise
    interaction rate among the sub-clusters of ``tree`` alive at s.  The
    integral is exact: the rate is piecewise constant between merge times.
    """
    n = tree.n_leaves
    cuts = sorted({0.0, float(t)} | {v.time for v in tree.internal_nodes()})
    integral = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        mid = 0.5 * (a + b)
        integral += internal_interaction_rate(tree, mid, kernel) * (b - a)
    return (
        kernel_product(tree, kernel) / float(N) ** (n - 1)
        * math.exp(-integral / N)
    )
