"""Exact n-block designs: information matrices, A/D/E/T efficiencies and an
integer search on the linear optimality system."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp

from . import numerics
from .errors import InvalidInputError
from .model import ModelKind
from .sequences import check_sequence
from .solver import components_for, equation_columns

MAX_MOVES = 10_000
KICKS = 20
MILP_NODES = 2000
MILP_SECONDS = 60.0  # safety cap only; the node limit keeps runs reproducible


@dataclass
class ExactDesign:
    k: int
    t: int
    rows: np.ndarray  # n x k, 1-based labels; one block per row

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=int)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] != self.k:
            raise InvalidInputError(f"design rows must form an n x {self.k} array with n >= 1")
        for r in rows:
            check_sequence(r, self.t)
        self.rows = rows

    @property
    def n(self):
        return self.rows.shape[0]

    @classmethod
    def from_columns(cls, matrix, t):
        """Build from a plot-major layout: column ``i`` of ``matrix`` is block ``i``."""
        m = np.asarray(matrix, dtype=int)
        return cls(m.shape[0], t, m.T.copy())

    @classmethod
    def from_dict(cls, d):
        try:
            k, t, rows = int(d["k"]), int(d["t"]), d["rows"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"design JSON needs k, t and rows ({exc})") from None
        design = cls(k, t, rows)
        if "n" in d and int(d["n"]) != design.n:
            raise InvalidInputError(f"design declares n={d['n']} but has {design.n} rows")
        return design

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        return {"k": self.k, "t": self.t, "n": self.n, "rows": self.rows.tolist()}

    def relabel(self, perm):
        """Apply ``label -> perm[label - 1]`` to every plot."""
        perm = np.asarray(perm, dtype=int)
        return ExactDesign(self.k, self.t, perm[self.rows - 1])


def info_matrix(design, kernel, model_kind=ModelKind.DIRECTIONAL):
    """``C_d = E00 - E01 E11^+ E10`` accumulated over the design's blocks."""
    if design.k != kernel.k:
        raise InvalidInputError(f"design block size {design.k} != kernel dimension {kernel.k}")
    t = design.t
    c00 = c0n = cnn = 0
    for row in design.rows:
        a, b, c = components_for(tuple(row), kernel, t, model_kind)
        c00, c0n, cnn = c00 + a, c0n + b, cnn + c
    d = c0n.shape[0]
    e01 = np.hstack([c0n[j] for j in range(d)])
    e11 = np.block([[cnn[i, j] for j in range(d)] for i in range(d)])
    C = c00 - e01 @ numerics.pinv(numerics.symmetrize(e11)) @ e01.T
    return numerics.symmetrize(C)


@dataclass
class EfficiencyReport:
    eigenvalues: np.ndarray
    eff_a: float
    eff_d: float
    eff_e: float
    eff_t: float
    y_star_used: float
    model_kind: ModelKind
    n: int

    def chain_holds(self, tol=1e-9):
        return bool(self.eff_e <= self.eff_a + tol and self.eff_a <= self.eff_d + tol
                    and self.eff_d <= self.eff_t + tol and self.eff_t <= 1 + tol)

    def to_dict(self):
        return {
            "model": self.model_kind.value,
            "n": self.n,
            "y_star": self.y_star_used,
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "eff_a": self.eff_a,
            "eff_d": self.eff_d,
            "eff_e": self.eff_e,
            "eff_t": self.eff_t,
        }


def contrast_eigenvalues(C):
    """The ``t-1`` eigenvalues of ``C`` on the complement of the ones vector."""
    U = numerics.contrast_basis(C.shape[0])
    return np.linalg.eigvalsh(numerics.symmetrize(U.T @ C @ U))


def efficiencies_from_eigenvalues(a, n, y_star):
    a = np.asarray(a, dtype=float)
    t1 = a.size
    bench = n * y_star
    pos = np.all(a > 0)
    eff_a = t1 * t1 / (bench * np.sum(1.0 / a)) if pos else 0.0
    eff_d = t1 / bench * float(np.exp(np.mean(np.log(a)))) if pos else 0.0
    eff_e = t1 * a[0] / bench
    eff_t = a.sum() / bench
    return float(eff_a), float(eff_d), float(eff_e), float(eff_t)


def efficiencies(design, kernel, model_kind, y_star):
    """A, D, E and T efficiencies against the benchmark ``n y* / (t-1)`` per eigenvalue."""
    model_kind = ModelKind(model_kind)
    if not (np.isfinite(y_star) and y_star > 0):
        raise InvalidInputError("y_star must come from a converged solution")
    C = info_matrix(design, kernel, model_kind)
    a = contrast_eigenvalues(C)
    return EfficiencyReport(a, *efficiencies_from_eigenvalues(a, design.n, y_star), float(y_star), model_kind, design.n)


def largest_remainder(p, n):
    """Integer counts summing to ``n`` closest to ``n * p`` (ties to lower index)."""
    p = np.asarray(p, dtype=float)
    raw = n * p / p.sum()
    base = np.floor(raw).astype(int)
    rem = n - base.sum()
    order = np.lexsort((np.arange(p.size), -(raw - base)))
    base[order[:rem]] += 1
    return base


@dataclass
class SearchResult:
    design: ExactDesign
    counts: dict  # sequence -> replications
    distance: float
    moves: int


def _pair_move(counts, cols, r):
    """Best simultaneous pair of single-unit transfers, or None if none improves."""
    src = np.flatnonzero(counts > 0)
    a, b = np.meshgrid(src, np.arange(counts.size), indexing="ij")
    keep = a != b
    a, b = a[keep], b[keep]
    U = cols[:, b] - cols[:, a]
    d1 = 2 * (r @ U) + np.einsum("ij,ij->j", U, U)
    delta = d1[:, None] + d1[None, :] + 2 * (U.T @ U)
    # a unit can only leave twice if two are present
    same = (a[:, None] == a[None, :]) & (counts[a][:, None] < 2)
    delta[same] = np.inf
    np.fill_diagonal(delta, np.where(counts[a] >= 2, np.diag(delta), np.inf))
    i, j = np.unravel_index(int(np.argmin(delta)), delta.shape)
    if not delta[i, j] < -1e-12 * max(1.0, float(r @ r)):
        return None
    return (a[i], b[i]), (a[j], b[j])


def _local_search(counts, cols, rng, max_moves):
    """First-improvement single-unit transfers between support sequences,
    falling back to the best pair of transfers when no single one helps."""
    r = cols @ counts
    gram = cols.T @ cols
    sq = np.diag(gram)
    moves = 0
    n_seq = counts.size
    while moves < max_moves:
        # change of ||r||^2 when one unit moves from a to b
        g = cols.T @ r
        delta = 2 * (g[None, :] - g[:, None]) + sq[:, None] + sq[None, :] - 2 * gram
        delta[counts <= 0, :] = np.inf
        np.fill_diagonal(delta, np.inf)
        base = float(r @ r)
        improving = np.flatnonzero((delta < -1e-12 * max(1.0, base)).ravel())
        if improving.size:
            pick = improving[rng.permutation(improving.size)[0]]
            steps = [divmod(int(pick), n_seq)]
        else:
            pair = _pair_move(counts, cols, r)
            if pair is None:
                break
            steps = list(pair)
        for a, b in steps:
            counts[a] -= 1
            counts[b] += 1
            r = r + cols[:, b] - cols[:, a]
        moves += 1
    return counts, float(np.linalg.norm(r)), moves


def _kicked_search(counts, cols, rng, max_moves, kicks, tol):
    """Local search, then repeated random relocations of two or three units
    each followed by a fresh descent; a kick is kept only if it improves."""
    best, dist, moves = _local_search(counts, cols, rng, max_moves)
    for _ in range(kicks):
        if dist <= tol or moves >= max_moves:
            break
        trial = best.copy()
        for _ in range(int(rng.integers(2, 4))):
            src = rng.choice(np.flatnonzero(trial > 0))
            trial[src] -= 1
            trial[rng.integers(trial.size)] += 1
        trial, d, m = _local_search(trial, cols, rng, max_moves - moves)
        moves += m
        if d < dist - 1e-12 * max(1.0, dist):
            best, dist = trial, d
    return best, dist, moves


def _milp_start(cols, n, nodes):
    """Integer counts minimizing the L1 residual, by branch and bound (HiGHS)."""
    m, N = cols.shape
    c = np.r_[np.zeros(N), np.ones(2 * m)]
    eq = LinearConstraint(np.hstack([cols, -np.eye(m), np.eye(m)]), 0, 0)
    total = LinearConstraint(np.r_[np.ones(N), np.zeros(2 * m)][None], n, n)
    res = milp(c, constraints=[eq, total], integrality=np.r_[np.ones(N), np.zeros(2 * m)],
               bounds=Bounds(0, np.inf), options={"node_limit": nodes, "time_limit": MILP_SECONDS})
    if res.x is None:
        return None
    counts = np.round(res.x[:N]).astype(int)
    return counts if counts.sum() == n and np.all(counts >= 0) else None


def exact_search(sol, n, seed=0, kernel=None, restarts=4, max_moves=MAX_MOVES, kicks=KICKS, milp_nodes=MILP_NODES):
    """Integer replications on the support sequences minimizing the distance
    between the two sides of the ``n``-scaled linear optimality system.

    Starts: an L1 branch-and-bound solution (skipped with ``milp_nodes=0``),
    largest-remainder rounding of the block-level optimal measure with
    a greedy (distance-minimizing, lowest-index) choice of relabelings inside
    each orbit, plus ``restarts`` random multinomial starts drawn from ``seed``.
    Each start is improved by single-unit transfers (first improvement in a
    seed-determined order) and then by up to ``kicks`` random two- or
    three-unit relocations, each re-descended and kept only if it improves.
    ``max_moves`` bounds the transfers per start. The best start wins, ties
    to the earliest; the search stops early once a start reaches zero.
    """
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    kernel = kernel if kernel is not None else sol.kernel
    if kernel is None:
        raise InvalidInputError("a kernel is required")
    if not sol.support:
        raise InvalidInputError("empty support")
    t = sol.t
    x = sol.x_star[:1] if sol.model_kind is ModelKind.UNDIRECTIONAL else sol.x_star
    seqs = []
    owner = []
    for bi in sol.support:
        for s in sol.blocks[bi].members():
            seqs.append(s)
            owner.append(bi)
    owner = np.asarray(owner)
    cols = equation_columns(seqs, kernel, t, sol.model_kind, x, sol.y_star)
    rng = np.random.default_rng(seed)

    # start 0: rounding of the block-level proportions
    w = {b.representative: p for b, p in zip(sol.optimal_measure.items, sol.optimal_measure.weights)}
    pb = np.array([w.get(sol.blocks[bi].representative, 0.0) for bi in sol.support])
    per_block = largest_remainder(pb, n)
    counts = np.zeros(len(seqs), dtype=int)
    r = np.zeros(cols.shape[0])
    for bi, c in zip(sol.support, per_block):
        idx = np.flatnonzero(owner == bi)
        for _ in range(c):
            dist = np.linalg.norm(r[:, None] + cols[:, idx], axis=0)
            j = idx[int(np.argmin(dist))]
            counts[j] += 1
            r += cols[:, j]
    starts = [counts]
    if milp_nodes > 0:
        m = _milp_start(cols, n, milp_nodes)
        if m is not None:
            starts.insert(0, m)
    pseq = pb[np.searchsorted(sol.support, owner)] / np.array([sol.blocks[bi].orbit_size for bi in owner])
    pseq = pseq / pseq.sum() if pseq.sum() > 0 else np.full(len(seqs), 1.0 / len(seqs))
    for _ in range(restarts):
        starts.append(rng.multinomial(n, pseq))

    tol = 1e-9 * max(1.0, n * abs(sol.y_star))
    best = None
    for start in starts:
        c, dist, moves = _kicked_search(start.astype(int).copy(), cols, rng, max_moves, kicks, tol)
        if best is None or dist < best[1] - 1e-12 * max(1.0, best[1]):
            best = (c, dist, moves)
        if best[1] <= tol:
            break
    c, dist, moves = best
    rows = [s for s, cnt in zip(seqs, c) for _ in range(int(cnt))]
    design = ExactDesign(sol.k, t, np.array(rows, dtype=int))
    return SearchResult(design, {s: int(cnt) for s, cnt in zip(seqs, c) if cnt > 0}, dist, moves)
