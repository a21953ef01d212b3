"""Approximate-design optimization over symmetric blocks.

Every block contributes a moment matrix ``R_s`` of size ``(d+1) x (d+1)``
(``d = 2`` for the directional model, ``d = 1`` for the undirectional one).
Its trailing ``d x d`` block is ``Q_s`` and

    q_s(x) = [1, x'] R_s [1, x']'.

The information-trace value of a measure is ``q*(p) = min_x sum_s p_s q_s(x)``
and its optimum ``y*`` equals the minimum over ``x`` of the upper envelope
``r(x) = max_s q_s(x)``. The minimizer of the envelope is ``x*`` and the
blocks attaining the envelope there form the support set.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy.optimize import brentq

from . import numerics
from .errors import ConvergenceError, DegenerateMeasureError, InvalidInputError
from .model import (
    CovarianceSpec,
    ModelKind,
    build_kernel,
    check_weights,
    info_components,
    moments_for,
)
from .sequences import SymmetricBlock, canonicalize, check_sequence, enumerate_blocks

log = logging.getLogger(__name__)

DET_RTOL = 1e-14


@dataclass(frozen=True)
class AlgorithmConfig:
    epsilon: float = 1e-7
    omega: float = 1.0
    max_iters: int = 100_000
    tol_T: float = 1e-8  # relative to y*
    tie_policy: str = "average"  # or "lowest-index"
    tie_rtol: float = 1e-10
    max_step: float = 0.5
    polish: bool = True
    polish_start: int = 16

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be positive")
        if not 0 < self.omega <= 2:
            raise InvalidInputError("omega must lie in (0, 2]")
        if self.max_iters < 0:
            raise InvalidInputError("max_iters must be nonnegative")
        if self.tie_policy not in ("average", "lowest-index"):
            raise InvalidInputError(f"unknown tie policy {self.tie_policy!r}")
        if not 0 < self.max_step < 1:
            raise InvalidInputError("max_step must lie in (0, 1)")


@dataclass
class Measure:
    """Proportions over blocks (``level='block'``) or raw sequences (``level='sequence'``).

    A block weight is understood as spread uniformly over the block's orbit.
    """

    items: list
    weights: np.ndarray
    t: int
    level: str = "block"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if len(self.items) != self.weights.size:
            raise InvalidInputError("one weight per item required")
        if self.level not in ("block", "sequence"):
            raise InvalidInputError(f"unknown measure level {self.level!r}")
        if self.level == "block":
            self.items = [b if isinstance(b, SymmetricBlock) else canonicalize(b, self.t) for b in self.items]
        else:
            self.items = [check_sequence(s, self.t) for s in self.items]
        check_weights(self.weights)

    @classmethod
    def point_mass(cls, item, t, level="block"):
        return cls([item], np.ones(1), t, level)

    @property
    def k(self):
        return len(self.sequences()[0])

    def sequences(self):
        return [b.representative if self.level == "block" else b for b in self.items]

    def weight_of(self, block):
        """Total weight carried by the orbit of ``block``."""
        rep = block.representative if isinstance(block, SymmetricBlock) else canonicalize(block, self.t).representative
        tot = 0.0
        for it, w in zip(self.items, self.weights):
            r = it.representative if self.level == "block" else canonicalize(it, self.t).representative
            if r == rep:
                tot += w
        return tot

    def compact(self, tol=0.0):
        keep = self.weights > tol
        w = self.weights[keep]
        return Measure([it for it, k in zip(self.items, keep) if k], w / w.sum(), self.t, self.level)

    def to_list(self):
        out = []
        for it, w in zip(self.items, self.weights):
            rep = it.representative if self.level == "block" else it
            out.append({"rep": list(rep), "p": float(w)})
        return out


# ---------------------------------------------------------------------------
# quadratic-form helpers


def q_values(R, x):
    v = np.concatenate([[1.0], np.atleast_1d(x)])
    return np.einsum("i,nij,j->n", v, R, v)


def q_gradients(R, x):
    return 2.0 * (R[:, 1:, 0] + R[:, 1:, 1:] @ np.atleast_1d(x))


def _is_degenerate(r):
    d = r.shape[0]
    scale = np.abs(r).max()
    return scale == 0 or np.linalg.det(r) <= DET_RTOL * scale**d


def aggregate_moments(p, R):
    return np.einsum("n,nij->ij", p, R)


def minimizer(r):
    """``(argmin, min)`` of ``[1, x'] r [1, x']'``; the min equals det(r)/det(Q)."""
    x = -np.linalg.solve(r[1:, 1:], r[1:, 0])
    return x, float(r[0, 0] + r[0, 1:] @ x)


def theta_values(p, R):
    """``tr(R_s R^-1) - tr(Q_s Q^-1)`` for every block, with ``R`` the aggregate under ``p``."""
    r = aggregate_moments(p, R)
    if _is_degenerate(r):
        raise DegenerateMeasureError("aggregated moment matrix is singular; the measure has no information")
    ri = np.linalg.inv(r)
    qi = np.linalg.inv(r[1:, 1:])
    return np.einsum("nij,ji->n", R, ri) - np.einsum("nij,ji->n", R[:, 1:, 1:], qi)


def theta(p, R, index):
    return float(theta_values(p, R)[index])


def hull_distance(G):
    """Euclidean distance from the origin to the convex hull of the rows of ``G`` (d <= 2)."""
    G = np.atleast_2d(np.asarray(G, dtype=float))
    if G.shape[1] == 1:
        lo, hi = G[:, 0].min(), G[:, 0].max()
        return 0.0 if lo <= 0 <= hi else float(min(abs(lo), abs(hi)))
    if G.shape[1] != 2:
        raise InvalidInputError("hull distance implemented for d <= 2")
    best = float(np.min(np.linalg.norm(G, axis=1)))
    n = len(G)
    if n >= 2:
        i, j = np.triu_indices(n, 1)
        a, b = G[i], G[j]
        ab = b - a
        den = np.einsum("ij,ij->i", ab, ab)
        lam = np.clip(np.where(den > 0, -np.einsum("ij,ij->i", a, ab) / np.where(den > 0, den, 1), 0), 0, 1)
        best = min(best, float(np.min(np.linalg.norm(a + lam[:, None] * ab, axis=1))))
    if n >= 3 and best > 0:
        for i, j, l in combinations(range(n), 3):
            a, b, c = G[i], G[j], G[l]
            m = np.column_stack([b - a, c - a])
            det = np.linalg.det(m)
            if abs(det) <= 1e-300:
                continue
            u, v = np.linalg.solve(m, -a)
            if u >= 0 and v >= 0 and u + v <= 1:
                return 0.0
    return best


# ---------------------------------------------------------------------------
# exact envelope minimization


def envelope_min_1d(R):
    """Exact minimizer of ``max_s q_s(z)`` for univariate quadratics.

    Candidates are every vertex and every pairwise crossing. A candidate's
    own value is a lower bound on the envelope there, so scanning candidates
    in increasing order of that value, the first one lying on the envelope is
    the minimizer. Ties go to the smaller ``z``.
    """
    c, b, a = R[:, 0, 0], 2 * R[:, 0, 1], R[:, 1, 1]
    m = len(R)
    zs = [-b / (2 * a)]
    vals = [c - b * b / (4 * a)]
    for i in range(m - 1):
        da, db, dc = a[i] - a[i + 1:], b[i] - b[i + 1:], c[i] - c[i + 1:]
        lin = np.abs(da) <= 1e-14 * np.maximum(np.abs(a[i]), 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            disc = db * db - 4 * da * dc
            ok = (~lin) & (disc >= 0)
            sq = np.sqrt(np.where(ok, disc, 0))
            # numerically stable quadratic roots
            qq = -0.5 * (db + np.copysign(sq, db))
            r1 = np.where(ok, qq / np.where(da == 0, 1, da), np.nan)
            r2 = np.where(ok & (qq != 0), dc / np.where(qq == 0, 1, qq), np.nan)
            rl = np.where(lin & (np.abs(db) > 0), -dc / np.where(db == 0, 1, db), np.nan)
        for r in (r1, r2, rl):
            r = r[np.isfinite(r)]
            if r.size:
                zs.append(r)
                vals.append(c[i] + b[i] * r + a[i] * r * r)
    z = np.concatenate(zs)
    v = np.concatenate(vals)
    order = np.lexsort((z, v))
    z, v = z[order], v[order]
    chunk = 2048
    for start in range(0, z.size, chunk):
        zz = z[start:start + chunk]
        env = (c[None, :] + b[None, :] * zz[:, None] + a[None, :] * zz[:, None] ** 2).max(axis=1)
        on = env - v[start:start + chunk] <= 1e-11 * np.maximum(1.0, np.abs(env))
        if on.any():
            hit = np.flatnonzero(on)
            best = env[hit].min()
            near = hit[env[hit] <= best + 1e-12 * max(1.0, abs(best))]
            zstar = float(zz[near].min())
            return zstar, float(np.max(c + b * zstar + a * zstar * zstar))
    raise ArithmeticError("no envelope candidate found")  # unreachable for m >= 1


def _unique_forms(R, idx):
    reps = []
    for i in idx:
        if not any(np.allclose(R[i], R[j], rtol=1e-13, atol=1e-13) for j in reps):
            reps.append(i)
    return reps


def _pair_point(ri, rj):
    def solve(mu):
        return minimizer((1 - mu) * ri + mu * rj)[0]

    def dq(mu):
        x = solve(mu)
        v = np.concatenate([[1.0], x])
        return v @ rj @ v - v @ ri @ v

    lo, hi = dq(0.0), dq(1.0)
    if not (lo > 0 > hi):
        return None
    mu = brentq(dq, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    return solve(mu)


def _triple_point(rs, x0, iters=40):
    x = np.array(x0, dtype=float)
    for _ in range(iters):
        v = np.concatenate([[1.0], x])
        q = [v @ r @ v for r in rs]
        g = [2 * (r[1:, 0] + r[1:, 1:] @ x) for r in rs]
        F = np.array([q[0] - q[1], q[0] - q[2]])
        J = np.array([g[0] - g[1], g[0] - g[2]])
        if abs(np.linalg.det(J)) < 1e-300:
            return None
        step = np.linalg.solve(J, F)
        x = x - step
        if np.linalg.norm(step) <= 1e-15 * max(1.0, np.linalg.norm(x)):
            break
    if not np.all(np.isfinite(x)):
        return None
    return x


def certificate(R, x, tol):
    """Active set at ``x`` and distance from 0 to the hull of active gradients."""
    vals = q_values(R, x)
    top = vals.max()
    act = np.flatnonzero(vals >= top - tol)
    return act, hull_distance(q_gradients(R[act], x)), top


def _subset_min_2d(R, reps, x_hat):
    """Exact minimizer of the envelope of the forms ``reps`` (distinct, indices into ``R``)."""
    Rs = R[reps]

    def env(x):
        return float(q_values(Rs, x).max())

    pts = [np.asarray(x_hat, dtype=float)]
    pts += [minimizer(r)[0] for r in Rs]
    for i, j in combinations(range(len(reps)), 2):
        p = _pair_point(Rs[i], Rs[j])
        if p is not None:
            pts.append(p)
    vals = [env(p) for p in pts]
    best = int(np.argmin(vals))
    tol = 1e-10 * max(1.0, abs(vals[best]))
    _, dist, _ = certificate(Rs, pts[best], tol)
    if dist <= 1e-9 * max(1.0, float(np.abs(Rs).max())) or len(reps) < 3:
        return pts[best], vals[best]
    starts = [pts[best], np.asarray(x_hat, dtype=float)]
    for trio in combinations(range(len(reps)), 3):
        for x0 in starts:
            p = _triple_point(Rs[list(trio)], x0)
            if p is not None:
                pts.append(p)
                vals.append(env(p))
    best = int(np.argmin(vals))
    return pts[best], vals[best]


def envelope_min_2d(R, x_hat, cand, tol_rel=1e-8, max_rounds=100):
    """Exact minimizer of the bivariate envelope by cutting planes.

    The envelope of a candidate subset is minimized exactly over its
    configurations (single vertex, two-form crossing curve, three-form
    intersection); forms lying above that value at the subset optimum are
    added and the subset re-solved until none remain. Returns ``x``, the full
    envelope value there and the subgradient certificate distance.
    """
    scale = max(1.0, float(np.abs(R).max()))
    reps = _unique_forms(R, cand)
    x = np.asarray(x_hat, dtype=float)
    for _ in range(max_rounds):
        x, y = _subset_min_2d(R, reps, x)
        vals = q_values(R, x)
        tol = tol_rel * max(1.0, abs(y))
        over = np.flatnonzero(vals > y + tol)
        if over.size == 0:
            break
        over = over[np.argsort(-vals[over], kind="stable")]
        added = [i for i in _unique_forms(R, over)[:4]
                 if not any(np.allclose(R[i], R[j], rtol=1e-13, atol=1e-13) for j in reps)]
        if not added:
            break
        reps = reps + added
    top = float(q_values(R, x).max())
    _, dist, _ = certificate(R, x, tol_rel * max(1.0, top))
    if dist > 1e-9 * scale:
        log.debug("envelope certificate distance %.3g", dist)
    return x, top, dist


def _support_weights(R, x, support):
    """Nonnegative weights on ``support`` with sum 1 and zero aggregated gradient."""
    G = q_gradients(R[support], x).T
    A = np.vstack([G, np.ones((1, len(support)))])
    b = np.concatenate([np.zeros(G.shape[0]), [1.0]])
    w, res = numerics.nnls(A, b)
    if w.sum() <= 0:
        return None, res
    return w / w.sum(), res


def _polish(p, R, cfg, widen=1):
    """Exact envelope step from the current measure; returns full-length weights or None."""
    r = aggregate_moments(p, R)
    x_hat, qstar = minimizer(r)
    vals = q_values(R, x_hat)
    top = vals.max()
    band = max(4.0 * (top - qstar), 1e-9 * abs(top)) * widen
    cand = np.flatnonzero(vals >= top - band)
    cand = cand[np.argsort(-vals[cand], kind="stable")]
    # relabeled or mirrored blocks often share a form; cap distinct forms only
    cand = np.asarray(_unique_forms(R, cand)[: 12 * widen])
    d = R.shape[1] - 1
    if d == 1:
        z, y = envelope_min_1d(R[cand])
        x = np.array([z])
        y = float(q_values(R, x).max())
    else:
        x, y, _ = envelope_min_2d(R, x_hat, cand)
    tol = cfg.tol_T * max(abs(y), 1e-300)
    vals = q_values(R, x)
    support = np.flatnonzero(vals >= vals.max() - tol)
    w, res = _support_weights(R, x, support)
    if w is None or res > 1e-9:
        return None
    out = np.zeros(len(R))
    out[support] = w
    return out


# ---------------------------------------------------------------------------
# measure-update algorithm


@dataclass
class OptimizeResult:
    weights: np.ndarray
    iterations: int
    theta_star: float
    polished: bool = False


def _initial_weights(R, cfg):
    m = len(R)
    best = None
    for j in range(m):
        if _is_degenerate(R[j]):
            continue
        e = np.zeros(m)
        e[j] = 1.0
        ts = theta_values(e, R).max()
        if best is None or ts < best[0] - cfg.tie_rtol * abs(best[0]):
            best = (ts, [j])
        elif cfg.tie_policy == "average" and abs(ts - best[0]) <= cfg.tie_rtol * abs(best[0]):
            best[1].append(j)
    p = np.zeros(m)
    if best is None:
        # every point mass is singular: start from the uniform measure
        p[:] = 1.0 / m
    else:
        p[best[1]] = 1.0 / len(best[1])
    return p


def optimize_measure(R, cfg=AlgorithmConfig()):
    """Steepest-ascent update of block proportions until ``max theta <= 1 + epsilon``.

    Each step moves mass toward the block(s) with the largest ``theta`` with
    step length ``(theta* - 1)^omega`` (capped at ``cfg.max_step``). With
    ``cfg.polish`` the iteration is interleaved, at doubling intervals, with an
    exact envelope step: the candidate support suggested by the current
    measure is resolved exactly and the weights recomputed from the
    zero-gradient condition. The stopping test is unchanged.
    """
    R = np.asarray(R, dtype=float)
    m = len(R)
    if m == 0:
        raise InvalidInputError("no blocks to optimize over")
    p = _initial_weights(R, cfg)
    it = 0
    next_polish = cfg.polish_start
    polished = False
    while True:
        th = theta_values(p, R)
        ts = float(th.max())
        if ts <= 1.0 + cfg.epsilon:
            return OptimizeResult(p, it, ts, polished)
        if it >= cfg.max_iters:
            raise ConvergenceError(f"no convergence in {cfg.max_iters} iterations (theta*={ts:.12g})", ts, it)
        if cfg.polish and it >= next_polish:
            next_polish *= 2
            p2 = None
            for widen in (1, 4):
                try:
                    p2 = _polish(p, R, cfg, widen)
                except (np.linalg.LinAlgError, DegenerateMeasureError, ArithmeticError) as exc:
                    log.debug("polish failed: %s", exc)
                if p2 is not None:
                    break
            if p2 is not None:
                try:
                    ts2 = float(theta_values(p2, R).max())
                except DegenerateMeasureError:
                    ts2 = np.inf
                if ts2 < ts:
                    p = p2
                    polished = True
                    continue
        if cfg.tie_policy == "average":
            ties = th >= ts - cfg.tie_rtol * abs(ts)
            e = ties / ties.sum()
        else:
            e = np.zeros(m)
            e[int(np.argmax(th))] = 1.0
        alpha = min((ts - 1.0) ** cfg.omega, cfg.max_step)
        p = alpha * e + (1.0 - alpha) * p
        it += 1


# ---------------------------------------------------------------------------
# minimax solution


@dataclass
class MinimaxSolution:
    model_kind: ModelKind
    k: int
    t: int
    blocks: list
    moments: np.ndarray = field(repr=False)
    x_star: np.ndarray
    y_star: float
    support: list  # indices into blocks
    q_at_x: np.ndarray = field(repr=False)
    optimal_measure: Measure
    residuals: dict
    iterations: int = 0
    kernel: object = field(default=None, repr=False)

    @property
    def support_blocks(self):
        return [self.blocks[i] for i in self.support]

    @property
    def z_star(self):
        return float(self.x_star[0]) if self.model_kind is ModelKind.UNDIRECTIONAL else None

    def to_dict(self):
        w = {b.representative: p for b, p in zip(self.optimal_measure.items, self.optimal_measure.weights)}
        sup = []
        for i in self.support:
            rep = self.blocks[i].representative
            sup.append({"rep": list(rep), "p": float(w.get(rep, 0.0)), "q_at_x": float(self.q_at_x[i])})
        return {
            "model": self.model_kind.value,
            "k": self.k,
            "t": self.t,
            "x_star": [float(v) for v in self.x_star],
            "y_star": float(self.y_star),
            "support": sup,
            "residual": float(self.residuals.get("proportions", 0.0)),
            "subgradient_distance": float(self.residuals.get("subgradient", 0.0)),
            "theta_star": float(self.residuals.get("theta_star", float("nan"))),
            "iterations": int(self.iterations),
        }


def minimax_solve(blocks, R, model_kind, t, cfg=AlgorithmConfig()):
    """Minimize the envelope of the blocks' quadratics and return ``x*``, ``y*``,
    the support set and an optimal block measure.

    Directional forms go through :func:`optimize_measure` and the minimizer of
    the optimized aggregate, then an exact envelope polish with a subgradient
    certificate. Undirectional forms use exact univariate envelope candidates.
    """
    model_kind = ModelKind(model_kind)
    R = np.asarray(R, dtype=float)
    if len(blocks) == 0:
        raise InvalidInputError("no blocks")
    d = R.shape[1] - 1
    k = blocks[0].k
    residuals = {}
    iterations = 0
    if d == 1:
        z, _ = envelope_min_1d(R)
        x = np.array([z])
    else:
        opt = optimize_measure(R, cfg)
        iterations = opt.iterations
        residuals["theta_star"] = opt.theta_star
        x_hat, _ = minimizer(aggregate_moments(opt.weights, R))
        vals = q_values(R, x_hat)
        best = None
        for widen in (1, 4, 16):
            band = max(1e-6 * abs(vals.max()), 1e-12) * widen**2
            cand = np.flatnonzero(vals >= vals.max() - band)
            if cand.size > 12 * widen:
                cand = cand[np.argsort(-vals[cand], kind="stable")[: 12 * widen]]
            x, y, dist = envelope_min_2d(R, x_hat, cand, tol_rel=cfg.tol_T)
            if best is None or y < best[1]:
                best = (x, y, dist)
            if dist <= 1e-9 * max(1.0, float(np.abs(R).max())):
                break
        x = best[0]
    vals = q_values(R, x)
    y = float(vals.max())
    tol = cfg.tol_T * abs(y)
    support = [int(i) for i in np.flatnonzero(vals >= y - tol)]
    residuals["subgradient"] = hull_distance(q_gradients(R[support], x))
    w, res = _support_weights(R, x, np.array(support))
    residuals["support_nnls"] = res
    if w is None:
        raise DegenerateMeasureError("could not build weights on the support")
    p = np.zeros(len(R))
    p[support] = w
    if d == 1:
        residuals["theta_star"] = float(theta_values(p, R).max())
    keep = p > 0
    measure = Measure([b for b, kk in zip(blocks, keep) if kk], p[keep] / p[keep].sum(), t, "block")
    if model_kind is ModelKind.UNDIRECTIONAL:
        x_out = np.array([x[0], x[0]])
    else:
        x_out = np.asarray(x, dtype=float)
    return MinimaxSolution(model_kind, k, t, list(blocks), R, x_out, y, support, vals, measure, residuals, iterations)


def solve(k, t, covariance=None, model_kind=ModelKind.DIRECTIONAL, cfg=AlgorithmConfig(), allow_indefinite=False,
          kernel=None):
    """Enumerate blocks, build moments and solve; the one-call entry point."""
    if kernel is None:
        kernel = build_kernel(covariance or CovarianceSpec.identity(), k, allow_indefinite)
    blocks = enumerate_blocks(k, t)
    R = moments_for([b.representative for b in blocks], kernel, t, model_kind)
    sol = minimax_solve(blocks, R, model_kind, t, cfg)
    sol.kernel = kernel
    return sol


# ---------------------------------------------------------------------------
# linear-equations system for the proportions


def orbit_average(M):
    """Average of ``P' M P`` over all ``t!`` relabelings ``P`` (completely symmetric part)."""
    M = np.asarray(M, dtype=float)
    t = M.shape[-1]
    dmean = np.trace(M, axis1=-2, axis2=-1) / t
    omean = (M.sum(axis=(-2, -1)) - dmean * t) / (t * (t - 1))
    eye = np.eye(t)
    return (dmean - omean)[..., None, None] * eye + omean[..., None, None] * np.ones((t, t))


def components_for(s, kernel, t, model_kind, symmetrize=False):
    """Information components as (C00, C0N, CNN) with N the neighbor families of the model."""
    C = info_components(s, kernel, t)
    if ModelKind(model_kind) is ModelKind.UNDIRECTIONAL:
        c00 = C[0, 0]
        c0n = (C[0, 1] + C[0, 2])[None]
        cnn = (C[1, 1] + C[1, 2] + C[2, 1] + C[2, 2])[None, None]
    else:
        c00 = C[0, 0]
        c0n = C[0, 1:]
        cnn = C[1:, 1:]
    if symmetrize:
        c00, c0n, cnn = orbit_average(c00), orbit_average(c0n), orbit_average(cnn)
    return c00, c0n, cnn


def equation_columns(seqs, kernel, t, model_kind, x_star, y_star, symmetrize=False):
    """One column per sequence holding the stacked residual blocks

    ``C00 + sum_j x_j C0j B``  minus the target ``y* B / (t-1)``, and
    ``Cj0 + sum_l x_l Cjl B``  for each neighbor family ``j``.
    """
    B = numerics.centering(t)
    target = y_star * B / (t - 1)
    x = np.atleast_1d(x_star)
    cols = []
    for s in seqs:
        c00, c0n, cnn = components_for(s, kernel, t, model_kind, symmetrize)
        d = c0n.shape[0]
        first = c00 + sum(x[j] * c0n[j] @ B for j in range(d)) - target
        rest = [c0n[j].T + sum(x[l] * cnn[j, l] @ B for l in range(d)) for j in range(d)]
        cols.append(np.concatenate([first.ravel()] + [r.ravel() for r in rest]))
    return np.array(cols).T


@dataclass
class ProportionResult:
    measure: Measure
    residual: float
    certified: bool


def solve_proportions(sol, kernel, level="block", threshold=1e-8, dual_average=None):
    """Nonnegative proportions on the support solving the linear optimality system.

    ``level='block'`` uses orbit-averaged (completely symmetric) components,
    i.e. symmetric measures; ``level='sequence'`` searches over every
    relabeling in the support orbits and can return asymmetric measures. Among
    many solutions the one returned is whichever the NNLS pivot order reaches,
    except that for persymmetric kernels (``dual_average`` defaults to
    ``kernel.is_persymmetric``) block weights are averaged with those of the
    reversed blocks. The dual of an optimal measure is then optimal too, so
    the average is, and it is optimal under both neighbor models at once.
    """
    t = sol.t
    x = sol.x_star[:1] if sol.model_kind is ModelKind.UNDIRECTIONAL else sol.x_star
    if level == "block":
        items = [sol.blocks[i] for i in sol.support]
        seqs = [b.representative for b in items]
        A = equation_columns(seqs, kernel, t, sol.model_kind, x, sol.y_star, symmetrize=True)
    elif level == "sequence":
        items = [s for i in sol.support for s in sol.blocks[i].members()]
        seqs = items
        A = equation_columns(seqs, kernel, t, sol.model_kind, x, sol.y_star)
    else:
        raise InvalidInputError(f"unknown level {level!r}")
    A = np.vstack([A, np.ones((1, A.shape[1]))])
    b = np.zeros(A.shape[0])
    b[-1] = 1.0
    w, res = numerics.nnls(A, b)
    if w.sum() <= 0:
        raise DegenerateMeasureError("no nonnegative solution")
    w = w / w.sum()
    if dual_average is None:
        dual_average = kernel.is_persymmetric
    if dual_average and level == "block":
        pos = {it.representative: i for i, it in enumerate(items)}
        mirror = [pos.get(it.dual().representative) for it in items]
        if None not in mirror:
            wd = 0.5 * (w + w[mirror])
            if np.linalg.norm(A @ wd - b) <= max(np.linalg.norm(A @ w - b), threshold):
                w = wd
    res = float(np.linalg.norm(A @ w - b))
    keep = w > 0
    measure = Measure([it for it, kk in zip(items, keep) if kk], w[keep], t, level)
    return ProportionResult(measure, res, res <= threshold)


# ---------------------------------------------------------------------------
# verification


def measure_information(measure, kernel, model_kind):
    """Information matrix ``C_xi`` (t x t) of a measure, Schur complement with pseudoinverse."""
    t = measure.t
    seqs = measure.sequences()
    sym = measure.level == "block"
    c00 = 0
    c0n = 0
    cnn = 0
    for s, w in zip(seqs, measure.weights):
        a, b, c = components_for(s, kernel, t, model_kind, symmetrize=sym)
        c00 = c00 + w * a
        c0n = c0n + w * b
        cnn = cnn + w * c
    d = c0n.shape[0]
    e01 = np.hstack([c0n[j] for j in range(d)])
    e11 = np.block([[cnn[i, j] for j in range(d)] for i in range(d)])
    C = c00 - e01 @ numerics.pinv(numerics.symmetrize(e11)) @ e01.T
    return numerics.symmetrize(C)


@dataclass
class VerifyReport:
    is_optimal: bool
    q_star: float
    y_star: float
    gap: float
    theta_max: float
    info_distance: float

    def to_dict(self):
        return {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v)) for k, v in self.__dict__.items()}


def verify_measure(measure, kernel, model_kind, y_star=None, solution=None, cfg=AlgorithmConfig()):
    """Check universal optimality of ``measure`` via ``C_xi = y* B_t / (t-1)``.

    Also reports ``q*`` of the measure's aggregated moments, the gap to ``y*``
    and the largest ``theta`` over all blocks.
    """
    model_kind = ModelKind(model_kind)
    t = measure.t
    k = measure.k
    if y_star is None:
        if solution is None:
            solution = solve(k, t, model_kind=model_kind, cfg=cfg, kernel=kernel)
        y_star = solution.y_star
    blocks = solution.blocks if solution is not None else enumerate_blocks(k, t)
    R = moments_for([b.representative for b in blocks], kernel, t, model_kind)
    Rm = moments_for(measure.sequences(), kernel, t, model_kind)
    r = aggregate_moments(measure.weights, Rm)
    if _is_degenerate(r):
        raise DegenerateMeasureError("measure has singular moment matrix")
    _, qstar = minimizer(r)
    ri = np.linalg.inv(r)
    qi = np.linalg.inv(r[1:, 1:])
    th = np.einsum("nij,ji->n", R, ri) - np.einsum("nij,ji->n", R[:, 1:, 1:], qi)
    C = measure_information(measure, kernel, model_kind)
    dist = float(np.linalg.norm(C - y_star * numerics.centering(t) / (t - 1)))
    return VerifyReport(dist <= 1e-8 * abs(y_star), qstar, float(y_star), float(y_star - qstar), float(th.max()), dist)


# ---------------------------------------------------------------------------
# closed forms for type-H kernels with t < k


@dataclass(frozen=True)
class ClosedFormSolution:
    k: int
    t: int
    case: str
    z_star: Fraction
    y_star: Fraction
    proportions: dict = None  # block representative -> Fraction, case "ii" only

    @property
    def x_star(self):
        return np.array([float(self.z_star)] * 2)

    def in_support(self, block):
        """Whether ``block`` (a SymmetricBlock or sequence) attains the envelope at ``z*``."""
        rep = block.representative if isinstance(block, SymmetricBlock) else canonicalize(block, self.t).representative
        if self.case == "i":
            u = self.k // self.t
            freq = [rep.count(m) for m in range(1, self.t + 1)]
            return all(f in (u, u + 1) for f in freq)
        return rep in self.proportions


def closed_form(k, t):
    """Exact ``z*``, ``y*`` and support for unit type-H kernels, ``2 <= t <= k-1``."""
    if not 2 <= t <= k - 1:
        raise InvalidInputError(f"closed forms cover 2 <= t <= k-1 only (k={k}, t={t})")
    if t <= k - 2:
        u, v = divmod(k, t)
        y = Fraction(k * (t - 1), t) - Fraction(v * (t - v), k * t)
        return ClosedFormSolution(k, t, "i", Fraction(0), y)
    denom = k * (k - 3) + Fraction(1, t)
    z = 1 / (2 * denom)
    y = k - 1 - Fraction(2, k) - 1 / (2 * k * denom)
    s0 = (1, 1) + tuple(range(2, t + 1))
    dual = canonicalize(s0[::-1], t).representative
    return ClosedFormSolution(k, t, "ii", z, y, {s0: Fraction(1, 2), dual: Fraction(1, 2)})


# ---------------------------------------------------------------------------
# directional vs undirectional


def undirectional_consistency(kernel, k, t, cfg=AlgorithmConfig(), x_tol=1e-7, y_tol=1e-8):
    """Compare directional and undirectional solutions on the same kernel.

    For persymmetric kernels the report carries pass/fail flags; otherwise it
    only records the observed differences.
    """
    sd = solve(k, t, model_kind=ModelKind.DIRECTIONAL, cfg=cfg, kernel=kernel)
    su = solve(k, t, model_kind=ModelKind.UNDIRECTIONAL, cfg=cfg, kernel=kernel)
    report = {
        "persymmetric": kernel.is_persymmetric,
        "x_star": [float(v) for v in sd.x_star],
        "z_star": su.z_star,
        "y_star": sd.y_star,
        "y0": su.y_star,
        "x_gap": float(abs(sd.x_star[0] - sd.x_star[1])),
        "z_gap": float(np.max(np.abs(sd.x_star - su.z_star))),
        "y_gap": float(su.y_star - sd.y_star),
        "support_directional": [sd.blocks[i].representative for i in sd.support],
        "support_undirectional": [su.blocks[i].representative for i in su.support],
    }
    report["same_support"] = report["support_directional"] == report["support_undirectional"]
    if kernel.is_persymmetric:
        report["consistent"] = bool(
            report["z_gap"] <= x_tol and abs(report["y_gap"]) <= y_tol * max(1.0, abs(sd.y_star)) and report["same_support"]
        )
    return report
