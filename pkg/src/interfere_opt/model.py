"""Covariance kernels, design matrices and per-sequence information quantities
for the neighbor-effect block model.

Three effect families enter a block of ``k`` plots: direct (index 0), left
neighbor (1) and right neighbor (2). For a single sequence ``s`` with
incidence matrix ``T`` the design matrices are ``G0 = T``, ``G1 = H T`` and
``G2 = H' T`` with ``H`` the sub-diagonal shift (no guard plots), and

    C_ij = Gi' Bt Gj,        c_ij = tr(B_t C_ij B_t),

where ``Bt`` (``btilde``) is the within-block kernel obtained from the
covariance. The 3x3 matrix ``(c_ij)`` of a sequence is its *moment matrix*;
the solver only ever needs these scalars. In the undirectional model the two
neighbor families merge into ``G1 + G2`` and the moment matrix shrinks to
2x2 via :func:`undirectional_moments`.
"""

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from . import numerics
from .errors import InvalidCovarianceError, InvalidInputError
from .sequences import check_sequence, stats

PD_RTOL = 1e-12


class ModelKind(str, Enum):
    DIRECTIONAL = "directional"
    UNDIRECTIONAL = "undirectional"


@dataclass(frozen=True)
class CovarianceSpec:
    kind: str = "identity"
    a: float = 1.0
    b: tuple = None
    eta: float = 0.0
    rows: tuple = None

    def __post_init__(self):
        if self.kind not in ("identity", "type_h", "banded1", "custom"):
            raise InvalidInputError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "type_h" and not self.a > 0:
            raise InvalidInputError("type_h covariance needs a > 0")
        if self.kind == "custom" and self.rows is None:
            raise InvalidInputError("custom covariance needs 'rows'")

    @classmethod
    def identity(cls):
        return cls("identity")

    @classmethod
    def banded1(cls, eta):
        return cls("banded1", eta=float(eta))

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "kind" not in d:
            raise InvalidInputError("covariance JSON must be an object with a 'kind' field")
        kind = d["kind"]
        if kind == "identity":
            return cls("identity")
        if kind == "type_h":
            b = d.get("b")
            return cls("type_h", a=float(d.get("a", 1.0)), b=None if b is None else tuple(map(float, b)))
        if kind == "banded1":
            if "eta" not in d:
                raise InvalidInputError("banded1 covariance needs 'eta'")
            return cls("banded1", eta=float(d["eta"]))
        if kind == "custom":
            rows = d.get("rows")
            if rows is None:
                raise InvalidInputError("custom covariance needs 'rows'")
            return cls("custom", rows=tuple(tuple(map(float, r)) for r in rows))
        raise InvalidInputError(f"unknown covariance kind {kind!r}")

    @classmethod
    def parse(cls, text):
        """Accept a bare kind name, inline JSON, or ``@path`` to a JSON file."""
        text = text.strip()
        if text.startswith("@"):
            text = Path(text[1:]).read_text()
        elif not text.startswith("{"):
            return cls.from_dict({"kind": text})
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"covariance is not valid JSON: {exc}") from None

    def to_dict(self):
        if self.kind == "identity":
            return {"kind": "identity"}
        if self.kind == "type_h":
            out = {"kind": "type_h", "a": self.a}
            if self.b is not None:
                out["b"] = list(self.b)
            return out
        if self.kind == "banded1":
            return {"kind": "banded1", "eta": self.eta}
        return {"kind": "custom", "rows": [list(r) for r in self.rows]}

    def matrix(self, k):
        if self.kind == "identity":
            return np.eye(k)
        if self.kind == "type_h":
            b = np.zeros(k) if self.b is None else np.asarray(self.b, dtype=float)
            if b.shape != (k,):
                raise InvalidInputError(f"type_h 'b' must have length k={k}")
            one = np.ones(k)
            return self.a * np.eye(k) + np.outer(b, one) + np.outer(one, b)
        if self.kind == "banded1":
            return np.eye(k) + self.eta * (np.eye(k, k, 1) + np.eye(k, k, -1))
        m = np.asarray(self.rows, dtype=float)
        if m.shape != (k, k):
            raise InvalidInputError(f"custom covariance must be {k}x{k}, got {m.shape}")
        return numerics.as_symmetric(m, atol=1e-12 * max(1.0, np.abs(m).max()))

    def banded1_bound(self, k):
        """Largest |eta| keeping the tridiagonal covariance positive definite."""
        return 1.0 / (2.0 * math.cos(math.pi / (k + 1)))


@dataclass(frozen=True)
class KernelMatrix:
    btilde: np.ndarray = field(repr=False)
    is_type_h: bool
    scale: float
    is_persymmetric: bool
    indefinite: bool = False

    @property
    def k(self):
        return self.btilde.shape[0]


def _kernel_from_inverse(sinv):
    k = sinv.shape[0]
    one = np.ones(k)
    col = sinv @ one
    denom = one @ col
    if abs(denom) <= 1e-14 * np.abs(sinv).max():
        raise InvalidCovarianceError("1' S^-1 1 vanishes; kernel undefined")
    return numerics.symmetrize(sinv - np.outer(col, col) / denom)


def build_kernel(spec, k, allow_indefinite=False):
    """Kernel ``Bt = S^-1 - S^-1 J S^-1 / (1' S^-1 1)`` for covariance ``S``.

    With ``allow_indefinite`` a symmetric but non-positive-definite ``S`` is
    accepted and its pseudoinverse takes the place of ``S^-1``.
    """
    if k < 2:
        raise InvalidInputError("block size must be at least 2")
    sigma = spec.matrix(k)
    w = np.linalg.eigvalsh(sigma)
    pd = w[0] > PD_RTOL * max(abs(w[-1]), abs(w[0]))
    if not pd and not allow_indefinite:
        hint = ""
        if spec.kind == "banded1":
            hint = f" (banded1 needs |eta| < {spec.banded1_bound(k):.6g} at k={k})"
        raise InvalidCovarianceError(f"covariance is not positive definite{hint}")

    bk = numerics.centering(k)
    if spec.kind == "identity" and pd:
        bt, is_h, a = bk, True, 1.0
    elif spec.kind == "type_h" and pd:
        bt, is_h, a = bk / spec.a, True, spec.a
    else:
        sinv = np.linalg.inv(sigma) if pd else numerics.pinv(sigma)
        bt = _kernel_from_inverse(sinv)
        # numerically detect proportionality to the centering matrix
        a = (1.0 - 1.0 / k) / bt[0, 0] if bt[0, 0] != 0 else 0.0
        is_h = pd and a > 0 and np.allclose(bt, bk / a, rtol=0, atol=1e-12 * np.abs(bt).max())
        if is_h:
            bt = bk / a
        else:
            a = float("nan")
    flip = bt[::-1, ::-1]
    persym = bool(np.allclose(bt, flip.T, rtol=0, atol=1e-12 * max(1.0, np.abs(bt).max())))
    return KernelMatrix(bt, bool(is_h), float(a), persym, indefinite=not pd)


def design_matrices(s, t):
    """Direct, left-neighbor and right-neighbor incidence matrices (each ``k x t``)."""
    s = check_sequence(s, t)
    k = len(s)
    T = np.zeros((k, t))
    T[np.arange(k), np.asarray(s) - 1] = 1.0
    H = np.eye(k, k, -1)
    return T, H @ T, H.T @ T


def info_components(s, kernel, t):
    """The ``3 x 3`` grid of ``t x t`` blocks ``C[i, j] = Gi' Bt Gj``."""
    s = check_sequence(s, t)
    if len(s) != kernel.k:
        raise InvalidInputError(f"sequence length {len(s)} != kernel dimension {kernel.k}")
    G = design_matrices(s, t)
    bt = kernel.btilde
    return np.array([[G[i].T @ bt @ G[j] for j in range(3)] for i in range(3)])


def _shift_kernels(bt):
    # M_ij = S_i' Bt S_j with S_0 = I, S_1 = H, S_2 = H'
    k = bt.shape[0]
    H = np.eye(k, k, -1)
    S = (np.eye(k), H, H.T)
    return np.array([[S[i].T @ bt @ S[j] for j in range(3)] for i in range(3)])


def moment_matrices(seqs, kernel, t):
    """Stacked ``(m, 3, 3)`` moment matrices for many sequences at once.

    Uses ``T B_t T' = D - J_k / t`` where ``D[a, b] = [s_a == s_b]`` so that
    ``c_ij = <S_i' Bt S_j, D> - 1' S_i' Bt S_j 1 / t`` and no ``t x t`` matrix
    is ever formed.
    """
    arr = np.asarray([check_sequence(s, t) for s in seqs], dtype=int)
    if arr.ndim != 2 or arr.shape[1] != kernel.k:
        raise InvalidInputError("sequence length does not match kernel dimension")
    M = _shift_kernels(kernel.btilde)
    D = (arr[:, :, None] == arr[:, None, :]).astype(float)
    out = np.einsum("ijab,nab->nij", M, D) - M.sum(axis=(2, 3))[None] / t
    return 0.5 * (out + out.transpose(0, 2, 1))


@dataclass(frozen=True)
class QuadForm:
    """``q(x) = c00 + 2 ell'x + x'Q x`` together with the full moment matrix."""

    c00: float
    ell: np.ndarray
    q: np.ndarray
    r3: np.ndarray

    @classmethod
    def from_moments(cls, r):
        r = np.asarray(r, dtype=float)
        return cls(float(r[0, 0]), r[0, 1:].copy(), r[1:, 1:].copy(), r.copy())

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.c00 + 2 * self.ell @ x + x @ self.q @ x)

    def gradient(self, x):
        return 2 * (self.ell + self.q @ np.atleast_1d(x))

    def minimum(self):
        """``(argmin, min)`` of the strictly convex quadratic."""
        x = -np.linalg.solve(self.q, self.ell)
        return x, float(self.c00 + self.ell @ x)


def quad_form(s, kernel, t):
    return QuadForm.from_moments(moment_matrices([s], kernel, t)[0])


UNDIRECTIONAL_MAP = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 1.0]])


def undirectional_moments(r3):
    """Collapse 3x3 moment matrices to the 2x2 ones of the merged-neighbor model.

    ``[[c00, c01 + c02], [c01 + c02, c11 + 2 c12 + c22]]``; the univariate
    quadratic is then ``q(z) = c00 + 2 (c01 + c02) z + (c11 + 2 c12 + c22) z^2``.
    """
    P = UNDIRECTIONAL_MAP
    return np.einsum("ai,...ab,bj->...ij", P, np.asarray(r3, dtype=float), P)


def moments_for(seqs, kernel, t, model_kind):
    r = moment_matrices(seqs, kernel, t)
    if ModelKind(model_kind) is ModelKind.UNDIRECTIONAL:
        r = undirectional_moments(r)
    return r


def type_h_coeffs(s, a, t):
    """Coefficients ``(q0, q1, q2)`` of ``q(z) = q0 + q1 z + q2 z^2`` under a
    type-H kernel ``B_k / a``, from counting statistics alone.

    ``q1`` is the full linear coefficient, i.e. ``2 (c01 + c02)``; the counting
    formula below already carries that factor 2 even though it is sometimes
    written as if it were ``c01 + c02``. The generic moment route is the
    reference (see tests).
    """
    if not a > 0:
        raise InvalidInputError("type-H scale must be positive")
    s = check_sequence(s, t)
    st = stats(s, t)
    k = len(s)
    f1 = st.freq[st.first_label - 1]
    fk = st.freq[st.last_label - 1]
    same_ends = 1 if st.first_label == st.last_label else 0
    q0 = k - st.chi / k
    q1 = 2 * (2 * k * st.phi + f1 + fk - 2 * st.chi) / k
    q2 = 2 * (st.varphi + k - 1 - (k + t - 2) / (k * t)) - 2 * (2 * st.chi - 2 * f1 - 2 * fk + same_ends) / k
    return q0 / a, q1 / a, q2 / a


def kernel_type_h_coeffs(s, kernel, t):
    if not kernel.is_type_h:
        raise InvalidInputError("closed-form coefficients need a type-H kernel")
    return type_h_coeffs(s, kernel.scale, t)


@dataclass(frozen=True)
class MomentSet:
    c00: float
    ell: np.ndarray
    q: np.ndarray
    r: np.ndarray

    @property
    def q_star(self):
        """``c00 - ell' Q^-1 ell``: the minimum of the aggregated quadratic."""
        return float(self.c00 - self.ell @ np.linalg.solve(self.q, self.ell))


def check_weights(p):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(~np.isfinite(p)):
        raise InvalidInputError("proportions must be a finite vector")
    if np.any(p < 0):
        raise InvalidInputError("proportions must be nonnegative")
    if abs(p.sum() - 1.0) > 1e-12 * max(1, p.size):
        raise InvalidInputError(f"proportions sum to {p.sum()!r}, not 1")
    return p


def aggregate(p, moments):
    """Convex combination of per-block moment matrices."""
    p = check_weights(p)
    moments = np.asarray(moments, dtype=float)
    if moments.shape[0] != p.size:
        raise InvalidInputError("one moment matrix per proportion required")
    r = np.einsum("n,nij->ij", p, moments)
    return MomentSet(float(r[0, 0]), r[0, 1:].copy(), r[1:, 1:].copy(), r)
