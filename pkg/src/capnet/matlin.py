"""Dense matrix primitives: SVD, matrix norms, and Euclidean norm-ball projections.

Matrices are 2-D float64 numpy arrays with finite entries, validated through
:func:`as_matrix`.  Every function here is pure: arrays are treated as
immutable and are never modified in place, so values are safe to share
between concurrent workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericalError

MAX_SIDE = 1024        # documented working range for svd()
MAX_SCHATTEN_P = 64.0  # beyond this the Schatten norm is numerically spectral


def as_matrix(entries, rows: int | None = None, cols: int | None = None) -> np.ndarray:
    """Validated matrix constructor.

    Accepts a 2-D array-like, or a flat row-major sequence together with
    explicit ``rows``/``cols``.  Rejects empty shapes and non-finite entries.
    """
    a = np.asarray(entries, dtype=np.float64)
    if rows is not None:
        if cols is None:
            raise ValueError("rows given without cols")
        a = a.reshape(rows, cols)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix dimensions must be positive, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    return a


@dataclass(frozen=True)
class NormKind:
    """A matrix norm selector.

    tag is one of ``spectral``, ``frobenius``, ``schatten`` (with exponent
    ``p``), ``rows_l2_sum`` (sum of Euclidean row norms, i.e. the (2,1)-norm
    of the transpose) or ``rows_l1_max`` (largest l1 row norm).
    """

    tag: str
    p: float | None = None

    def __post_init__(self):
        if self.tag not in ("spectral", "frobenius", "schatten", "rows_l2_sum", "rows_l1_max"):
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if self.tag == "schatten":
            if self.p is None:
                raise ValueError("schatten norm requires an exponent p")
            _check_schatten_p(self.p)
        elif self.p is not None:
            raise ValueError(f"norm {self.tag!r} takes no exponent")


SPECTRAL = NormKind("spectral")
FROBENIUS = NormKind("frobenius")
ROWS_L2_SUM = NormKind("rows_l2_sum")
ROWS_L1_MAX = NormKind("rows_l1_max")


def _check_schatten_p(p: float) -> None:
    if not p >= 1.0:
        raise ValueError(f"schatten exponent must satisfy p >= 1, got {p}")
    if p > MAX_SCHATTEN_P:
        raise ValueError(
            f"schatten exponent {p} exceeds {MAX_SCHATTEN_P:g}; values this large are "
            "numerically indistinguishable from the spectral norm, use SPECTRAL instead"
        )


def schatten(p: float) -> NormKind:
    """Schatten-p norm selector; p = inf maps to the spectral tag."""
    p = float(p)
    if math.isinf(p) and p > 0:
        return SPECTRAL
    return NormKind("schatten", p)


@dataclass(frozen=True)
class BallConstraint:
    """A norm ball ``{W : norm(W, kind) <= radius}`` with radius > 0."""

    kind: NormKind
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"ball radius must be positive, got {self.radius}")


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``W = left @ diag(singular) @ right.T``.

    left is rows x k and right is cols x k, both with orthonormal columns;
    singular values are non-negative and non-increasing; k = min(rows, cols).
    """

    left: np.ndarray
    singular: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular) @ self.right.T


def svd(w) -> SvdResult:
    """Full-accuracy thin SVD of a dense matrix (sides at most MAX_SIDE).

    Deterministic for a fixed input.  Non-convergence of the underlying
    solver raises :class:`NumericalError` rather than returning garbage.
    """
    w = as_matrix(w)
    if max(w.shape) > MAX_SIDE:
        raise ValueError(f"matrix side {max(w.shape)} exceeds supported range {MAX_SIDE}")
    try:
        u, s, vh = np.linalg.svd(w, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for a {w.shape} matrix") from exc
    return SvdResult(left=u, singular=np.maximum(s, 0.0), right=vh.T)


def singular_values(w) -> np.ndarray:
    """Singular values of w, non-increasing."""
    w = as_matrix(w)
    if max(w.shape) > MAX_SIDE:
        raise ValueError(f"matrix side {max(w.shape)} exceeds supported range {MAX_SIDE}")
    try:
        s = np.linalg.svd(w, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge for a {w.shape} matrix") from exc
    return np.maximum(s, 0.0)


def matrix_norm(w, kind: NormKind) -> float:
    """Evaluate the selected matrix norm of w."""
    w = as_matrix(w)
    if kind.tag == "frobenius":
        return float(np.linalg.norm(w))
    if kind.tag == "rows_l2_sum":
        return float(np.sqrt((w * w).sum(axis=1)).sum())
    if kind.tag == "rows_l1_max":
        return float(np.abs(w).sum(axis=1).max())
    s = singular_values(w)
    if kind.tag == "spectral":
        return float(s[0])
    # schatten: normalise by the top value so s**p cannot overflow for large p
    top = float(s[0])
    if top == 0.0:
        return 0.0
    return top * float(np.sum((s / top) ** kind.p) ** (1.0 / kind.p))


def rank1_approx(w) -> tuple[np.ndarray, float]:
    """Best rank-1 approximation and its spectral error.

    Returns ``(s1 * u1 v1^T, s2)`` built from the leading singular triple;
    the error equals the second singular value (0 when min(rows, cols) = 1).
    The approximation never exceeds the input in spectral or any Schatten
    norm.  A zero matrix returns (zeros, 0.0); any leading singular pair is
    acceptable under ties, and the deterministic solver ordering picks one.
    """
    w = as_matrix(w)
    if not w.any():
        return np.zeros_like(w), 0.0
    r = svd(w)
    approx = r.singular[0] * np.outer(r.left[:, 0], r.right[:, 0])
    err = float(r.singular[1]) if r.singular.size > 1 else 0.0
    return approx, err


# ---------------------------------------------------------------------------
# Euclidean (Frobenius-distance) projections onto norm balls
# ---------------------------------------------------------------------------

def project_l1_ball(v, radius: float) -> np.ndarray:
    """Project a vector onto the l1 ball by the sorted-threshold rule."""
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, u.size + 1)
    rho = np.nonzero(u - (css - radius) / ks > 0)[0][-1]
    theta = (css[rho] - radius) / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


def _lp_vec_norm(a: np.ndarray, p: float) -> float:
    top = float(np.max(a, initial=0.0))
    if top == 0.0:
        return 0.0
    return top * float(np.sum((a / top) ** p) ** (1.0 / p))


def _lp_shrink(a: np.ndarray, p: float, lam: float) -> np.ndarray:
    """Solve x + lam*p*x^(p-1) = a coordinate-wise on [0, a] (a >= 0).

    Safeguarded Newton: iterates stay inside a per-coordinate bracket, and
    any step that leaves it, or whose residual/derivative overflowed, falls
    back to bisection.  The bracket keeps halving on fallback, so large p
    (where x^(p-1) overflows far from the root) still converges.
    """
    if lam == 0.0:
        return a.copy()
    scale = max(1.0, float(a.max(initial=0.0)))
    # the root also satisfies lam*p*x^(p-1) <= a, which gives a far tighter
    # bracket top than a itself when p is large (Newton would otherwise crawl
    # down x^(p-1) at a relative rate of only 1/(p-1) per step)
    with np.errstate(over="ignore", divide="ignore"):
        cap = np.power(a / (lam * p), 1.0 / (p - 1.0))
    hi = np.minimum(a, np.where(np.isfinite(cap), cap, a))
    if p >= 2.0:
        # f is convex and increasing, f(cap) >= 0, and iterates never leave
        # [root, cap], so plain Newton from the cap descends monotonically
        # with nothing able to overflow
        lamp = lam * p
        x = hi
        for _ in range(80):
            xq = x ** (p - 2.0)
            f = x + lamp * xq * x - a
            nxt = x - f / (1.0 + lamp * (p - 1.0) * xq)
            done = float(np.max(np.abs(nxt - x), initial=0.0)) <= 1e-16 * scale
            x = nxt
            if done:
                break
        return np.maximum(x, 0.0)
    lo = np.zeros_like(a)
    x = np.minimum(a / (1.0 + lam * p), hi)
    for _ in range(110):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            f = x + lam * p * np.power(x, p - 1.0) - a
            df = 1.0 + lam * p * (p - 1.0) * np.power(x, p - 2.0)
            step = f / df
        sign = np.where(np.isnan(f), 1.0, np.sign(f))  # overflowed residual is positive
        f = np.where(np.isnan(f), np.inf, f)
        if np.max(np.abs(np.where(np.isfinite(f), f, 1.0)), initial=0.0) <= 1e-13 * scale:
            break
        lo = np.where(sign < 0, x, lo)
        hi = np.where(sign > 0, x, hi)
        nxt = x - step
        bad = ~np.isfinite(nxt) | (nxt <= lo) | (nxt >= hi) | ~np.isfinite(f)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        x = nxt
        if np.max(hi - lo, initial=0.0) <= 1e-15 * scale:
            break
    return np.maximum(x, 0.0)


def project_lp_ball(v, p: float, radius: float) -> np.ndarray:
    """Project a vector onto the l_p ball, 1 <= p <= MAX_SCHATTEN_P.

    p = 1 uses the sorted-threshold rule; general p runs an outer bisection
    on the Lagrange multiplier (tolerance 1e-10) with a per-coordinate
    Newton inner solve.
    """
    _check_schatten_p(p)
    if p == 1.0:
        return project_l1_ball(v, radius)
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    if _lp_vec_norm(a, p) <= radius:
        return v.copy()
    lo, hi = 0.0, float(a.max()) / p
    # the textbook bracket max(a)/p can undershoot for p > 1; widen until feasible
    while _lp_vec_norm(_lp_shrink(a, p, hi), p) > radius:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _lp_vec_norm(_lp_shrink(a, p, mid), p) > radius:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-10 * max(1.0, hi):
            break
    return np.sign(v) * _lp_shrink(a, p, hi)


def project_to_ball(w, c: BallConstraint) -> np.ndarray:
    """Euclidean (Frobenius-distance) projection of w onto the ball c.

    An input already inside the ball is returned unchanged.  Spectral and
    Schatten balls project the singular-value vector and reconstruct with
    the input's singular vectors; row-structured balls project each row
    independently.
    """
    w = as_matrix(w)
    kind = c.kind
    if matrix_norm(w, kind) <= c.radius:
        return w
    if kind.tag == "frobenius":
        return w * (c.radius / float(np.linalg.norm(w)))
    if kind.tag == "spectral":
        r = svd(w)
        return (r.left * np.minimum(r.singular, c.radius)) @ r.right.T
    if kind.tag == "schatten":
        r = svd(w)
        return (r.left * project_lp_ball(r.singular, kind.p, c.radius)) @ r.right.T
    if kind.tag == "rows_l1_max":
        return np.vstack([project_l1_ball(row, c.radius)[None, :] for row in w])
    if kind.tag == "rows_l2_sum":
        norms = np.sqrt((w * w).sum(axis=1))
        shrunk = project_l1_ball(norms, c.radius)
        scale = np.divide(shrunk, norms, out=np.zeros_like(norms), where=norms > 0)
        return w * scale[:, None]
    raise ValueError(f"unknown norm tag {kind.tag!r}")


def linear_maximizer(g, c: BallConstraint) -> np.ndarray:
    """argmax of <W, G> over the ball c (the ball's support-point map).

    Used by the constrained ascent to polish candidates; returns a boundary
    point of the ball for any nonzero gradient G.
    """
    g = as_matrix(g)
    kind = c.kind
    if not g.any():
        return np.zeros_like(g)
    if kind.tag == "frobenius":
        return g * (c.radius / float(np.linalg.norm(g)))
    if kind.tag == "spectral":
        r = svd(g)
        return c.radius * (r.left @ r.right.T)
    if kind.tag == "schatten":
        r = svd(g)
        return (r.left * _lp_support(r.singular, kind.p, c.radius)) @ r.right.T
    if kind.tag == "rows_l1_max":
        out = np.zeros_like(g)
        idx = np.abs(g).argmax(axis=1)
        rows = np.arange(g.shape[0])
        out[rows, idx] = c.radius * np.sign(g[rows, idx])
        return out
    if kind.tag == "rows_l2_sum":
        norms = np.sqrt((g * g).sum(axis=1))
        best = int(norms.argmax())
        out = np.zeros_like(g)
        out[best] = g[best] * (c.radius / norms[best])
        return out
    raise ValueError(f"unknown norm tag {kind.tag!r}")


def _lp_support(g: np.ndarray, p: float, radius: float) -> np.ndarray:
    """argmax of <x, g> over the nonnegative l_p ball, for g >= 0."""
    if p == 1.0:
        out = np.zeros_like(g)
        out[int(np.argmax(g))] = radius
        return out
    q = p / (p - 1.0)
    top = float(g.max())
    if top == 0.0:
        return np.zeros_like(g)
    scaled = (g / top) ** (q - 1.0)
    return radius * scaled / _lp_vec_norm(scaled, p)
