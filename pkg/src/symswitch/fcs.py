"""Full counting statistics of the counted photon current.

The generator acting on column-stacked density matrices is

    W_s = -i(1 (x) H - H^T (x) 1)
          + sum_k [exp(-s nu_k) conj(L_k) (x) L_k - 1/2 (1 (x) L_k^+ L_k + (L_k^+ L_k)^T (x) 1)]

so that ``vec(A X B) = (B^T (x) A) vec(X)``.  The scaled cumulant generating
function theta(s) is its spectral abscissa, and the long-time current moments
follow from derivatives of theta at s = 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import (
    ConfigurationError,
    ConsistencyError,
    ConventionMismatchError,
    DenseLimitError,
    EigensolverError,
)
from .model import LindbladModel

COLUMN_STACKING = "column-stacking"
DENSE_LIMIT = 4096


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = math.isqrt(v.size)
    return v.reshape(dim, dim, order="F")


@dataclass(frozen=True, eq=False)
class Superoperator:
    elements: np.ndarray | sp.spmatrix
    s: float = 0.0
    convention: str = COLUMN_STACKING

    @property
    def shape(self):
        return self.elements.shape

    @property
    def hilbert_dim(self) -> int:
        return math.isqrt(self.elements.shape[0])

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.elements)

    def dense(self) -> np.ndarray:
        return self.elements.toarray() if self.is_sparse else np.asarray(self.elements)

    def _other(self, other):
        if not isinstance(other, Superoperator):
            return NotImplemented
        if other.convention != self.convention:
            raise ConventionMismatchError(
                f"cannot combine {self.convention} with {other.convention} superoperators"
            )
        return other.elements

    def __add__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else Superoperator(self.elements + m, self.s, self.convention)

    def __sub__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else Superoperator(self.elements - m, self.s, self.convention)

    def __matmul__(self, other):
        m = self._other(other)
        return m if m is NotImplemented else Superoperator(self.elements @ m, self.s, self.convention)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.elements @ vec(rho), rho.shape[0])


def build_tilted(
    m: LindbladModel,
    s: float = 0.0,
    *,
    sparse: bool = False,
    dense_limit: int = DENSE_LIMIT,
) -> Superoperator:
    """Tilted generator W_s; counted channels pick up ``exp(-s nu)`` on their jump term."""
    d = m.space.dim
    if not sparse and d * d > dense_limit:
        raise DenseLimitError(
            f"dense superoperator of size {d * d} exceeds dense_limit={dense_limit}; "
            "pass sparse=True and use the iterative eigensolver"
        )
    if sparse:
        kron, eye = sp.kron, sp.identity(d, dtype=complex, format="csr")
        conv = sp.csr_matrix
    else:
        kron, eye = np.kron, np.eye(d, dtype=complex)
        conv = np.asarray
    H = conv(m.H.elements)
    W = -1j * (kron(eye, H) - kron(H.T, eye))
    for c in m.channels:
        L = conv(c.op.elements)
        LdL = conv(c.op.elements.conj().T @ c.op.elements)
        weight = math.exp(-s * c.nu) if c.nu else 1.0
        W = W + weight * kron(L.conj(), L) - 0.5 * (kron(eye, LdL) + kron(LdL.T, eye))
    if sparse:
        W = sp.csr_matrix(W)
    return Superoperator(W, float(s), COLUMN_STACKING)


def liouvillian(m: LindbladModel, **kw) -> Superoperator:
    return build_tilted(m, 0.0, **kw)


# --------------------------------------------------------------------------
# spectral abscissa


@dataclass(frozen=True)
class LeadingEigen:
    value: complex
    residual: float
    vector: np.ndarray = field(repr=False)
    method: str = "dense"


def _dense_leading(A: np.ndarray) -> LeadingEigen:
    vals, vecs = la.eig(A)
    top = vals.real.max()
    scale = max(1.0, float(np.abs(vals).max()))
    ties = np.flatnonzero(vals.real >= top - 1e-13 * scale)
    k = ties[np.argmin(np.abs(vals[ties].imag))]
    r = vecs[:, k] / np.linalg.norm(vecs[:, k])
    res = float(np.linalg.norm(A @ r - vals[k] * r))
    return LeadingEigen(complex(vals[k]), res, r, "dense")


def _one_norm(A) -> float:
    if sp.issparse(A):
        return float(abs(A).sum(axis=0).max())
    return float(np.abs(A).sum(axis=0).max())


def log_norm_bound(A) -> float:
    """Logarithmic 1-norm of A, an upper bound on its spectral abscissa."""
    if sp.issparse(A):
        A = sp.csc_matrix(A)
        diag = A.diagonal()
        offdiag = np.asarray(abs(A).sum(axis=0)).ravel() - np.abs(diag)
    else:
        A = np.asarray(A)
        diag = np.diag(A)
        offdiag = np.abs(A).sum(axis=0) - np.abs(diag)
    return float((diag.real + offdiag).max())


def theta_bracket(m: LindbladModel, s: float) -> tuple[float, float]:
    """Bounds on theta(s) from the dual action of W_s on the identity.

    W_s generates a completely positive semigroup, so its spectral abscissa
    is attained on a positive eigenmatrix, and ``W_s^+(1) = sum_k (e^{-s nu_k}
    - 1) L_k^+ L_k`` sandwiches it between its extreme eigenvalues.
    """
    d = m.space.dim
    K = np.zeros((d, d), dtype=complex)
    for c in m.channels:
        if c.nu:
            L = c.op.elements
            K += math.expm1(-s * c.nu) * (L.conj().T @ L)
    w = np.linalg.eigvalsh(K)
    return float(w[0]), float(w[-1])


def _iterative_leading(A, shift: float | None = None, k: int = 6, refine_steps: int = 4) -> LeadingEigen:
    """Largest-real-part eigenvalue by shift-invert Arnoldi.

    For a real shift ``sigma`` at or above the spectral abscissa every
    eigenvalue satisfies ``|lam - sigma| >= sigma - Re lam``, with equality
    only for a real eigenvalue, so the rightmost eigenvalue is the one
    nearest to ``sigma``.  Without a supplied upper bound the logarithmic
    norm is used.  The Ritz value is polished by inverse iteration.
    """
    n = A.shape[0]
    norm = _one_norm(A)
    if norm == 0.0:
        r = np.ones(n, dtype=complex) / math.sqrt(n)
        return LeadingEigen(0j, 0.0, r, "iterative")
    upper = log_norm_bound(A) if shift is None else float(shift)
    sigma = upper + 1e-9 * norm
    Acsc = sp.csc_matrix(A, dtype=complex)
    eye = sp.identity(n, dtype=complex, format="csc")
    try:
        lu = spla.splu((Acsc - sigma * eye).tocsc(), permc_spec="COLAMD")
    except RuntimeError as exc:
        raise EigensolverError(f"shifted generator is singular at sigma={sigma:.3e}") from exc
    inv = spla.LinearOperator((n, n), matvec=lu.solve, dtype=complex)
    kk = max(1, min(k, n - 2))
    v0 = np.ones(n, dtype=complex) / math.sqrt(n)
    try:
        mu, vecs = spla.eigs(inv, k=kk, which="LM", v0=v0, ncv=min(n, max(2 * kk + 1, 20)), maxiter=10 * n)
    except spla.ArpackNoConvergence as exc:
        raise EigensolverError(f"Arnoldi iteration did not converge: {exc}") from exc
    lams = sigma + 1.0 / mu
    j = int(np.argmax(lams.real))
    r = vecs[:, j] / np.linalg.norm(vecs[:, j])
    for _ in range(refine_steps):
        r = lu.solve(r)
        r /= np.linalg.norm(r)
    Ar = Acsc @ r
    lam = complex(np.vdot(r, Ar))
    res = float(np.linalg.norm(Ar - lam * r))
    return LeadingEigen(lam, res, r, "iterative")


def leading_eigen(W: Superoperator, method: str = "auto", **kw) -> LeadingEigen:
    if method == "auto":
        method = "dense" if (not W.is_sparse and W.shape[0] <= DENSE_LIMIT) else "iterative"
    if method == "dense":
        return _dense_leading(W.dense())
    if method == "iterative":
        return _iterative_leading(W.elements, **kw)
    raise ConfigurationError(f"unknown eigensolver method {method!r}")


@dataclass(frozen=True)
class ThetaValue:
    s: float
    theta: float
    imag: float
    residual: float
    method: str


def theta(
    m: LindbladModel,
    s: float,
    *,
    method: str = "auto",
    tol: float = 1e-10,
    imag_tol: float = 1e-8,
    with_vector: bool = False,
    **solver_kw,
):
    """theta(s): real part of the eigenvalue of W_s with the largest real part.

    Raises EigensolverError if the residual exceeds ``tol`` or the eigenvalue
    has an imaginary part above ``imag_tol``.
    """
    large = m.space.dim**2 > DENSE_LIMIT
    if method == "auto":
        method = "iterative" if large else "dense"
    W = build_tilted(m, s, sparse=large and method == "iterative")
    if method == "iterative" and "shift" not in solver_kw:
        solver_kw["shift"] = theta_bracket(m, s)[1]
    ev = leading_eigen(W, method=method, **solver_kw)
    if ev.residual > tol:
        raise EigensolverError(f"residual {ev.residual:.3e} above tolerance {tol:.1e} at s={s}", ev.residual)
    if abs(ev.value.imag) > imag_tol:
        raise EigensolverError(
            f"leading eigenvalue at s={s} has imaginary part {ev.value.imag:.3e}", ev.residual
        )
    out = ThetaValue(float(s), float(ev.value.real), float(ev.value.imag), ev.residual, ev.method)
    return (out, ev.vector) if with_vector else out


@dataclass(frozen=True)
class LdfCurve:
    """Sampled theta(s) with solver residuals."""

    s: tuple[float, ...]
    theta: tuple[float, ...]
    residual: tuple[float, ...]
    params: dict = field(default_factory=dict)
    crossings: tuple[float, ...] = ()

    def __post_init__(self):
        if not (len(self.s) == len(self.theta) == len(self.residual)):
            raise ValueError("sample columns have different lengths")
        if any(b <= a for a, b in zip(self.s, self.s[1:])):
            raise ValueError("s samples must be strictly increasing")

    def __len__(self):
        return len(self.s)

    def rows(self):
        return list(zip(self.s, self.theta, self.residual))


def scan_theta(m: LindbladModel, s_grid, *, method: str = "auto", tol: float = 1e-10, overlap_min: float = 0.9, **kw) -> LdfCurve:
    """theta on a grid; a drop in overlap between consecutive leading vectors is reported as a branch crossing."""
    grid = sorted(float(x) for x in s_grid)
    thetas, res, crossings = [], [], []
    prev = None
    for s in grid:
        val, r = theta(m, s, method=method, tol=tol, with_vector=True, **kw)
        thetas.append(val.theta)
        res.append(val.residual)
        if prev is not None and abs(np.vdot(prev, r)) < overlap_min:
            crossings.append(s)
        prev = r
    params = m.params.to_dict() if m.params is not None else {}
    return LdfCurve(tuple(grid), tuple(thetas), tuple(res), params, tuple(crossings))


# --------------------------------------------------------------------------
# steady states


@dataclass(frozen=True)
class SteadyStateSet:
    states: tuple[np.ndarray, ...]
    null_dim: int
    zero_threshold: float
    eigenvalues: tuple[complex, ...] = ()


def _physical(rho: np.ndarray, thr: float) -> np.ndarray:
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    w = np.where(w < 0, np.where(w > -thr, 0.0, w), w)
    rho = (v * w) @ v.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.trace(rho).real


def _stationary_cluster(vals: np.ndarray, idx: np.ndarray, floor: float, min_gap: float = 1e3) -> np.ndarray:
    """Indices in ``idx`` below the widest ratio gap of |vals|, if that gap exceeds ``min_gap``.

    Magnitudes under ``floor`` are treated as equal so rounding noise never splits the zeros.
    """
    order = idx[np.argsort(np.abs(vals[idx]))]
    a = np.maximum(np.abs(vals[order]), floor)
    if a.size < 2:
        return order
    ratios = a[1:] / a[:-1]
    k = int(np.argmax(ratios))
    return order[: k + 1] if ratios[k] > min_gap else order


def steady_states(m: LindbladModel, zero_threshold: float | None = None) -> SteadyStateSet:
    """Numerical null space of W_0 turned into a basis of density matrices.

    ``null_dim`` counts eigenvalues of W_0 with modulus below the threshold
    (default ``1e-8 * ||W_0||_2``).  Physical states are obtained by
    projecting positive and negative parts of Hermitian null elements with
    the spectral projector onto the zero eigenvalue, which yields long-time
    limits of valid initial states.  When the threshold also catches slowly
    decaying modes (tiny couplings), the projector is restricted to the
    cluster below the dominant gap so that positivity survives; ``null_dim``
    still reports the threshold count.
    """
    W = build_tilted(m, 0.0).dense()
    d = m.space.dim
    if zero_threshold is None:
        zero_threshold = 1e-8 * np.linalg.norm(W, 2)
    vals, left, right = la.eig(W, left=True, right=True)
    null = np.flatnonzero(np.abs(vals) < zero_threshold)
    if null.size == 0:
        raise ConsistencyError(
            f"W_0 has no eigenvalue below {zero_threshold:.2e} (smallest {np.abs(vals).min():.2e})"
        )
    stat = _stationary_cluster(vals, null, 1e-6 * zero_threshold)
    R, _ = np.linalg.qr(right[:, stat])
    Lh, _ = np.linalg.qr(left[:, stat])
    proj = R @ np.linalg.solve(Lh.conj().T @ R, Lh.conj().T)

    eps = 1e-12
    candidates = [np.eye(d) / d]
    for k in range(R.shape[1]):
        X = unvec(R[:, k], d)
        for Y in (0.5 * (X + X.conj().T), 0.5j * (X.conj().T - X)):
            if np.linalg.norm(Y) < eps:
                continue
            w, v = np.linalg.eigh(Y)
            for part in (np.clip(w, 0, None), np.clip(-w, 0, None)):
                if part.sum() > eps:
                    candidates.append((v * part) @ v.conj().T / part.sum())

    states, kept = [], np.zeros((d * d, 0), dtype=complex)
    for rho0 in candidates:
        rho = _physical(unvec(proj @ vec(rho0), d), zero_threshold)
        v = vec(rho)[:, None]
        if kept.shape[1]:
            coef, *_ = np.linalg.lstsq(kept, v, rcond=None)
            if np.linalg.norm(v - kept @ coef) < 1e-6 * np.linalg.norm(v):
                continue
        kept = np.hstack([kept, v])
        states.append(rho)
        if len(states) == stat.size:
            break
    return SteadyStateSet(tuple(states), int(null.size), float(zero_threshold), tuple(vals[null]))


# --------------------------------------------------------------------------
# current statistics


@dataclass(frozen=True)
class CurrentStats:
    q_mean: float
    q_max: float
    q_min: float
    alpha: float
    alpha_infinite: bool
    variance: float
    kink: bool
    ds: float
    step_ratio: float


def one_sided_slopes(m: LindbladModel, ds: float = 1e-3, ratio: float = 10.0, **kw):
    """Richardson-extrapolated derivatives of theta at 0: (left, right, central, second)."""
    if ds <= 0:
        raise ConfigurationError("ds must be positive")
    f = {}

    def th(s):
        if s not in f:
            f[s] = theta(m, s, **kw).theta
        return f[s]

    t0 = th(0.0)
    h1, h2 = ds, ds / ratio

    def rich(d1, d2, order):
        w = ratio**order
        return (w * d2 - d1) / (w - 1)

    right = rich((th(h1) - t0) / h1, (th(h2) - t0) / h2, 1)
    left = rich((t0 - th(-h1)) / h1, (t0 - th(-h2)) / h2, 1)
    central = rich((th(h1) - th(-h1)) / (2 * h1), (th(h2) - th(-h2)) / (2 * h2), 2)
    second = rich(
        (th(h1) - 2 * t0 + th(-h1)) / h1**2, (th(h2) - 2 * t0 + th(-h2)) / h2**2, 2
    )
    return left, right, central, second


def tilt_derivative(m: LindbladModel) -> np.ndarray:
    """dW_s/ds at s = 0: the counted jump terms weighted by -nu."""
    d = m.space.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for c in m.channels:
        if c.nu:
            L = c.op.elements
            out -= c.nu * np.kron(L.conj(), L)
    return out


def nullspace_slopes(m: LindbladModel, zero_threshold: float | None = None):
    """Exact one-sided derivatives of theta at 0 from first-order degenerate perturbation theory.

    Near s = 0 the eigenvalues emerging from the zero eigenvalue of W_0 are
    ``s * mu_i`` with ``mu_i`` the eigenvalues of dW/ds compressed onto the
    null space by the spectral projector.  Returns (left, right, mu, null_dim).
    """
    W = build_tilted(m, 0.0).dense()
    if zero_threshold is None:
        zero_threshold = 1e-8 * np.linalg.norm(W, 2)
    vals, left, right = la.eig(W, left=True, right=True)
    null = np.abs(vals) < zero_threshold
    if not null.any():
        raise ConsistencyError("W_0 has no zero eigenvalue")
    R, Lh = right[:, null], left[:, null]
    M = np.linalg.solve(Lh.conj().T @ R, Lh.conj().T @ tilt_derivative(m) @ R)
    mu = la.eigvals(M)
    return float(mu.real.min()), float(mu.real.max()), mu, int(null.sum())


def current_stats(
    m: LindbladModel,
    ds: float = 1e-3,
    *,
    slope_method: str = "auto",
    ratio: float = 10.0,
    kink_rtol: float = 1e-3,
    q_floor: float = 1e-12,
    zero_threshold: float | None = None,
    **kw,
) -> CurrentStats:
    """Mean current and the one-sided currents of the most and least active steady states.

    ``q_max`` is the s < 0 derivative, ``q_min`` the s > 0 one.  With
    ``slope_method="richardson"`` both come from extrapolated one-sided differences;
    ``"perturbative"`` uses :func:`nullspace_slopes`; ``"auto"`` picks the
    latter only when the zero eigenvalue of W_0 is degenerate, where theta is a
    maximum over several branches and differences across ``ds`` can straddle
    a branch crossing.  ``q_mean`` and ``variance`` (the scaled second
    cumulant ``theta''(0)``) always come from central differences.
    """
    if slope_method not in ("auto", "richardson", "perturbative"):
        raise ConfigurationError(f"unknown slope method {slope_method!r}")
    left, right, central, second = one_sided_slopes(m, ds, ratio, **kw)
    if slope_method != "richardson":
        p_left, p_right, _, null_dim = nullspace_slopes(m, zero_threshold)
        if slope_method == "perturbative" or null_dim > 1:
            left, right = p_left, p_right
    q_max, q_min, q_mean = -left, -right, -central
    scale = max(abs(q_max), abs(q_min))
    kink = scale > q_floor and abs(q_max - q_min) > kink_rtol * scale
    if abs(q_min) < q_floor:
        # no current in either direction leaves the ratio undefined
        infinite = abs(q_max) >= q_floor
        alpha = math.inf if infinite else math.nan
    else:
        alpha, infinite = q_max / q_min, False
    return CurrentStats(q_mean, q_max, q_min, alpha, infinite, second, kink, ds, ratio)


# --------------------------------------------------------------------------
# Legendre-Fenchel inversion


@dataclass(frozen=True)
class GqCurve:
    q: tuple[float, ...]
    G: tuple[float, ...]
    provenance: dict = field(default_factory=dict)
    nonrecoverable: tuple[float, float] | None = None
    clipped: bool = False

    def rows(self):
        return list(zip(self.q, self.G))


def _side_slope(s: np.ndarray, t: np.ndarray) -> float:
    """Derivative at s = 0 of the polynomial through up to three samples on one side."""
    if s.size == 1:
        raise ConfigurationError("need at least two samples on each side of s = 0")
    deg = min(2, s.size - 1)
    coef = np.polyfit(s, t, deg)
    return float(np.polyval(np.polyder(coef), 0.0))


def detect_kink(curve: LdfCurve, rtol: float = 1e-3):
    """One-sided slopes of a sampled theta at 0 and whether they disagree by more than ``rtol``."""
    s = np.asarray(curve.s)
    t = np.asarray(curve.theta)
    lo = np.flatnonzero(s <= 0)[-3:]
    hi = np.flatnonzero(s >= 0)[:3]
    if lo.size < 2 or hi.size < 2:
        return None
    left, right = _side_slope(s[lo], t[lo]), _side_slope(s[hi], t[hi])
    scale = max(abs(left), abs(right))
    return left, right, bool(scale > 0 and abs(left - right) > rtol * scale)


def legendre(curve: LdfCurve, q_grid, *, kink_rtol: float = 1e-3) -> GqCurve:
    """G(q) = min over sampled s of [theta(s) + s q].

    Only the concave envelope is recoverable.  When theta has a kink at 0 the
    q-interval between the two one-sided currents is flagged as non-recoverable.
    """
    s = np.asarray(curve.s, dtype=float)
    t = np.asarray(curve.theta, dtype=float)
    if s.size < 2 or not s[0] < 0 < s[-1]:
        raise ConfigurationError("theta samples must bracket s = 0")
    q = np.asarray(sorted(float(x) for x in q_grid))
    q_lo = -(t[-1] - t[-2]) / (s[-1] - s[-2])
    q_hi = -(t[1] - t[0]) / (s[1] - s[0])
    clipped = bool(q.size and (q[0] < q_lo or q[-1] > q_hi))
    if clipped:
        warnings.warn(
            f"q grid exceeds the slope range [{q_lo:.6g}, {q_hi:.6g}] of the theta samples; clipping",
            stacklevel=2,
        )
        q = np.unique(np.clip(q, q_lo, q_hi))
    G = (t[None, :] + s[None, :] * q[:, None]).min(axis=1)
    gap = None
    k = detect_kink(curve, kink_rtol)
    if k is not None and k[2]:
        left, right, _ = k
        gap = (float(min(-left, -right)), float(max(-left, -right)))
    prov = {"kind": "LdfCurve", "n_samples": int(s.size), "s_range": [float(s[0]), float(s[-1])], "params": curve.params}
    return GqCurve(tuple(map(float, q)), tuple(map(float, G)), prov, gap, clipped)


def legendre_inverse(gq: GqCurve, s_values) -> np.ndarray:
    """theta(s) = max over sampled q of [G(q) - s q] (round-trip check)."""
    q = np.asarray(gq.q)
    G = np.asarray(gq.G)
    s = np.asarray(s_values, dtype=float)
    return (G[None, :] - s[:, None] * q[None, :]).max(axis=1)
