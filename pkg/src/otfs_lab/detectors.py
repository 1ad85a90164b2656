"""Delay-Doppler symbol detectors: exhaustive ML, linear MMSE and Gaussian-approximation MP."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ResourceLimitError

ML_BUDGET = 2**20


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy constellation with a Gray bit labeling.

    ``labels[q]`` holds the ``bits_per_symbol`` bits (MSB first) of ``points[q]``.
    """

    name: str
    points: np.ndarray
    labels: np.ndarray

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]

    @property
    def order(self) -> int:
        return self.points.size

    def modulate(self, bits) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return self.points[self._index_of_label[bits @ weights]]

    def slice_indices(self, z) -> np.ndarray:
        """Nearest point index; ties go to the lowest index."""
        z = np.asarray(z, dtype=np.complex128)
        return np.argmin(np.abs(z[..., None] - self.points) ** 2, axis=-1)

    def bits_of(self, idx) -> np.ndarray:
        return self.labels[np.asarray(idx)].reshape(-1)

    @property
    def _index_of_label(self) -> np.ndarray:
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        inv = np.empty(self.order, dtype=np.int64)
        inv[self.labels @ weights] = np.arange(self.order)
        return inv


def _gray(n: int) -> np.ndarray:
    return np.arange(n) ^ (np.arange(n) >> 1)


def _pam_gray(levels: int):
    """Gray-labelled PAM amplitudes and their integer labels."""
    amps = 2.0 * np.arange(levels) - (levels - 1)
    return amps, _gray(levels)


def make_constellation(name: str) -> Constellation:
    """``bpsk``, ``qpsk`` or ``16qam``, Gray labelled, unit average energy."""
    name = name.lower()
    if name == "bpsk":
        return Constellation("bpsk", np.array([1.0 + 0j, -1.0 + 0j]), np.array([[0], [1]]))
    if name in ("qpsk", "4qam"):
        side = 2
    elif name == "16qam":
        side = 4
    else:
        raise ValueError(f"unknown constellation {name!r}")
    amps, gray = _pam_gray(side)
    b = int(np.log2(side))
    pts, labels = [], []
    for i, ai in enumerate(amps):
        for q, aq in enumerate(amps):
            pts.append(ai + 1j * aq)
            code = (gray[i] << b) | gray[q]
            labels.append([(code >> s) & 1 for s in range(2 * b - 1, -1, -1)])
    pts = np.array(pts)
    pts = pts / np.sqrt(np.mean(np.abs(pts) ** 2))
    return Constellation("qpsk" if side == 2 else "16qam", pts, np.array(labels))


@dataclass
class DetectionResult:
    """Hard decisions; ``symbols`` is the ``(N, M)`` grid when the shape is known."""

    symbols: np.ndarray
    indices: np.ndarray
    bits: np.ndarray
    iterations: int = 0
    converged: bool = True
    estimate: np.ndarray | None = None


def _unpack(H):
    """Dense matrix and grid shape from an operator or a bare matrix."""
    if hasattr(H, "dense"):
        return H.dense, (H.N, H.M)
    H = np.asarray(H, dtype=np.complex128)
    return H, (H.shape[1], 1)


def _result(cons: Constellation, idx: np.ndarray, shape, **kw) -> DetectionResult:
    sym = cons.points[idx]
    grid = sym.reshape(shape, order="F")
    return DetectionResult(grid, idx, cons.bits_of(idx), **kw)


def ml_detect(y, H, cons: Constellation, budget: int = ML_BUDGET,
              chunk: int = 1 << 14) -> DetectionResult:
    """Exhaustive maximum-likelihood search ``argmin ||y - H x||^2`` over all grids.

    Raises
    ------
    ResourceLimitError
        If ``Q**(NM)`` candidates exceed ``budget``.
    """
    Hd, shape = _unpack(H)
    y = np.asarray(y, dtype=np.complex128).ravel()
    K = Hd.shape[1]
    Q = cons.order
    total = Q ** K
    if total > budget:
        raise ResourceLimitError(f"ML search over {Q}^{K} candidates exceeds budget {budget}")
    # digit j of the candidate number picks the constellation point of symbol j
    base = Q ** np.arange(K - 1, -1, -1, dtype=np.int64)
    best_metric, best_idx = np.inf, 0
    for start in range(0, total, chunk):
        cand = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (cand[None, :] // base[:, None]) % Q
        resid = y[:, None] - Hd @ cons.points[digits]
        metric = np.einsum("ij,ij->j", resid.real, resid.real) + np.einsum("ij,ij->j", resid.imag, resid.imag)
        j = int(np.argmin(metric))
        if metric[j] < best_metric:
            best_metric, best_idx = metric[j], int(cand[j])
    idx = (best_idx // base) % Q
    return _result(cons, idx, shape)


def mmse_detect(y, H, n0: float, cons: Constellation) -> DetectionResult:
    """Linear MMSE ``(H^H H + n0 I)^(-1) H^H y`` followed by nearest-point slicing."""
    if n0 < 0:
        raise ValueError(f"noise variance must be non-negative, got {n0}")
    Hd, shape = _unpack(H)
    y = np.asarray(y, dtype=np.complex128).ravel()
    A = Hd.conj().T @ Hd + n0 * np.eye(Hd.shape[1])
    b = Hd.conj().T @ y
    if np.linalg.cond(A) > 1.0 / np.finfo(float).eps:
        raise NumericalError("regularized MMSE system is singular")
    try:
        x_hat = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(str(exc)) from exc
    idx = cons.slice_indices(x_hat)
    return _result(cons, idx, shape, estimate=x_hat)


def mp_detect(y, H, n0: float, cons: Constellation, max_iter: int = 30,
              damping: float = 0.5, tol: float = 1e-6,
              support_tol: float = 1e-12) -> DetectionResult:
    """Message passing with Gaussian-approximated interference on the operator's factor graph.

    Each observation ``y[d]`` sends to each connected symbol ``x[c]`` the mean
    and covariance of everything else it sees; each symbol sends back its
    extrinsic pmf over the constellation. Pmf updates are damped and the loop
    stops when the largest pmf change drops below ``tol``. Decisions are the
    per-symbol MAP points of the final beliefs.

    Interference is modelled as a real 2-D Gaussian over (Re, Im) with a full
    2 x 2 covariance. For circular constellations this is the usual complex
    Gaussian approximation; for real ones such as BPSK it keeps the improper
    structure of ``h x`` that a circular model would smear out.
    """
    if not 0 < damping <= 1:
        raise ValueError(f"damping must lie in (0, 1], got {damping}")
    if n0 <= 0:
        raise ValueError("message passing needs n0 > 0")
    Hd, shape = _unpack(H)
    y = np.asarray(y, dtype=np.complex128).ravel()
    n_obs, n_var = Hd.shape
    mag = np.abs(Hd)
    d_idx, c_idx = np.nonzero(mag > support_tol * max(mag.max(), 1e-300))
    h = Hd[d_idx, c_idx]
    Q = cons.order
    # real 2x2 form of multiplication by h, and constellation points as (Re, Im)
    A = np.stack([np.stack([h.real, -h.imag], -1), np.stack([h.imag, h.real], -1)], 1)
    pts = np.stack([cons.points.real, cons.points.imag], -1)
    y_e = np.stack([y.real, y.imag], -1)[d_idx]
    Ha = np.einsum("eij,qj->eqi", A, pts)              # h * a for every edge and point
    half_n0 = 0.5 * n0

    def per_obs(v):
        return np.bincount(d_idx, weights=v, minlength=n_obs)[d_idx]

    def per_var(v):
        return np.stack([np.bincount(c_idx, weights=v[:, q], minlength=n_var)
                         for q in range(Q)], axis=1)

    p = np.full((h.size, Q), 1.0 / Q)
    iterations, converged = 0, False
    loglik = None
    for it in range(1, max_iter + 1):
        iterations = it
        mu = p @ pts
        c_rr = p @ pts[:, 0] ** 2 - mu[:, 0] ** 2
        c_ii = p @ pts[:, 1] ** 2 - mu[:, 1] ** 2
        c_ri = p @ (pts[:, 0] * pts[:, 1]) - mu[:, 0] * mu[:, 1]
        C = np.stack([np.stack([c_rr, c_ri], -1), np.stack([c_ri, c_ii], -1)], 1)
        m_e = np.einsum("eij,ej->ei", A, mu)
        S_e = np.einsum("eij,ejk,elk->eil", A, C, A)
        zeta = np.stack([per_obs(m_e[:, 0]), per_obs(m_e[:, 1])], -1) - m_e
        s_rr = per_obs(S_e[:, 0, 0]) - S_e[:, 0, 0] + half_n0
        s_ii = per_obs(S_e[:, 1, 1]) - S_e[:, 1, 1] + half_n0
        s_ri = per_obs(S_e[:, 0, 1]) - S_e[:, 0, 1]
        det = s_rr * s_ii - s_ri ** 2

        e = (y_e - zeta)[:, None, :] - Ha
        er, ei = e[..., 0], e[..., 1]
        quad = (s_ii[:, None] * er ** 2 - 2 * s_ri[:, None] * er * ei
                + s_rr[:, None] * ei ** 2) / det[:, None]
        loglik = -0.5 * quad
        belief = per_var(loglik)
        extr = belief[c_idx] - loglik
        extr -= extr.max(axis=1, keepdims=True)
        p_new = np.exp(extr)
        p_new /= p_new.sum(axis=1, keepdims=True)
        p_new = damping * p_new + (1.0 - damping) * p
        delta = float(np.max(np.abs(p_new - p))) if p.size else 0.0
        p = p_new
        if delta < tol:
            converged = True
            break

    idx = np.argmax(per_var(loglik), axis=1)
    return _result(cons, idx, shape, iterations=iterations, converged=converged)
