"""Matrix-level perturbation theory and a discretized model-operator oracle.

Ladder conventions: with ``a`` the truncated oscillator lowering matrix,
``Z = hD_2 + i mu x_2 = i sqrt(2 mu h) a^dagger`` raises the oscillator level and
``Z* = -i sqrt(2 mu h) a`` lowers it, so ``[Z*, Z] = 2 mu h`` away from the
truncation edge and ``Z*`` annihilates the ground state.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_legendre

from .errors import AccuracyError, InvalidInputError, NumericalError
from .specfun import legendre_nodes

DENSE_LIMIT_BYTES = 600 * 2**20


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    entries: np.ndarray
    hermitian: bool
    basis: str = "oscillator_tensor"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = self.entries
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidInputError("operator matrix must be square")
        if self.hermitian:
            scale = max(np.abs(M).max(), 1e-300)
            if np.abs(M - M.conj().T).max() > 1e-12 * scale:
                raise InvalidInputError("matrix flagged hermitian is not")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def wrap(cls, M, basis="oscillator_tensor", **meta):
        M = np.asarray(M, dtype=complex)
        herm = bool(np.allclose(M, M.conj().T, rtol=0, atol=1e-12 * max(np.abs(M).max(), 1e-300)))
        return cls(M, herm, basis, meta)


@dataclass(frozen=True)
class DuhamelTerm:
    k: int
    value: np.ndarray
    bound: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value, 2))


def lowering(n: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


def build_ladder(n1: int, n2: int, mu: float, h: float):
    """(Z, Z*) on n1 oscillator levels tensored with n2 transverse modes."""
    if n1 < 2 or n2 < 1:
        raise InvalidInputError("need n1 >= 2 oscillator levels and n2 >= 1")
    c = math.sqrt(2.0 * mu * h)
    a = lowering(n1)
    Z = 1j * c * a.T
    Zs = -1j * c * a
    if n2 > 1:
        eye = np.eye(n2)
        Z = np.kron(Z, eye)
        Zs = np.kron(Zs, eye)
    meta = {"mu": mu, "h": h, "n1": n1, "n2": n2}
    return (OperatorMatrix(Z, False, "oscillator_tensor", meta),
            OperatorMatrix(Zs, False, "oscillator_tensor", meta))


def interior_mask(n1: int, n2: int = 1) -> np.ndarray:
    """Basis indices whose oscillator level is below the truncation edge."""
    return np.repeat(np.arange(n1) < n1 - 1, n2)


def _eig(A: OperatorMatrix):
    if not A.hermitian:
        raise InvalidInputError("propagator needs a hermitian generator")
    try:
        lam, vec = np.linalg.eigh(A.entries)
    except np.linalg.LinAlgError as exc:  # pragma: no cover
        raise NumericalError(f"eigendecomposition failed: {exc}") from exc
    return lam, vec


def propagator(A: OperatorMatrix, t: float, h: float) -> OperatorMatrix:
    """U(t) = exp(i t A / h)."""
    lam, vec = _eig(A)
    U = (vec * np.exp(1j * t * lam / h)) @ vec.conj().T
    return OperatorMatrix(U, False, A.basis, dict(A.meta))


def heisenberg_evolve(A0: OperatorMatrix, X: OperatorMatrix, t: float, h: float) -> OperatorMatrix:
    """U0(t) X U0(-t)."""
    lam, vec = _eig(A0)
    Xt = vec.conj().T @ X.entries @ vec
    ph = np.exp(1j * t * (lam[:, None] - lam[None, :]) / h)
    out = vec @ (ph * Xt) @ vec.conj().T
    return OperatorMatrix(out, False, X.basis, dict(X.meta))


def integration_matrix(q: int):
    """GL nodes/weights on [-1, 1] and Q with Q[i, l] = int_{-1}^{x_i} l_l(s) ds.

    ``l_l`` are the Lagrange polynomials of the nodes; the antiderivative is
    taken through their Legendre expansion, which GL computes exactly.
    """
    x, w = legendre_nodes(q)
    m = np.arange(q)
    P = eval_legendre(m[:, None], x[None, :])            # P[m, l] = P_m(x_l)
    coef = P * w[None, :] * ((2 * m + 1) / 2.0)[:, None]  # Legendre coefficients of l_l
    anti = np.empty((q, q))                               # anti[m, i] = int_{-1}^{x_i} P_m
    anti[0] = x + 1.0
    Pp = eval_legendre(m[1:, None] + 1, x[None, :])
    Pm = eval_legendre(m[1:, None] - 1, x[None, :])
    anti[1:] = (Pp - Pm) / (2 * m[1:, None] + 1)
    return x, w, anti.T @ coef


def _dyson(lam, Bt, t, h, K, q):
    x, w, Q = integration_matrix(q)
    tau = 0.5 * t * (x + 1.0)
    wt = 0.5 * t * w
    Qt = 0.5 * t * Q
    n = len(lam)
    BI = np.exp(1j * tau[:, None, None] * (lam[None, None, :] - lam[None, :, None]) / h) * Bt
    F = np.broadcast_to(np.eye(n, dtype=complex), (q, n, n))
    W = [np.eye(n, dtype=complex)]
    for _ in range(K):
        G = (1j / h) * np.einsum("lab,lbc->lac", BI, F)
        W.append(np.einsum("l,lab->ab", wt, G))
        F = np.einsum("il,lab->iab", Qt, G)
    return W


def duhamel_series(A0: OperatorMatrix, B: OperatorMatrix, t: float, h: float, K: int,
                   order: int = 24, tol: float = 1e-9, max_order: int = 768):
    """Partial Duhamel sum S_K(t) and its terms k = 0..K.

    Terms are computed in the interaction picture: in the eigenbasis of A0 the
    conjugated perturbation is ``exp(i s (l_k - l_j)/h) B_jk``, and the ordered
    time integrals are built one level at a time with a Gauss-Legendre spectral
    integration matrix. The order doubles until the terms are stationary to
    ``tol`` (relative to the bound scale).
    """
    if not (A0.hermitian and B.hermitian):
        raise InvalidInputError("A0 and B must be hermitian")
    if A0.dim != B.dim:
        raise InvalidInputError("A0 and B must share a dimension")
    if int(K) != K or not 0 <= K <= 4:
        raise InvalidInputError("K must be an integer in [0, 4]")
    lam, vec = _eig(A0)
    Bt = vec.conj().T @ B.entries @ vec
    nu = float(np.linalg.norm(B.entries, 2))
    if t == 0 or nu == 0 or K == 0:
        W = [np.eye(A0.dim, dtype=complex)] + [np.zeros((A0.dim, A0.dim), complex)] * K
    else:
        q = order
        W = _dyson(lam, Bt, t, h, K, q)
        while True:
            if 2 * q > max_order:
                raise AccuracyError("Duhamel simplex quadrature did not settle")
            W2 = _dyson(lam, Bt, t, h, K, 2 * q)
            err = max(np.abs(a - b).max() for a, b in zip(W, W2))
            q *= 2
            W = W2
            if err <= tol:
                break
    U0 = np.exp(1j * t * lam / h)
    x = nu * abs(t) / h
    terms = []
    total = np.zeros((A0.dim, A0.dim), dtype=complex)
    for k, Wk in enumerate(W):
        val = vec @ (U0[:, None] * Wk) @ vec.conj().T
        terms.append(DuhamelTerm(k, val, x**k / math.factorial(k)))
        total = total + val
    return OperatorMatrix(total, False, A0.basis, dict(A0.meta)), terms


def remainder_bound(nu: float, T: float, h: float, K: int) -> float:
    x = nu * T / h
    return x ** (K + 1) / math.factorial(K + 1)


def remainder_check(nu: float, T: float, h: float, K: int, delta: float) -> dict:
    if nu <= 0 or T <= 0 or h <= 0 or delta < 0 or K < 0:
        raise InvalidInputError("remainder_check needs positive nu, T, h and nonnegative K, delta")
    return {"smallness": bool(T * nu <= h ** (1 + delta)), "bound": remainder_bound(nu, T, h, K)}


def random_hermitian(n: int, rng: np.random.Generator, norm: float | None = None) -> np.ndarray:
    M = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    M = 0.5 * (M + M.conj().T)
    if norm is not None:
        M *= norm / np.linalg.norm(M, 2)
    return M


# ---------------------------------------------------------------------------
# discretized model operator


@dataclass(frozen=True, eq=False)
class DiscreteModel:
    """Block-diagonal discretization: one x_2 block per x_1 Fourier mode.

    x_1 is periodic on [-L, L] with modes ``k_j = pi j / L``; x_2 uses the
    sine DVR with Dirichlet walls at +-L. ``vecs[j][:, m]`` holds the DVR
    values of eigenvector m in block j.
    """

    L: float
    n_grid: int
    k: np.ndarray
    x2: np.ndarray
    blocks: list
    evals: list
    vecs: list
    sine: np.ndarray
    params: object

    @property
    def dim(self) -> int:
        return self.n_grid * len(self.k)

    def spectrum(self) -> np.ndarray:
        return np.sort(np.concatenate(self.evals))

    def dense(self) -> OperatorMatrix:
        nbytes = 16 * self.dim**2
        if nbytes > DENSE_LIMIT_BYTES:
            raise NumericalError(f"dense assembly needs {nbytes / 2**20:.0f} MiB, over the guard")
        n = self.n_grid
        M = np.zeros((self.dim, self.dim), dtype=complex)
        for j, blk in enumerate(self.blocks):
            M[j * n:(j + 1) * n, j * n:(j + 1) * n] = blk
        return OperatorMatrix(M, True, "fourier_grid",
                              {"mu": self.params.mu, "h": self.params.h, "L": self.L,
                               "n_grid": self.n_grid})

    def _x2_values(self, coeffs, x2):
        """Continuous sine-series values at x2 from DVR eigenvector values."""
        L, n = self.L, self.n_grid
        m = np.arange(1, n + 1)
        a = self.sine @ coeffs                       # sine-basis coefficients
        basis = np.sin(np.outer(np.asarray(x2, float) + L, m) * math.pi / (2 * L)) / math.sqrt(L)
        return basis @ a

    def projector_kernel(self, X, Y, tau: float = 0.0) -> np.ndarray:
        """Kernel of the spectral projector onto eigenvalues <= tau."""
        X = np.atleast_2d(np.asarray(X, float))
        Y = np.atleast_2d(np.asarray(Y, float))
        out = np.zeros(len(X), dtype=complex)
        for kj, lam, vec in zip(self.k, self.evals, self.vecs):
            sel = lam <= tau
            if not np.any(sel):
                continue
            fx = self._x2_values(vec[:, sel], X[:, 1])
            fy = self._x2_values(vec[:, sel], Y[:, 1])
            out += np.exp(1j * kj * (X[:, 0] - Y[:, 0])) * np.sum(fx * fy.conj(), axis=1)
        return out / (2 * self.L)

    def density(self, x2, tau: float = 0.0) -> np.ndarray:
        """Diagonal of the projector kernel (independent of x_1)."""
        x2 = np.atleast_1d(np.asarray(x2, float))
        out = np.zeros(len(x2))
        for lam, vec in zip(self.evals, self.vecs):
            sel = lam <= tau
            if np.any(sel):
                out += np.sum(np.abs(self._x2_values(vec[:, sel], x2)) ** 2, axis=1)
        return out / (2 * self.L)


def discretize_model(p, L: float, n_grid: int) -> DiscreteModel:
    """Fourier x sine-DVR discretization of the model operator on [-L, L]^2."""
    if n_grid < 4 or n_grid > 96:
        raise InvalidInputError("n_grid must lie in [4, 96]")
    if L <= 0:
        raise InvalidInputError("L must be positive")
    n = n_grid
    dx = 2 * L / (n + 1)
    x2 = -L + dx * np.arange(1, n + 1)
    m = np.arange(1, n + 1)
    S = math.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(m, m) / (n + 1))
    T = (S * (np.pi * m / (2 * L)) ** 2) @ S          # -d^2/dx^2 in the DVR
    k = np.pi * (np.arange(n) - n // 2) / L
    blocks, evals, vecs = [], [], []
    for kj in k:
        pot = (p.h * kj - p.mu * x2) ** 2 - p.W - 2 * p.v * x2
        H = 0.5 * (p.h**2 * T + np.diag(pot))
        lam, vec = np.linalg.eigh(H)
        blocks.append(H)
        evals.append(lam)
        vecs.append(vec)
    return DiscreteModel(L, n, k, x2, blocks, evals, vecs, S, p)
