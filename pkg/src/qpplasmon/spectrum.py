"""Spectral decomposition of the static adjoint Neumann-Poincare operator.

The operator K* = (K^{-alpha,0})* is self-adjoint for the inner product
(u, v)_* = -(u, S~[v]), where S~ is the static single layer with a rank-one
modification on the eigenfunction phi_0 of eigenvalue 1/2.  Discretely the
inner product is v^H G u with a Hermitian positive definite Gram matrix G,
and the eigenproblem becomes a Hermitian-definite pencil.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegeneracyError, PositivityError, SpectralError
from .potentials import OperatorMatrix, assemble_np_adjoint, assemble_single_layer

HALF_TOLERANCE = 5e-3
#: Relative magnitude difference below which two eigenvalues of opposite
#: sign count as a +-lambda pair.
PAIR_TOLERANCE = 1e-10
SELF_ADJOINT_TOLERANCE = 1e-6


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenpairs of K* orthonormal in the discrete H* inner product.

    Attributes
    ----------
    eigenvalues : ndarray, shape (M,)
        Real, sorted by descending magnitude with the 1/2 mode first; within
        a +-lambda tie the positive value comes first.
    eigenvectors : ndarray, shape (N, M)
        Columns phi_j with ``phi_i^H gram phi_j = delta_ij``.
    gram : ndarray, shape (N, N)
    phi0_index : int
        Always 0 after sorting; kept for readers of exported tables.
    trusted : int
        Number of leading eigenpairs considered resolved (N // 4).
    diagnostics : dict
        Measured residuals: ``max_imag``, ``self_adjoint``, ``half_deviation``,
        ``pairing``, ``gram_min``, ``single_layer_condition``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gram: np.ndarray
    phi0_index: int
    trusted: int
    kstar: OperatorMatrix
    substitute: OperatorMatrix
    diagnostics: dict = field(default_factory=dict)

    @property
    def weights(self):
        return self.kstar.curve.weights

    def inner(self, u, v):
        """(u, v)_* = v^H G u."""
        return np.conj(v) @ self.gram @ u

    def trusted_eigenvalues(self):
        return self.eigenvalues[:self.trusted]

    def reconstruct(self):
        """sum_j lambda_j phi_j (., phi_j)_* as a matrix."""
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T @ self.gram


@dataclass(frozen=True)
class PerturbedEigenpair:
    """First-order frequency correction of an eigenpair of A(omega).

    Attributes
    ----------
    index : int
    tau : complex
        tau_j + omega^2 ln(omega) tau_j1.
    density : ndarray
        phi_j + omega^2 ln(omega) phi_j1.
    tau_static : complex
    tau_first_order : complex
        R_jj.
    correction : ndarray
        phi_j1.
    """

    index: int
    tau: complex
    density: np.ndarray
    tau_static: complex
    tau_first_order: complex
    correction: np.ndarray


def find_half_mode(kstar, tolerance=HALF_TOLERANCE):
    """Eigenvector of K* with eigenvalue nearest 1/2, scaled so (phi0, 1) = 1.

    Returns
    -------
    phi0 : ndarray
    eigenvalue : complex

    Raises
    ------
    SpectralError
        If no eigenvalue lies within ``tolerance`` of 1/2, or the pairing of
        the eigenvector with the constant density vanishes.
    """
    vals, vecs = np.linalg.eig(kstar.entries)
    j = int(np.argmin(np.abs(vals - 0.5)))
    if abs(vals[j] - 0.5) > tolerance:
        raise SpectralError(f"no eigenvalue within {tolerance} of 1/2 (nearest {vals[j]:.6g})")
    phi0 = vecs[:, j]
    pairing = np.sum(kstar.curve.weights * phi0)
    if abs(pairing) < 1e-8 * np.linalg.norm(phi0) * np.sqrt(kstar.curve.perimeter()):
        raise SpectralError("the 1/2 eigenvector has vanishing pairing with the constant density")
    return phi0 / pairing, vals[j]


def build_substitute_single_layer(alpha, curve, cfg=None, phi0=None, constant_sign=-1.0):
    """Static single layer modified on the 1/2 mode.

    S~ agrees with S^{alpha,0} on densities with zero mean and sends phi_0
    to ``constant_sign`` times the constant function.  The default -1 makes
    -S~ positive, so that (phi_0, phi_0)_* = (phi_0, 1) = 1; pass +1 for the
    other sign.

    Parameters
    ----------
    alpha, curve, cfg
        As for :func:`assemble_single_layer`.
    phi0 : ndarray, optional
        Precomputed 1/2 eigenvector normalized by (phi0, 1) = 1.
    constant_sign : float

    Returns
    -------
    OperatorMatrix
    """
    S0 = assemble_single_layer(alpha, 0.0, curve, cfg)
    if phi0 is None:
        phi0, _ = find_half_mode(assemble_np_adjoint(alpha, 0.0, curve, cfg))
    w = curve.weights
    N = curve.n
    ent = S0.entries @ (np.eye(N) - np.outer(phi0, w)) + constant_sign * np.outer(np.ones(N), w)
    return S0.with_entries(ent, kind="substitute_single_layer")


def hstar_gram(substitute, weights=None, check=True):
    """Hermitian Gram matrix of (u, v)_* = -(u, S~ v), so (u, v)_* = v^H G u.

    Raises
    ------
    PositivityError
        If ``check`` and G is not positive definite.
    """
    S = getattr(substitute, "entries", substitute)
    w = substitute.weights if weights is None else np.asarray(weights)
    M = -(S.conj().T * w)
    G = 0.5 * (M + M.conj().T)
    if check:
        lo = float(np.linalg.eigvalsh(G)[0])
        if lo <= 0:
            raise PositivityError(f"H* Gram matrix is not positive definite (min eigenvalue {lo:.3e})")
    return G


def np_eigensystem(kstar, gram, substitute=None, trusted=None):
    """Eigensystem of K* as a self-adjoint operator for the Gram inner product.

    Parameters
    ----------
    kstar : OperatorMatrix
    gram : ndarray
        Positive definite Gram matrix from :func:`hstar_gram`.
    substitute : OperatorMatrix, optional
        Stored for later use by callers.
    trusted : int, optional
        Number of resolved modes; defaults to N // 4.

    Returns
    -------
    SpectralDecomposition

    Raises
    ------
    SpectralError
        If the symmetry residual exceeds 1e-6, no eigenvalue is near 1/2,
        or the non-symmetric eigenvalues have imaginary parts above 1e-8.
    """
    K = kstar.entries
    GK = gram @ K
    sym = np.linalg.norm(GK - K.conj().T @ gram) / np.linalg.norm(GK)
    if sym > SELF_ADJOINT_TOLERANCE:
        raise SpectralError(f"K* is not self-adjoint in the Gram inner product (residual {sym:.3e})")
    raw = np.linalg.eigvals(K)
    max_imag = float(np.max(np.abs(raw.imag)))
    if max_imag > 1e-8:
        raise SpectralError(f"eigenvalues of K* have imaginary parts up to {max_imag:.3e}")
    A = 0.5 * (GK + GK.conj().T)
    try:
        vals, vecs = scipy.linalg.eigh(A, gram)
    except np.linalg.LinAlgError as exc:
        raise PositivityError(f"Gram matrix rejected by the Cholesky factorization: {exc}") from exc
    j0 = int(np.argmin(np.abs(vals - 0.5)))
    dev = abs(vals[j0] - 0.5)
    if dev > HALF_TOLERANCE:
        raise SpectralError(f"no eigenvalue within {HALF_TOLERANCE} of 1/2 (nearest {vals[j0]:.6g})")
    rest = np.delete(np.arange(vals.size), j0)
    rest = rest[np.argsort(-np.abs(vals[rest]), kind="stable")]
    # within a +-lambda pair (equal magnitude to 1e-10 relative) put the
    # positive value first, so roundoff cannot decide the order
    i = 0
    while i < rest.size - 1:
        a, b = vals[rest[i]], vals[rest[i + 1]]
        if a < 0 < b and abs(abs(a) - b) <= PAIR_TOLERANCE * b:
            rest[i], rest[i + 1] = rest[i + 1], rest[i]
            i += 2
        else:
            i += 1
    order = np.concatenate([[j0], rest])
    vals = vals[order]
    vecs = vecs[:, order]
    w = kstar.curve.weights
    # fix the phase of phi_0 so (phi_0, 1) is real positive, then of the rest
    # by their largest entry, for reproducible output
    pairing = np.sum(w * vecs[:, 0])
    vecs[:, 0] *= np.conj(pairing) / abs(pairing)
    for j in range(1, vecs.shape[1]):
        p = vecs[np.argmax(np.abs(vecs[:, j])), j]
        vecs[:, j] *= np.conj(p) / abs(p)
    n = kstar.curve.n
    diag = {
        "max_imag": max_imag,
        "self_adjoint": float(sym),
        "half_deviation": float(dev),
        "pairing": complex(np.sum(w * vecs[:, 0])),
        "gram_min": float(np.linalg.eigvalsh(gram)[0]),
    }
    return SpectralDecomposition(
        eigenvalues=vals, eigenvectors=vecs, gram=gram, phi0_index=0,
        trusted=int(trusted if trusted is not None else n // 4), kstar=kstar,
        substitute=substitute, diagnostics=diag)


def decompose(alpha, curve, cfg=None, constant_sign=-1.0):
    """Assemble K*, S~ and G and return the spectral decomposition."""
    kstar = assemble_np_adjoint(alpha, 0.0, curve, cfg)
    phi0, _ = find_half_mode(kstar)
    sub = build_substitute_single_layer(alpha, curve, cfg, phi0=phi0, constant_sign=constant_sign)
    gram = hstar_gram(sub)
    dec = np_eigensystem(kstar, gram, substitute=sub)
    s0 = assemble_single_layer(alpha, 0.0, curve, cfg)
    dec.diagnostics["single_layer_condition"] = float(np.linalg.cond(s0.entries))
    return dec


def perturb_eigensystem(decomp, first_order_block, omega, contrast, indices=None):
    """First-order eigenpairs of A(omega) = A_0 + omega^2 ln(omega) A_1 + O(omega^2).

    Parameters
    ----------
    decomp : SpectralDecomposition
    first_order_block : ndarray, shape (N, N)
        A_1, e.g. the ``klogk`` block of a low-frequency fit of A(omega).
    omega : float
    contrast : tuple (mu_m, mu_c)
    indices : sequence of int, optional
        Modes to perturb; defaults to the simple eigenvalues of the
        trusted prefix (non-simple ones are skipped rather than raised).

    Returns
    -------
    list of PerturbedEigenpair

    Raises
    ------
    DegeneracyError
        If a target eigenvalue is within 1e-8 of another computed one.
    """
    mu_m, mu_c = contrast
    diff = 1.0 / mu_m - 1.0 / mu_c
    lam = decomp.eigenvalues
    V = decomp.eigenvectors
    # R[j, l] = (A_1 phi_j, phi_l)_*
    R = (V.conj().T @ decomp.gram @ np.asarray(first_order_block) @ V).T
    scale = omega * omega * np.log(omega) if omega > 0 else 0.0
    idx = range(decomp.trusted) if indices is None else indices
    out = []
    for j in idx:
        gaps = lam[j] - lam
        gaps[j] = np.inf
        if np.min(np.abs(gaps)) < 1e-8:
            if indices is None:
                continue
            raise DegeneracyError(f"eigenvalue {lam[j]:.6g} (mode {j}) is not simple")
        tau0 = 0.5 * (1 / mu_m + 1 / mu_c) + diff * lam[j]
        gaps[j] = 1.0
        coef = R[j] / (diff * gaps)
        coef[j] = 0.0
        corr = V @ coef
        out.append(PerturbedEigenpair(
            index=int(j), tau=complex(tau0 + scale * R[j, j]), density=V[:, j] + scale * corr,
            tau_static=complex(tau0), tau_first_order=complex(R[j, j]), correction=corr))
    return out
