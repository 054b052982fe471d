"""Small helpers for real symplectic matrices in (q, p) block ordering."""

import numpy as np
from scipy.linalg import expm, sqrtm


def standard_j(d):
    """The form matrix J with omega(z, z') = z . J z'."""
    j = np.zeros((2 * d, 2 * d))
    j[:d, d:] = np.eye(d)
    j[d:, :d] = -np.eye(d)
    return j


def symplectic_residual(kappa):
    d = kappa.shape[0] // 2
    j = standard_j(d)
    return float(np.max(np.abs(kappa.T @ j @ kappa - j)))


def project_symplectic(kappa):
    """Polar-type correction: kappa A^{-1/2} with A = J^{-1} kappa^T J kappa.

    A is within rounding of the identity along integrated trajectories, so a
    truncated Neumann series for A^{-1/2} suffices; the dense matrix square
    root is kept as a fallback for badly drifted inputs.
    """
    d = kappa.shape[0] // 2
    j = standard_j(d)
    a = -j @ (kappa.T @ j @ kappa)  # J^{-1} = -J
    e = a - np.eye(2 * d)
    if np.max(np.abs(e)) < 1e-3:
        corr = np.eye(2 * d) - 0.5 * e + 0.375 * (e @ e)
    else:
        corr = np.real(sqrtm(np.linalg.inv(a)))
    return kappa @ corr


def omega(u, v):
    """Symplectic pairing u . J v = <q_u, p_v> - <p_u, q_v>."""
    d = u.shape[0] // 2
    return float(u[:d] @ v[d:] - u[d:] @ v[:d])


def random_symplectic(d, rng, scale=0.7):
    """exp(J S) for a random symmetric S; exactly symplectic up to expm accuracy."""
    s = rng.normal(size=(2 * d, 2 * d)) * scale / np.sqrt(2 * d)
    s = 0.5 * (s + s.T)
    return expm(standard_j(d) @ s)


def blocks(kappa):
    d = kappa.shape[0] // 2
    return kappa[:d, :d], kappa[:d, d:], kappa[d:, :d], kappa[d:, d:]
