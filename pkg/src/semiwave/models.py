"""Catalog of model Hamiltonians with exact polynomial derivative data.

All symbols are polynomials in the 2d phase-space variables z = (q, p),
so gradients, Hessians and higher Taylor tensors are computed exactly by
re-centering the coefficient table (no automatic differentiation).
"""

from dataclasses import dataclass
from math import comb

import numpy as np

MAX_TAYLOR_ORDER = 6


@dataclass(frozen=True)
class PhasePoint:
    """A classical state (q, p) with position and momentum d-vectors."""

    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", np.atleast_1d(np.asarray(self.q, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))
        if self.q.shape != self.p.shape or self.q.ndim != 1:
            raise ValueError("q and p must be 1-d arrays of equal length")
        if not (np.all(np.isfinite(self.q)) and np.all(np.isfinite(self.p))):
            raise ValueError("phase point has non-finite entries")

    @property
    def d(self):
        return self.q.size

    def as_vector(self):
        return np.concatenate([self.q, self.p])

    @staticmethod
    def from_vector(z):
        z = np.asarray(z, dtype=float)
        d = z.size // 2
        return PhasePoint(z[:d], z[d:])


@dataclass(frozen=True)
class ModelHamiltonian:
    """A Hamiltonian symbol p(q, xi) given by a polynomial coefficient table.

    ``symbol`` maps exponent multi-indices over (q_1..q_d, p_1..p_d) to real
    coefficients.  ``d_par``/``d_perp`` record the central/transverse split
    when the model carries an invariant set K = {y = 0, eta = 0}.
    """

    name: str
    d: int
    d_par: int
    d_perp: int
    params: dict
    symbol: dict
    is_quadratic: bool
    has_invariant_K: bool
    max_taylor_order: int = MAX_TAYLOR_ORDER

    # -- evaluation ---------------------------------------------------

    def value(self, rho):
        z = _as_z(rho)
        total = 0.0
        for alpha, c in self.symbol.items():
            total += c * np.prod(z ** np.asarray(alpha))
        return float(total)

    def taylor_coeffs(self, rho, k):
        """Degree-k Taylor coefficients of the symbol at rho.

        Returns a dict {alpha: c} with |alpha| = k over the 2d variables and
        c = d^alpha p(rho) / alpha!, i.e. p(rho + z) = sum_k sum_alpha c z^alpha.
        """
        if not 0 <= k <= self.max_taylor_order:
            raise ValueError(f"taylor order {k} outside [0, {self.max_taylor_order}]")
        z0 = _as_z(rho)
        out = {}
        for a, c in self.symbol.items():
            for alpha in _sub_multi_indices(a, k):
                w = c
                for ai, bi, zi in zip(a, alpha, z0):
                    w *= comb(ai, bi) * zi ** (ai - bi)
                if w != 0.0:
                    out[alpha] = out.get(alpha, 0.0) + w
        return {a: c for a, c in out.items() if c != 0.0}

    def gradient(self, rho):
        g = np.zeros(2 * self.d)
        for alpha, c in self.taylor_coeffs(rho, 1).items():
            g[alpha.index(1)] = c
        return g

    def hessian(self, rho):
        h = np.zeros((2 * self.d, 2 * self.d))
        for alpha, c in self.taylor_coeffs(rho, 2).items():
            idx = [i for i, a in enumerate(alpha) for _ in range(a)]
            i, j = idx
            if i == j:
                h[i, i] = 2.0 * c
            else:
                h[i, j] = h[j, i] = c
        return h

    def vector_field(self, rho):
        """Hamiltonian vector field (dp/dxi, -dp/dx) at rho."""
        g = self.gradient(rho)
        return np.concatenate([g[self.d:], -g[:self.d]])

    # -- structure queries --------------------------------------------

    def is_kinetic_plus_potential(self):
        """True when the symbol is |xi|^2 + V(q)."""
        kin = {_unit_index(self.d + i, 2 * self.d, 2): 1.0 for i in range(self.d)}
        for alpha, c in self.symbol.items():
            if any(alpha[self.d:]):
                if kin.get(alpha) != c:
                    return False
        return all(self.symbol.get(a, 0.0) == c for a, c in kin.items())

    def potential(self, *mesh):
        """Evaluate V(q) on a meshgrid, for kinetic+potential symbols."""
        if not self.is_kinetic_plus_potential():
            raise ValueError(f"model {self.name!r} is not of kinetic+potential form")
        out = np.zeros(np.broadcast(*mesh).shape)
        for alpha, c in self.symbol.items():
            if any(alpha[self.d:]):
                continue
            term = c
            for i in range(self.d):
                if alpha[i]:
                    term = term * mesh[i] ** alpha[i]
            out = out + term
        return out


def _as_z(rho):
    if isinstance(rho, PhasePoint):
        return rho.as_vector()
    return np.asarray(rho, dtype=float)


def _unit_index(pos, n, power=1):
    alpha = [0] * n
    alpha[pos] = power
    return tuple(alpha)


def _sub_multi_indices(a, k):
    """All multi-indices alpha <= a (componentwise) with |alpha| = k."""
    out = []

    def rec(i, remaining, prefix):
        if i == len(a):
            if remaining == 0:
                out.append(tuple(prefix))
            return
        for b in range(min(a[i], remaining) + 1):
            rec(i + 1, remaining - b, prefix + [b])

    rec(0, k, [])
    return out


_MODEL_PARAMS = {
    "harmonic": {"d"},
    "dilation": {"d"},
    "anharmonic_quartic": {"beta"},
    "saddle_cubic": {"beta"},
    "nh2d": {"eps"},
}


def make_model(name, **params):
    """Build a model Hamiltonian from the catalog.

    harmonic            p = |xi|^2 + |x|^2
    dilation            p = x . xi
    anharmonic_quartic  p = xi^2 + x^2 + beta x^4
    saddle_cubic        p = xi^2 - x^2 + beta x^3
    nh2d                p = xi^2 + eta^2 + x^2 - y^2 + eps x y^2
    """
    if name not in _MODEL_PARAMS:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(_MODEL_PARAMS)}")
    unknown = set(params) - _MODEL_PARAMS[name]
    if unknown:
        raise ValueError(f"invalid parameters for {name!r}: {sorted(unknown)}")

    if name == "harmonic":
        d = int(params.get("d", 1))
        n = 2 * d
        symbol = {}
        for i in range(d):
            symbol[_unit_index(i, n, 2)] = 1.0
            symbol[_unit_index(d + i, n, 2)] = 1.0
        return ModelHamiltonian(name, d, d, 0, {"d": d}, symbol,
                                is_quadratic=True, has_invariant_K=False)

    if name == "dilation":
        d = int(params.get("d", 1))
        n = 2 * d
        symbol = {}
        for i in range(d):
            alpha = [0] * n
            alpha[i] = 1
            alpha[d + i] = 1
            symbol[tuple(alpha)] = 1.0
        return ModelHamiltonian(name, d, 0, d, {"d": d}, symbol,
                                is_quadratic=True, has_invariant_K=False)

    if name == "anharmonic_quartic":
        beta = float(params.get("beta", 0.1))
        symbol = {(0, 2): 1.0, (2, 0): 1.0}
        if beta:
            symbol[(4, 0)] = beta
        return ModelHamiltonian(name, 1, 1, 0, {"beta": beta}, symbol,
                                is_quadratic=(beta == 0.0), has_invariant_K=False)

    if name == "saddle_cubic":
        beta = float(params.get("beta", 0.3))
        symbol = {(0, 2): 1.0, (2, 0): -1.0}
        if beta:
            symbol[(3, 0)] = beta
        return ModelHamiltonian(name, 1, 0, 1, {"beta": beta}, symbol,
                                is_quadratic=(beta == 0.0), has_invariant_K=False)

    # nh2d: variables (x, y, xi, eta); K = {y = eta = 0} is flow invariant
    # because every symbol term is even in (y, eta) or vanishes with y.
    eps = float(params.get("eps", 0.0))
    symbol = {
        (0, 0, 2, 0): 1.0,
        (0, 0, 0, 2): 1.0,
        (2, 0, 0, 0): 1.0,
        (0, 2, 0, 0): -1.0,
    }
    if eps:
        symbol[(1, 2, 0, 0)] = eps
    return ModelHamiltonian("nh2d", 2, 1, 1, {"eps": eps}, symbol,
                            is_quadratic=(eps == 0.0), has_invariant_K=True)


def taylor_tensor(model, rho, k):
    """(1/k!) D^k p(rho) as a multi-index -> coefficient map."""
    return model.taylor_coeffs(rho, k)


def hamiltonian_vector_field(model, rho):
    return model.vector_field(rho)
