"""Dense multi-index polynomials over a few real variables.

Coefficients live in a complex ndarray ``coef`` with one axis per variable;
``coef[alpha]`` multiplies ``x**alpha``.  Degrees stay small (<= 3N for the
correction hierarchy), so dense storage and direct convolution products are
exact and fast enough.
"""

from math import factorial

import numpy as np

_TRIM_TOL = 1e-300


class MultiIndexPolynomial:
    def __init__(self, coef, nvars=None):
        coef = np.asarray(coef, dtype=complex)
        if coef.ndim == 0:
            if nvars is None:
                raise ValueError("scalar coefficient needs nvars")
            coef = coef.reshape((1,) * nvars)
        self.coef = coef

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero(nvars):
        return MultiIndexPolynomial(np.zeros((1,) * nvars, dtype=complex))

    @staticmethod
    def constant(value, nvars):
        c = np.zeros((1,) * nvars, dtype=complex)
        c[(0,) * nvars] = value
        return MultiIndexPolynomial(c)

    @staticmethod
    def monomial(alpha, value=1.0):
        c = np.zeros(tuple(a + 1 for a in alpha), dtype=complex)
        c[tuple(alpha)] = value
        return MultiIndexPolynomial(c)

    @staticmethod
    def from_dict(d, nvars):
        if not d:
            return MultiIndexPolynomial.zero(nvars)
        shape = tuple(max(a[i] for a in d) + 1 for i in range(nvars))
        c = np.zeros(shape, dtype=complex)
        for alpha, v in d.items():
            c[tuple(alpha)] = v
        return MultiIndexPolynomial(c)

    def to_dict(self, tol=0.0):
        out = {}
        for alpha in zip(*np.nonzero(np.abs(self.coef) > tol)):
            out[tuple(int(a) for a in alpha)] = complex(self.coef[alpha])
        return out

    # -- basic queries ----------------------------------------------------

    @property
    def nvars(self):
        return self.coef.ndim

    @property
    def degree(self):
        nz = np.nonzero(np.abs(self.coef) > _TRIM_TOL)
        if len(nz[0]) == 0:
            return 0
        return int(max(sum(idx) for idx in zip(*nz)))

    def norm_inf(self):
        """Sup norm of the coefficients."""
        return float(np.max(np.abs(self.coef)))

    def trim(self, tol=0.0):
        """Drop trailing all-(near)zero coefficient planes."""
        c = self.coef
        mask = np.abs(c) > tol
        if not mask.any():
            return MultiIndexPolynomial.zero(self.nvars)
        slices = []
        for ax in range(c.ndim):
            idx = np.nonzero(mask.any(axis=tuple(i for i in range(c.ndim) if i != ax)))[0]
            slices.append(slice(0, idx[-1] + 1))
        return MultiIndexPolynomial(np.where(mask, c, 0.0)[tuple(slices)])

    def __repr__(self):
        return f"MultiIndexPolynomial({self.to_dict(tol=0.0)!r})"

    # -- algebra -----------------------------------------------------------

    def _pad_to(self, shape):
        pad = [(0, s - cs) for s, cs in zip(shape, self.coef.shape)]
        return np.pad(self.coef, pad)

    def __add__(self, other):
        if np.isscalar(other):
            other = MultiIndexPolynomial.constant(other, self.nvars)
        shape = tuple(max(a, b) for a, b in zip(self.coef.shape, other.coef.shape))
        return MultiIndexPolynomial(self._pad_to(shape) + other._pad_to(shape))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (other * (-1.0))

    def __mul__(self, other):
        if np.isscalar(other):
            return MultiIndexPolynomial(self.coef * other)
        a, b = self.coef, other.coef
        out = np.zeros(tuple(sa + sb - 1 for sa, sb in zip(a.shape, b.shape)),
                       dtype=complex)
        for idx in zip(*np.nonzero(a)):
            window = tuple(slice(i, i + s) for i, s in zip(idx, b.shape))
            out[window] += a[idx] * b
        return MultiIndexPolynomial(out)

    __rmul__ = __mul__

    def deriv(self, axis):
        c = self.coef
        if c.shape[axis] == 1:
            return MultiIndexPolynomial.zero(self.nvars)
        sl = [slice(None)] * c.ndim
        sl[axis] = slice(1, None)
        d = np.moveaxis(c[tuple(sl)], axis, 0)
        d = d * (np.arange(1, c.shape[axis]).reshape((-1,) + (1,) * (c.ndim - 1)))
        return MultiIndexPolynomial(np.moveaxis(d, 0, axis))

    def mul_var(self, axis, coeff=1.0):
        """Multiply by coeff * x_axis."""
        c = self.coef
        shape = list(c.shape)
        shape[axis] += 1
        out = np.zeros(shape, dtype=complex)
        sl = [slice(None)] * c.ndim
        sl[axis] = slice(1, None)
        out[tuple(sl)] = c * coeff
        return MultiIndexPolynomial(out)

    def compose_linear(self, L):
        """Q(u) = P(L @ u) for an (nvars, m) matrix L; returns a poly in m vars."""
        L = np.asarray(L, dtype=complex)
        n, m = L.shape
        if n != self.nvars:
            raise ValueError("matrix rows must match variable count")
        # powers[i][k] = (sum_j L[i, j] u_j)^k
        powers = []
        for i in range(n):
            lin = MultiIndexPolynomial.zero(m)
            for j in range(m):
                if L[i, j] != 0.0:
                    lin = lin + MultiIndexPolynomial.monomial(
                        tuple(1 if jj == j else 0 for jj in range(m)), L[i, j])
            row = [MultiIndexPolynomial.constant(1.0, m)]
            for _ in range(self.coef.shape[i] - 1):
                row.append(row[-1] * lin)
            powers.append(row)
        out = MultiIndexPolynomial.zero(m)
        for alpha in zip(*np.nonzero(self.coef)):
            term = MultiIndexPolynomial.constant(self.coef[tuple(alpha)], m)
            for i, a in enumerate(alpha):
                if a:
                    term = term * powers[i][a]
            out = out + term
        return out

    # -- evaluation ---------------------------------------------------------

    def eval_grid(self, coords):
        """Evaluate on the tensor grid spanned by 1-d coordinate arrays."""
        if len(coords) != self.nvars:
            raise ValueError("one coordinate array per variable required")
        vals = self.coef
        for x in coords:
            x = np.asarray(x)
            vander = x[:, None] ** np.arange(vals.shape[0])
            vals = np.tensordot(vals, vander, axes=(0, 1))
        return vals

    def eval_points(self, pts):
        """Evaluate at scattered points, shape (..., nvars)."""
        pts = np.asarray(pts)
        out = np.zeros(pts.shape[:-1], dtype=complex)
        for alpha in zip(*np.nonzero(self.coef)):
            term = np.full(pts.shape[:-1], self.coef[tuple(alpha)])
            for i, a in enumerate(alpha):
                if a:
                    term = term * pts[..., i] ** a
            out += term
        return out

    # -- Gaussian-weighted norm ----------------------------------------------

    def gauss_norm_sq(self):
        """pi^{-k/2} * integral |P(u)|^2 exp(-|u|^2) du, computed exactly."""
        total = 0.0
        conj = np.conj(self.coef)
        for alpha in zip(*np.nonzero(self.coef)):
            for beta in zip(*np.nonzero(conj)):
                m = 1.0
                for a, b in zip(alpha, beta):
                    m *= gauss_moment(a + b)
                    if m == 0.0:
                        break
                if m:
                    total += (self.coef[tuple(alpha)] * conj[tuple(beta)] * m).real
        return float(total)


def gauss_moment(n):
    """pi^{-1/2} * integral u^n exp(-u^2) du."""
    if n % 2:
        return 0.0
    k = n // 2
    return factorial(2 * k) / (factorial(k) * 4.0 ** k)


def hermite(gamma):
    """Physicists' Hermite product H_gamma, via H_{n+1} = 2u H_n - 2n H_{n-1}."""
    gamma = tuple(gamma)
    out = MultiIndexPolynomial.constant(1.0, len(gamma))
    for axis, n in enumerate(gamma):
        h_prev = MultiIndexPolynomial.constant(1.0, len(gamma))
        h = h_prev
        for k in range(n):
            h_next = h.mul_var(axis, 2.0) - (2.0 * k) * h_prev
            h_prev, h = h, h_next
        out = out * h
    return out


def normalized_hermite(gamma):
    """H_gamma scaled to unit Gaussian-weighted L2 norm."""
    gamma = tuple(gamma)
    scale = 1.0
    for n in gamma:
        scale *= 2.0 ** n * factorial(n)
    return hermite(gamma) * (1.0 / np.sqrt(scale))


def raise_degree(poly, axis):
    """Ladder step: P -> (2 u_axis P - dP/du_axis) / sqrt(2)."""
    return (poly.mul_var(axis, 2.0) - poly.deriv(axis)) * (1.0 / np.sqrt(2.0))
