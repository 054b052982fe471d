"""Metaplectic action on squeezed and excited states.

States carry (M, N) frame pairs as primary data; Gamma = N M^{-1} is derived.
Frames compose linearly under symplectic maps, which avoids matrix inversions
mid-trajectory.  Sign convention: conj(M)^T N - conj(N)^T M = +2i I, the choice
consistent with Im Gamma positive definite.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .errors import CausticError, CoverageError
from .grids import GridWavefunction
from .poly import MultiIndexPolynomial
from .symplectic import blocks

DET_M_TOL = 1e-12


def _sym_sqrt(a):
    """Square root and inverse square root of a symmetric positive matrix."""
    w, v = np.linalg.eigh(a)
    if w.min() <= 0.0:
        raise ValueError("matrix not positive definite")
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T


def check_siegel(gamma, tol=1e-10):
    """Validate a Siegel upper half-space matrix; returns (sym_res, min_eig)."""
    gamma = np.asarray(gamma, dtype=complex)
    sym_res = float(np.max(np.abs(gamma - gamma.T)))
    min_eig = float(np.linalg.eigvalsh(gamma.imag).min())
    if sym_res > tol:
        raise ValueError(f"Gamma not symmetric (residual {sym_res:.2e})")
    if min_eig <= 0.0:
        raise ValueError(f"Im Gamma not positive definite (min eig {min_eig:.2e})")
    return sym_res, min_eig


@dataclass(frozen=True)
class SiegelMatrix:
    """Complex symmetric matrix with positive-definite imaginary part."""

    gamma: np.ndarray

    def __post_init__(self):
        g = np.atleast_2d(np.asarray(self.gamma, dtype=complex))
        check_siegel(g)
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class HagedornFrame:
    """Complex pair (M, N) parametrizing a squeezed state; Gamma = N M^{-1}."""

    M: np.ndarray
    N: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M", np.atleast_2d(np.asarray(self.M, dtype=complex)))
        object.__setattr__(self, "N", np.atleast_2d(np.asarray(self.N, dtype=complex)))

    @property
    def d(self):
        return self.M.shape[0]

    def gamma(self):
        return self.N @ np.linalg.inv(self.M)

    def im_gamma(self):
        """Im Gamma = conj(M)^{-T} M^{-1}, symmetric positive definite."""
        return np.linalg.inv(self.M @ np.conj(self.M).T).real

    def det_m(self):
        return complex(np.linalg.det(self.M))

    def residuals(self):
        """Frame invariants: (pairing, Gamma symmetry, Im Gamma identity)."""
        eye = np.eye(self.d)
        pair = np.conj(self.M).T @ self.N - np.conj(self.N).T @ self.M - 2j * eye
        mtn = self.M.T @ self.N
        g = self.gamma()
        res_pair = float(np.max(np.abs(pair)))
        res_sym = float(np.max(np.abs(mtn - mtn.T)))
        res_im = float(np.max(np.abs(g.imag - self.im_gamma())))
        return res_pair, res_sym, res_im

    def validate(self, tol=1e-9):
        if abs(self.det_m()) < DET_M_TOL:
            raise CausticError(f"|det M| = {abs(self.det_m()):.2e} below {DET_M_TOL}")
        res = self.residuals()
        if max(res) > tol:
            raise ValueError(f"frame invariants violated: residuals {res}")
        if np.linalg.eigvalsh(self.im_gamma()).min() <= 0.0:
            raise ValueError("Im Gamma not positive definite")
        return res

    def symplectic_matrix(self):
        """The real symplectic matrix [[Re M, Im M], [Re N, Im N]]."""
        return np.block([[self.M.real, self.M.imag], [self.N.real, self.N.imag]])


def identity_frame(d):
    return HagedornFrame(np.eye(d), 1j * np.eye(d))


def frame_from_siegel(gamma):
    """A frame with N M^{-1} = Gamma: M = (Im Gamma)^{-1/2}, N = Gamma M."""
    gamma = np.atleast_2d(np.asarray(gamma, dtype=complex))
    check_siegel(gamma)
    _, inv_sqrt = _sym_sqrt(gamma.imag)
    return HagedornFrame(inv_sqrt, gamma @ inv_sqrt)


def frame_from_symplectic(kappa, frame_or_gamma):
    """Advance a frame by a symplectic matrix: [M; N] <- kappa [M0; N0]."""
    f0 = _as_frame(frame_or_gamma)
    a, b, c, d = blocks(np.asarray(kappa, dtype=float))
    m = a @ f0.M + b @ f0.N
    n = c @ f0.M + d @ f0.N
    f1 = HagedornFrame(m, n)
    if abs(f1.det_m()) < DET_M_TOL:
        raise CausticError("central caustic: |det M| below threshold")
    return f1


def _as_frame(frame_or_gamma):
    if isinstance(frame_or_gamma, HagedornFrame):
        return frame_or_gamma
    if isinstance(frame_or_gamma, SiegelMatrix):
        return frame_from_siegel(frame_or_gamma.gamma)
    return frame_from_siegel(frame_or_gamma)


def siegel_action(kappa, gamma0):
    """Gamma1 = (C + D Gamma0)(A + B Gamma0)^{-1}."""
    gamma0 = np.atleast_2d(np.asarray(gamma0, dtype=complex))
    a, b, c, d = blocks(np.asarray(kappa, dtype=float))
    den = a + b @ gamma0
    if abs(np.linalg.det(den)) < DET_M_TOL:
        raise CausticError("central caustic: A + B Gamma0 nearly singular")
    gamma1 = (c + d @ gamma0) @ np.linalg.inv(den)
    gamma1 = 0.5 * (gamma1 + gamma1.T)
    return gamma1


def trace_identity_residual(frame):
    """| ||Gamma ImGamma^{-1/2}||_F^2 - ||N||_F^2 |, zero for exact frames."""
    g = frame.gamma()
    _, inv_sqrt = _sym_sqrt(g.imag)
    lhs = np.linalg.norm(g @ inv_sqrt, "fro") ** 2
    rhs = np.linalg.norm(frame.N, "fro") ** 2
    return float(abs(lhs - rhs))


# -- polynomial transport (exact Egorov for linear symbols) -----------------


def transport_poly(kappa, frame0, poly0):
    """Advance (frame, polynomial) normal-form data through kappa.

    The state |det Im G0|^{1/4} P(Im G0^{1/2} x) exp(i x.G0 x/2) maps, modulo
    global phase, to the same form with G1 and Q of the same degree.  Each
    source coordinate x_j is the Weyl quantization of a linear symbol, which
    transports exactly to the linear symbol z -> (kappa^{-1} z)_{x_j}; the
    transported operator acts on polynomial-times-Gaussian data in closed form.
    """
    d = frame0.d
    frame1 = frame_from_symplectic(kappa, frame0)
    g0, g1 = frame0.gamma(), frame1.gamma()
    sqrt0, _ = _sym_sqrt(g0.imag)
    _, inv_sqrt1 = _sym_sqrt(g1.imag)

    r0 = poly0.compose_linear(sqrt0)
    kinv = np.linalg.inv(np.asarray(kappa, dtype=float))
    lead = []   # lead[j] = a_j + Gamma1 b_j for symbol a_j.x + b_j.xi
    bvec = []
    for j in range(d):
        a_j = kinv[j, :d]
        b_j = kinv[j, d:]
        lead.append(a_j + g1 @ b_j)
        bvec.append(b_j)

    def apply_op(j, poly):
        out = MultiIndexPolynomial.zero(d)
        for k in range(d):
            if lead[j][k] != 0.0:
                out = out + poly.mul_var(k, lead[j][k])
            if bvec[j][k] != 0.0:
                out = out + poly.deriv(k) * (-1j * bvec[j][k])
        return out

    # operators for different j commute; build images of monomials incrementally
    images = {(0,) * d: MultiIndexPolynomial.constant(1.0, d)}

    def image_of(alpha):
        if alpha in images:
            return images[alpha]
        j = next(i for i, a in enumerate(alpha) if a > 0)
        prev = tuple(a - 1 if i == j else a for i, a in enumerate(alpha))
        img = apply_op(j, image_of(prev))
        images[alpha] = img
        return img

    r1 = MultiIndexPolynomial.zero(d)
    for alpha in zip(*np.nonzero(r0.coef)):
        r1 = r1 + r0.coef[tuple(alpha)] * image_of(tuple(int(a) for a in alpha))
    q1 = r1.compose_linear(inv_sqrt1)
    return frame1, q1.trim(tol=q1.norm_inf() * 1e-14 if q1.norm_inf() else 0.0)


def transport_excited(kappa, state):
    """Metaplectic transport of a GaussianWavepacket (frame + polynomial)."""
    from .states import GaussianWavepacket

    frame1, poly1 = transport_poly(kappa, state.frame, state.poly)
    return GaussianWavepacket(hbar=state.hbar, center=state.center,
                              frame=frame1, poly=poly1, phase=state.phase)


# -- grid realization via generator factorization ---------------------------


def _fourier_factor_matrices(u):
    """Per-axis quadrature matrices of the hbar-Fourier transform, evaluated on
    the grid's own points (output momenta = input positions)."""
    mats = []
    for ax in u.axes:
        x = ax.points()
        w = np.full(ax.count, ax.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        mats.append(np.exp(-1j * np.outer(x, x) / u.hbar)
                    / np.sqrt(2.0 * np.pi * u.hbar) * w)
    return mats


def hbar_fourier(u):
    """hbar-scaled Fourier transform sampled on the same axes."""
    vals = u.values
    for axis, mat in enumerate(_fourier_factor_matrices(u)):
        vals = np.moveaxis(np.tensordot(mat, vals, axes=(1, axis)), 0, axis)
    return u.copy_with(vals)


def _apply_quadratic_phase(u, w):
    mesh = u.meshgrid()
    quad = np.zeros_like(mesh[0])
    for i in range(u.d):
        for j in range(u.d):
            if w[i, j] != 0.0:
                quad = quad + w[i, j] * mesh[i] * mesh[j]
    return u.copy_with(u.values * np.exp(0.5j * quad / u.hbar))


def _apply_linear_scaling(u, b):
    """u -> |det B|^{-1/2} u(B^{-1} x), spline interpolation on the grid."""
    binv = np.linalg.inv(b)
    mesh = u.meshgrid()
    pts = np.stack([sum(binv[i, j] * mesh[j] for j in range(u.d))
                    for i in range(u.d)])
    idx = np.stack([(pts[i] - u.axes[i].origin) / u.axes[i].spacing
                    for i in range(u.d)])
    re = ndimage.map_coordinates(u.values.real, idx, order=3, mode="constant")
    im = ndimage.map_coordinates(u.values.imag, idx, order=3, mode="constant")
    return u.copy_with((re + 1j * im) / np.sqrt(abs(np.linalg.det(b))))


def _vanvleck_apply(a, b, dd, values, axis, ax_index, hbar, max_refine=32):
    """Apply the quadrature kernel exp(i (d x^2 - 2 x y + a y^2)/(2 b hbar))
    / sqrt(2 pi hbar |b|) along one array axis.

    The input is windowed to its support and FFT-upsampled until the kernel
    oscillation is resolved, so far-field output samples stay clean.
    """
    x = axis.points()
    v = np.moveaxis(values, ax_index, 0)
    lead = v.shape[0]
    mag = np.max(np.abs(v.reshape(lead, -1)), axis=1)
    peak = mag.max()
    if peak == 0.0:
        return values
    alive = np.nonzero(mag > 1e-17 * peak)[0]
    i0 = max(int(alive[0]) - 4, 0)
    i1 = min(int(alive[-1]) + 5, lead)
    win = v[i0:i1]
    y = x[i0:i1]

    y_sup = max(abs(y[0]), abs(y[-1]))
    x_max = max(abs(x[0]), abs(x[-1]))
    freq = (x_max + abs(a) * y_sup) / (abs(b) * hbar)
    refine = max(1, int(np.ceil(freq * axis.spacing / (0.66 * np.pi))))
    if refine > max_refine:
        raise CoverageError("grid too coarse to resolve the metaplectic kernel")
    if refine > 1:
        n_fine = refine * win.shape[0]
        win = signal.resample(np.ascontiguousarray(win), n_fine, axis=0)
        y = y[0] + (axis.spacing / refine) * np.arange(n_fine)
    w = np.full(y.size, axis.spacing / refine)
    w[0] *= 0.5
    w[-1] *= 0.5
    phase = (dd * x[:, None] ** 2 - 2.0 * np.outer(x, y) + a * y[None, :] ** 2) \
        / (2.0 * b)
    kern = np.exp(1j * phase / hbar) / np.sqrt(2.0 * np.pi * hbar * abs(b)) * w
    out = np.tensordot(kern, win, axes=(1, 0))
    return np.moveaxis(out, 0, ax_index)


def _meta1d_factors(kappa2):
    """Cartan factorization of a 1-d symplectic matrix into kernel parameters.

    Returns (a, b, d) triples, in application order; each factor keeps the
    kernel oscillation at the scale of the hbar-Fourier transform itself.
    """
    uu, sv, vt = np.linalg.svd(np.asarray(kappa2, dtype=float))
    if np.linalg.det(uu) < 0.0:
        # move the reflection through the diagonal factor: P = diag(1, -1)
        # commutes with it, so U P and P V^T are both proper rotations
        flip = np.diag([1.0, -1.0])
        uu = uu @ flip
        vt = flip @ vt
    theta_u = np.arctan2(uu[0, 1], uu[0, 0])
    theta_v = np.arctan2(vt[0, 1], vt[0, 0])
    s = sv[0]

    def rotation_factors(theta):
        if abs(theta) < 1e-14:
            return []
        c, sn = np.cos(theta), np.sin(theta)
        if abs(sn) >= 0.3:
            return [(c, sn, c)]
        c2, s2 = np.cos(theta - np.pi / 2), np.sin(theta - np.pi / 2)
        return [(0.0, 1.0, 0.0), (c2, s2, c2)]

    factors = rotation_factors(theta_v)
    if abs(s - 1.0) > 1e-14:
        # diag(s, 1/s) = [diag(s, 1/s) (-J)] . J with a pure-chirp second factor
        factors.append((0.0, 1.0, 0.0))
        factors.append((0.0, -s, 0.0))
    factors.extend(rotation_factors(theta_u))
    return factors


def _meta1d_apply(kappa2, values, axis, ax_index, hbar):
    if np.max(np.abs(np.asarray(kappa2) - np.eye(2))) < 1e-14:
        return values
    for a, b, dd in _meta1d_factors(kappa2):
        values = _vanvleck_apply(a, b, dd, values, axis, ax_index, hbar)
    return values


def _axis_separable_blocks(kappa, d):
    """Per-axis 2x2 blocks when kappa is a direct sum over (x_i, xi_i) planes."""
    parts = []
    for i in range(d):
        rows = [i, d + i]
        sub = kappa[np.ix_(rows, rows)]
        rest = kappa.copy()
        rest[np.ix_(rows, rows)] = 0.0
        if np.any(np.abs(rest[rows, :]) > 1e-12) or np.any(np.abs(rest[:, rows]) > 1e-12):
            return None
        parts.append(sub)
    return parts


def metaplectic_apply_grid(kappa, u):
    """Apply the metaplectic operator of kappa on a grid, up to global phase.

    In one dimension (or for kappa acting separately on each (x_i, xi_i)
    plane) the operator is a single exact quadrature kernel per axis.  The
    generic multi-dimensional case factors into quadratic phases, one
    hbar-Fourier transform and a spline-interpolated linear scaling.
    """
    kappa = np.asarray(kappa, dtype=float)
    d = u.d
    parts = _axis_separable_blocks(kappa, d) if d > 1 else [kappa]
    if parts is not None:
        vals = u.values
        for axis_i, sub in enumerate(parts):
            vals = _meta1d_apply(sub, vals, u.axes[axis_i], axis_i, u.hbar)
        return u.copy_with(vals)
    return _apply_general(kappa, u)


def _apply_general(kappa, u):
    a, b, _, dd = blocks(kappa)
    scale = max(np.linalg.norm(kappa), 1.0)
    if np.linalg.svd(b, compute_uv=False).min() <= 1e-8 * scale:
        jm = standard_j(u.d)
        a2, b2, _, _ = blocks(kappa @ (-jm))
        if np.linalg.svd(b2, compute_uv=False).min() <= 1e-8 * scale:
            raise CausticError("metaplectic factorization failed: singular blocks")
        return _apply_three_factor(kappa @ (-jm), hbar_fourier(u))
    return _apply_three_factor(kappa, u)


def _apply_three_factor(kappa, u):
    """kappa with invertible B block: phase, Fourier, scaling, phase."""
    a, b, _, dd = blocks(kappa)
    w1 = np.linalg.solve(b, a)
    w1 = 0.5 * (w1 + w1.T)
    w2 = dd @ np.linalg.inv(b)
    w2 = 0.5 * (w2 + w2.T)
    out = _apply_quadratic_phase(u, w1)
    out = hbar_fourier(out)
    out = _apply_linear_scaling(out, b)
    return _apply_quadratic_phase(out, w2)
