"""Coherent, squeezed and excited wavepackets on grids.

Exponent convention: the centered state is

    (pi hbar)^{-d/4} |det Im G|^{1/4} P(Im(G)^{1/2} x / sqrt(hbar))
        * exp(i x . G x / (2 hbar)),

and the Weyl-Heisenberg translation is

    T(q, p) u(x) = exp(-i q.p/(2 hbar)) exp(i p.x/hbar) u(x - q).
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .errors import CoverageError
from .grids import Axis, GridWavefunction, inner_product
from .metaplectic import HagedornFrame, _sym_sqrt, frame_from_siegel, identity_frame
from .models import PhasePoint
from .poly import MultiIndexPolynomial, raise_degree

__all__ = [
    "GaussianWavepacket", "eval_wavepacket", "weyl_heisenberg", "inner_product",
    "weighted_sobolev_norm", "fourier_bargmann", "reconstruct_from_bargmann",
    "apply_creation", "position_spread", "wavepacket_axes",
]


@dataclass(frozen=True)
class GaussianWavepacket:
    """Center rho, Hagedorn frame, polynomial factor and global phase."""

    hbar: float
    center: PhasePoint
    frame: HagedornFrame
    poly: MultiIndexPolynomial = None
    phase: float = 0.0

    def __post_init__(self):
        if self.poly is None:
            object.__setattr__(self, "poly",
                               MultiIndexPolynomial.constant(1.0, self.frame.d))
        if not 0.0 < self.hbar <= 1.0:
            raise ValueError("hbar must lie in (0, 1]")

    @property
    def d(self):
        return self.frame.d

    def gamma(self):
        return self.frame.gamma()

    def analytic_norm(self):
        """L2 norm, independent of the frame by the normalization choice."""
        return float(np.sqrt(self.poly.gauss_norm_sq()))

    def with_(self, **kw):
        return replace(self, **kw)


def coherent_state(hbar, center, gamma=None, poly=None, phase=0.0):
    """Convenience constructor; gamma defaults to i*I (standard coherent)."""
    if not isinstance(center, PhasePoint):
        center = PhasePoint.from_vector(np.asarray(center, dtype=float))
    if gamma is None:
        frame = identity_frame(center.d)
    elif isinstance(gamma, HagedornFrame):
        frame = gamma
    else:
        frame = frame_from_siegel(np.atleast_2d(np.asarray(gamma, dtype=complex)))
    return GaussianWavepacket(hbar, center, frame, poly, phase)


def eval_wavepacket(state, axes, check_coverage=True):
    """Sample the wavepacket on the tensor grid spanned by axes."""
    hbar = state.hbar
    g = state.frame.gamma()
    sqrt_im, _ = _sym_sqrt(g.imag)
    q, p = state.center.q, state.center.p
    mesh = np.meshgrid(*[ax.points() for ax in axes], indexing="ij")
    rel = [m - qi for m, qi in zip(mesh, q)]

    quad = np.zeros(mesh[0].shape, dtype=complex)
    for i in range(state.d):
        for j in range(state.d):
            if g[i, j] != 0.0:
                quad = quad + g[i, j] * rel[i] * rel[j]
    phase = 0.5j * quad / hbar
    for i in range(state.d):
        phase = phase + 1j * p[i] * mesh[i] / hbar
    phase = phase + 1j * (state.phase - 0.5 * float(q @ p) / hbar)

    scaled = np.stack([sum(sqrt_im[i, j] * rel[j] for j in range(state.d))
                       for i in range(state.d)], axis=-1) / np.sqrt(hbar)
    pref = (np.pi * hbar) ** (-state.d / 4.0) \
        * abs(np.linalg.det(g.imag)) ** 0.25
    values = pref * state.poly.eval_points(scaled) * np.exp(phase)
    out = GridWavefunction(hbar, axes, values)
    if check_coverage:
        out.check_coverage(ratio=1e-8)
    return out


def wavepacket_axes(state, extent_factor=12.0, max_points=4096, pad_momentum=6.0):
    """Grid axes adapted to the state: extent covers the position spread, and
    the spacing resolves the momentum content including the polynomial factor."""
    hbar = state.hbar
    inv_im = np.linalg.inv(state.frame.im_gamma())
    deg = state.poly.degree
    widen = np.sqrt(1.0 + deg)
    sig_x = np.sqrt(hbar * np.diag(inv_im)) * widen
    axes = []
    g = state.frame.gamma()
    for i in range(state.d):
        half = extent_factor * max(np.sqrt(hbar), sig_x[i])
        # momentum content: center plus quadratic-phase slope at the support edge
        sig_p = np.sqrt(hbar * state.frame.im_gamma()[i, i]) * widen
        p_max = abs(state.center.p[i]) + pad_momentum * sig_p \
            + abs(g[i, i].real) * extent_factor * max(np.sqrt(hbar), sig_x[i])
        spacing_p = np.pi * hbar / p_max / 4.0 if p_max > 0 else np.inf
        spacing = min(np.sqrt(hbar) / 6.0, spacing_p)
        n = 64
        while 2.0 * half / n > spacing and n < max_points:
            n *= 2
        axes.append(Axis(state.center.q[i] - half, 2.0 * half / n, n))
    return tuple(axes)


def weyl_heisenberg(q, p, u, interp_tol=1e-9):
    """Phase-space translation T(q, p) of a grid wavefunction."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    shifts = np.array([qi / ax.spacing for qi, ax in zip(q, u.axes)])
    rounded = np.round(shifts)
    vals = u.values
    if np.max(np.abs(shifts - rounded)) < interp_tol:
        for ax, k in enumerate(rounded.astype(int)):
            vals = _integer_shift(vals, k, ax)
    else:
        re = ndimage.shift(u.values.real, shifts, order=3, mode="constant")
        im = ndimage.shift(u.values.imag, shifts, order=3, mode="constant")
        vals = re + 1j * im
    mesh = np.meshgrid(*[ax.points() for ax in u.axes], indexing="ij")
    mod = sum(p[i] * mesh[i] for i in range(u.d))
    vals = vals * np.exp(1j * (mod - 0.5 * float(q @ p)) / u.hbar)
    return u.copy_with(vals)


def _integer_shift(values, k, axis):
    if k == 0:
        return values
    out = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if k > 0:
        dst[axis] = slice(k, None)
        src[axis] = slice(0, -k)
    else:
        dst[axis] = slice(0, k)
        src[axis] = slice(-k, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


def weighted_sobolev_norm(u, k_max, alias_tol=1e-8):
    """sup over |alpha|+|beta| <= K of the L2 norm of x^alpha (hbar d)^beta u.

    Derivatives are spectral; raises if the spectral tail indicates aliasing.
    """
    if k_max > 6:
        raise ValueError("K <= 6 supported")
    spec = np.fft.fftn(u.values)
    power = np.abs(spec) ** 2
    tail = np.zeros_like(power, dtype=bool)
    for ax in range(u.d):
        n = power.shape[ax]
        freqs = np.fft.fftfreq(n)
        sel = np.abs(freqs) > 0.375  # top quarter of the band
        idx = [None] * u.d
        idx[ax] = slice(None)
        tail |= sel[tuple(idx)] if u.d > 1 else sel
    total = power.sum()
    if total > 0 and power[tail].sum() / total > alias_tol:
        raise ValueError("spectral tail too large: grid under-resolves the state")

    mesh = np.meshgrid(*[ax.points() for ax in u.axes], indexing="ij")
    kvecs = [2.0 * np.pi * np.fft.fftfreq(ax.count, ax.spacing) for ax in u.axes]
    kmesh = np.meshgrid(*kvecs, indexing="ij")

    best = 0.0
    for alpha in _multi_indices(u.d, k_max):
        da = sum(alpha)
        dvals = u.values
        if da:
            sp = spec.copy()
            for ax, a in enumerate(alpha):
                if a:
                    sp = sp * (1j * u.hbar * kmesh[ax]) ** a
            dvals = np.fft.ifftn(sp)
        for beta in _multi_indices(u.d, k_max - da):
            w = dvals
            for ax, b in enumerate(beta):
                if b:
                    w = w * mesh[ax] ** b
            best = max(best, u.copy_with(w).norm())
    return best


def _multi_indices(d, max_total):
    out = []

    def rec(i, rem, pref):
        if i == d:
            out.append(tuple(pref))
            return
        for a in range(rem + 1):
            rec(i + 1, rem - a, pref + [a])

    rec(0, max_total, [])
    return out


# -- Fourier-Bargmann transform ---------------------------------------------


def fourier_bargmann(u, rho_axes):
    """u^#(rho) = (2 pi hbar)^{-d/2} <u, phi_rho> on a phase-space grid.

    rho_axes is a tuple of 2d Axis objects (q axes first, then p axes);
    resolution should be <= sqrt(hbar)/2 per axis to capture the state.
    """
    d = u.d
    hbar = u.hbar
    if len(rho_axes) != 2 * d:
        raise ValueError("need 2d phase-space axes")
    for ax in rho_axes:
        if ax.spacing > np.sqrt(hbar) / 2 + 1e-12:
            raise CoverageError("phase-space grid coarser than sqrt(hbar)/2")
    q_axes, p_axes = rho_axes[:d], rho_axes[d:]
    xs = u.coords()
    w = u._trapz_weights()
    pref = (2.0 * np.pi * hbar) ** (-d / 2.0) * (np.pi * hbar) ** (-d / 4.0)
    # conj(phi_{q,p})(x) = (pi hbar)^{-d/4} e^{i q.p/2h} e^{-i p.x/h} e^{-|x-q|^2/2h}
    emats = [np.exp(-1j * np.outer(pax.points(), x) / hbar)
             for pax, x in zip(p_axes, xs)]
    out_shape = tuple(ax.count for ax in rho_axes)
    out = np.zeros(out_shape, dtype=complex)
    for qidx in np.ndindex(*[ax.count for ax in q_axes]):
        qvec = np.array([ax.points()[i] for ax, i in zip(q_axes, qidx)])
        gauss = np.ones(u.values.shape)
        for ax_i, (x, qi) in enumerate(zip(xs, qvec)):
            shape = [1] * d
            shape[ax_i] = -1
            gauss = gauss * np.exp(-(x - qi) ** 2 / (2.0 * hbar)).reshape(shape)
        vals = u.values * gauss * w
        for ax_i, em in enumerate(emats):
            vals = np.moveaxis(np.tensordot(em, vals, axes=(1, ax_i)), 0, ax_i)
        pm = np.meshgrid(*[ax.points() for ax in p_axes], indexing="ij")
        qp = sum(pi * qi for pi, qi in zip(pm, qvec))
        out[qidx] = pref * vals * np.exp(0.5j * qp / hbar)
    return out


def bargmann_norm(u_sharp, rho_axes):
    """Discrete L2(d rho) norm of phase-space samples."""
    vol = np.prod([ax.spacing for ax in rho_axes])
    return float(np.sqrt(np.sum(np.abs(u_sharp) ** 2) * vol))


def reconstruct_from_bargmann(u_sharp, rho_axes, target_axes, hbar):
    """Resolution-of-identity quadrature: u = (2 pi h)^{-d/2} int u^# phi_rho."""
    d = len(rho_axes) // 2
    q_axes, p_axes = rho_axes[:d], rho_axes[d:]
    xs = [ax.points() for ax in target_axes]
    pref = (2.0 * np.pi * hbar) ** (-d / 2.0) * (np.pi * hbar) ** (-d / 4.0)
    vol = np.prod([ax.spacing for ax in rho_axes])
    emats = [np.exp(1j * np.outer(x, pax.points()) / hbar)
             for x, pax in zip(xs, p_axes)]
    out = np.zeros(tuple(ax.count for ax in target_axes), dtype=complex)
    for qidx in np.ndindex(*[ax.count for ax in q_axes]):
        qvec = np.array([ax.points()[i] for ax, i in zip(q_axes, qidx)])
        block = u_sharp[qidx]  # shape over p axes
        pm = np.meshgrid(*[ax.points() for ax in p_axes], indexing="ij")
        qp = sum(pi * qi for pi, qi in zip(pm, qvec))
        block = block * np.exp(-0.5j * qp / hbar)
        vals = block
        for ax_i, em in enumerate(emats):
            vals = np.moveaxis(np.tensordot(em, vals, axes=(1, ax_i)), 0, ax_i)
        gauss = np.ones(out.shape)
        for ax_i, (x, qi) in enumerate(zip(xs, qvec)):
            shape = [1] * d
            shape[ax_i] = -1
            gauss = gauss * np.exp(-(x - qi) ** 2 / (2.0 * hbar)).reshape(shape)
        out += vals * gauss
    return GridWavefunction(hbar, target_axes, pref * vol * out)


def apply_creation(axis, state):
    """Ladder raise along one axis; requires the standard frame Gamma = i I."""
    g = state.frame.gamma()
    if np.max(np.abs(g - 1j * np.eye(state.d))) > 1e-10:
        raise ValueError("apply_creation requires the standard frame; "
                         "use transport_excited for general frames")
    return state.with_(poly=raise_degree(state.poly, axis))


def position_spread(u):
    """sqrt(2 * largest eigenvalue) of the position covariance of |u|^2."""
    w = u._trapz_weights()
    dens = w * np.abs(u.values) ** 2
    total = dens.sum()
    mesh = u.meshgrid()
    means = [float((dens * m).sum() / total) for m in mesh]
    cov = np.zeros((u.d, u.d))
    for i in range(u.d):
        for j in range(u.d):
            cov[i, j] = float((dens * (mesh[i] - means[i])
                               * (mesh[j] - means[j])).sum() / total)
    return float(np.sqrt(2.0 * np.linalg.eigvalsh(cov).max()))
