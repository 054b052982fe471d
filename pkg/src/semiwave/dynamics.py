"""Classical dynamics: flows, variational equations, hyperbolic splittings,
isotropic manifold graphs and the log(1/h) time thresholds.

The integrator is a fixed-stage RK4 with per-sample step halving until the
Richardson error estimate passes, plus one polar-type symplectic re-projection
of the Jacobian per output sample.  Models are non-separable polynomials
(x . xi), so splitting integrators are not an option.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (DegenerateHyperbolicityError, EscapeError,
                     NonConvergenceError, ProjectabilityError)
from .models import PhasePoint
from .symplectic import project_symplectic, standard_j, symplectic_residual

RICHARDSON_TOL = 1e-10
MAX_SUBSTEPS = 4096


_OPS_CACHE = {}


class SymbolOps:
    """Vectorized value/gradient/Hessian of a polynomial Hamiltonian symbol.

    Derivative exponent tables are stacked once so each evaluation is a single
    broadcasted power-product contraction, batch-friendly over leading axes.
    """

    def __init__(self, model):
        self.model = model
        n = self.n = 2 * model.d
        items = sorted(model.symbol.items())
        self.exps = np.array([a for a, _ in items], dtype=float)
        self.coefs = np.array([c for _, c in items], dtype=float)
        m = len(items)

        g_exps = np.empty((n, m, n))
        g_coefs = np.empty((n, m))
        for i in range(n):
            e = self.exps.copy()
            g_coefs[i] = self.coefs * e[:, i]
            e[:, i] = np.maximum(e[:, i] - 1.0, 0.0)
            g_exps[i] = e
        self._g_exps, self._g_coefs = g_exps, g_coefs

        h_exps = np.empty((n, n, m, n))
        h_coefs = np.empty((n, n, m))
        for i in range(n):
            for j in range(n):
                e = self.exps.copy()
                c = self.coefs * e[:, i]
                e[:, i] = np.maximum(e[:, i] - 1.0, 0.0)
                c = c * e[:, j]
                e[:, j] = np.maximum(e[:, j] - 1.0, 0.0)
                h_exps[i, j] = e
                h_coefs[i, j] = c
        self._h_exps = h_exps.reshape(n * n, m, n)
        self._h_coefs = h_coefs.reshape(n * n, m)

    @staticmethod
    def of(model):
        key = (model.name, tuple(sorted(model.params.items())))
        ops = _OPS_CACHE.get(key)
        if ops is None or ops.model is not model:
            ops = SymbolOps(model)
            _OPS_CACHE[key] = ops
        return ops

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return (z[..., None, :] ** self.exps).prod(-1) @ self.coefs

    def grad(self, z):
        z = np.asarray(z, dtype=float)
        prods = (z[..., None, None, :] ** self._g_exps).prod(-1)
        return np.einsum("...im,im->...i", prods, self._g_coefs)

    def hess(self, z):
        z = np.asarray(z, dtype=float)
        prods = (z[..., None, None, :] ** self._h_exps).prod(-1)
        flat = np.einsum("...im,im->...i", prods, self._h_coefs)
        return flat.reshape(z.shape[:-1] + (self.n, self.n))

    def vector_field(self, z):
        g = self.grad(z)
        d = self.n // 2
        return np.concatenate([g[..., d:], -g[..., :d]], axis=-1)


def _rk4(f, y, dt, n_steps):
    for _ in range(n_steps):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def _step_adaptive(f, y, dt_out, n_sub, tol):
    """One output interval with step halving; returns (y_new, n_sub_used)."""
    while True:
        coarse = _rk4(f, y, dt_out / n_sub, n_sub)
        fine = _rk4(f, y, dt_out / (2 * n_sub), 2 * n_sub)
        scale = np.max(np.abs(fine)) + 1.0
        if np.max(np.abs(fine - coarse)) <= tol * scale or n_sub >= MAX_SUBSTEPS:
            # Richardson: the halved-step result is ~16x more accurate
            return fine, n_sub
        n_sub *= 2


@dataclass
class Trajectory:
    """Flow history: times, phase-space rows and optional Jacobians."""

    times: np.ndarray
    states: np.ndarray              # (n, 2d)
    jacobians: np.ndarray = None    # (n, 2d, 2d) or None
    energies: np.ndarray = None

    @property
    def points(self):
        return [PhasePoint.from_vector(z) for z in self.states]

    def point(self, i):
        return PhasePoint.from_vector(self.states[i])

    def final(self):
        return PhasePoint.from_vector(self.states[-1])

    def energy_drift(self):
        e = self.energies
        return float(np.max(np.abs(e - e[0])) / (1.0 + abs(e[0])))

    def symplectic_residuals(self):
        if self.jacobians is None:
            return None
        return np.array([symplectic_residual(k) for k in self.jacobians])


def integrate_flow(model, rho0, t, dt=0.01, box=1e3, tol=RICHARDSON_TOL,
                   with_jacobian=False):
    """Integrate Hamilton's equations for time t (either sign).

    Samples every dt; raises EscapeError when a coordinate leaves [-box, box].
    With with_jacobian, also carries the variational matrix (kappa-dot =
    J Hess p kappa), re-projected onto the symplectic group at each sample.
    """
    ops = SymbolOps.of(model)
    n2 = 2 * model.d
    jmat = standard_j(model.d)
    z0 = rho0.as_vector() if isinstance(rho0, PhasePoint) else np.asarray(rho0, float)

    if with_jacobian:
        def rhs(y):
            z = y[:n2]
            kap = y[n2:].reshape(n2, n2)
            dz = ops.vector_field(z)
            dk = jmat @ ops.hess(z) @ kap
            return np.concatenate([dz, dk.ravel()])
        y = np.concatenate([z0, np.eye(n2).ravel()])
    else:
        rhs = ops.vector_field
        y = z0.copy()

    n_out = max(1, int(round(abs(t) / dt)))
    dt_out = t / n_out
    times = np.linspace(0.0, t, n_out + 1)
    states = np.empty((n_out + 1, n2))
    jacs = np.empty((n_out + 1, n2, n2)) if with_jacobian else None
    states[0] = z0
    if with_jacobian:
        jacs[0] = np.eye(n2)

    n_sub = 1
    for i in range(n_out):
        y, n_sub = _step_adaptive(rhs, y, dt_out, n_sub, tol)
        n_sub = max(1, n_sub // 2)   # allow the step to relax again
        z = y[:n2]
        if np.max(np.abs(z)) > box:
            raise EscapeError(f"trajectory escaped |z| > {box} at t = {times[i + 1]:.6g}",
                              escape_time=float(times[i + 1]))
        states[i + 1] = z
        if with_jacobian:
            kap = project_symplectic(y[n2:].reshape(n2, n2))
            jacs[i + 1] = kap
            y = np.concatenate([z, kap.ravel()])

    energies = ops.value(states)
    return Trajectory(times, states, jacs, energies)


def integrate_variational(model, rho0, t, dt=0.01, box=1e3, tol=RICHARDSON_TOL):
    return integrate_flow(model, rho0, t, dt=dt, box=box, tol=tol,
                          with_jacobian=True)


def flow_map(model, rho0, t, dt=0.01, **kw):
    return integrate_flow(model, rho0, t, dt=dt, **kw).final()


def jacobian_of_flow(model, rho0, t, dt=0.01, **kw):
    tr = integrate_variational(model, rho0, t, dt=dt, **kw)
    return tr.final(), tr.jacobians[-1]


# -- ensembles (vectorized over sample rows) ---------------------------------


def integrate_ensemble(model, z0, t, dt=0.01, with_jacobian=False,
                       with_action=False, tol=1e-9, box=1e3):
    """Flow a batch of points (rows of z0) for time t.

    Optionally carries per-row Jacobians and the two action integrals
    S_sym = int((Xi.dQ - Q.dXi)/2 - p) and S = int(Xi.dQ/dt - p) dt.
    Returns (z_t, jacobians, s_sym, s_naive) with None for disabled parts.
    """
    ops = SymbolOps.of(model)
    n2 = 2 * model.d
    d = model.d
    jmat = standard_j(model.d)
    z0 = np.atleast_2d(np.asarray(z0, dtype=float))
    n = z0.shape[0]

    width = n2 + (n2 * n2 if with_jacobian else 0) + (2 if with_action else 0)

    def unpack(y):
        z = y[:, :n2]
        kap = y[:, n2:n2 + n2 * n2].reshape(n, n2, n2) if with_jacobian else None
        return z, kap

    def rhs(y):
        z, kap = unpack(y)
        g = ops.grad(z)
        dz = np.concatenate([g[:, d:], -g[:, :d]], axis=1)
        parts = [dz]
        if with_jacobian:
            h = ops.hess(z)
            dk = np.einsum("ij,njk,nkl->nil", jmat, h, kap)
            parts.append(dk.reshape(n, -1))
        if with_action:
            p_val = ops.value(z)
            xi_dq = np.sum(z[:, d:] * dz[:, :d], axis=1)
            q_dxi = np.sum(z[:, :d] * dz[:, d:], axis=1)
            ds_sym = 0.5 * (xi_dq - q_dxi) - p_val
            ds = xi_dq - p_val
            parts.append(np.stack([ds_sym, ds], axis=1))
        return np.concatenate(parts, axis=1)

    y = np.zeros((n, width))
    y[:, :n2] = z0
    if with_jacobian:
        y[:, n2:n2 + n2 * n2] = np.eye(n2).ravel()

    n_out = max(1, int(round(abs(t) / dt)))
    dt_out = t / n_out
    n_sub = 1
    for _ in range(n_out):
        y, n_sub = _step_adaptive(rhs, y, dt_out, n_sub, tol)
        n_sub = max(1, n_sub // 2)
        if np.max(np.abs(y[:, :n2])) > box:
            raise EscapeError("ensemble escaped the configured box")

    z_t = y[:, :n2]
    kaps = None
    if with_jacobian:
        kaps = y[:, n2:n2 + n2 * n2].reshape(n, n2, n2)
        kaps = np.array([project_symplectic(k) for k in kaps])
    if with_action:
        s_sym, s_naive = y[:, -2], y[:, -1]
    else:
        s_sym = s_naive = None
    return z_t, kaps, s_sym, s_naive


# -- rates and thresholds ----------------------------------------------------


@dataclass
class DynamicalRates:
    """Measured expansion rates of the flow near the invariant set."""

    lambda_max: float
    lambda_c: float
    nu_min_perp: float
    sigma_c: object = None        # callable t -> float
    r3_ok: bool = True

    def __post_init__(self):
        if self.sigma_c is None:
            alpha = 0.05
            lam = self.lambda_c if self.lambda_c > 0 else alpha
            object.__setattr__(self, "sigma_c", lambda t: float(np.exp(lam * t)))
        if self.lambda_c > 0 and self.nu_min_perp <= 3.0 * self.lambda_c:
            self.r3_ok = False


@dataclass(frozen=True)
class TimeThresholds:
    t_ehrenfest: float
    t_cr: float
    t_thm1_max: float
    t_thm2_max: float


def time_thresholds(rates, h, epsilon=0.05, tau=0.5, c_log=1.0):
    """Log-time validity windows for a given hbar."""
    if not 0.0 < h < 1.0:
        raise ValueError("need 0 < h < 1")
    log_h = abs(np.log(h))
    if rates.lambda_max <= 0.0:
        raise ValueError("lambda_max must be positive for finite thresholds")
    t_ehr = log_h / (2.0 * rates.lambda_max)
    t_cr = t_ehr / 3.0
    t1 = (1.0 / (2.0 * rates.lambda_max) - epsilon) * log_h
    if rates.lambda_c > 0.0:
        t2 = min(tau / rates.lambda_c, 1.0 / (6.0 * rates.lambda_c)) * log_h
    else:
        t2 = c_log * log_h
    return TimeThresholds(t_ehr, t_cr, t1, t2)


def lyapunov_max(model, seeds, t_total, dt=0.01, chunk=1.0, reltol=0.05):
    """Largest Lyapunov rate (1/T) log ||kappa_T||, maximized over seeds.

    The variational matrix is renormalized after each chunk (exact, by
    linearity); windows at T/2 and T must agree within reltol.
    """
    ops = SymbolOps.of(model)
    jmat = standard_j(model.d)
    n2 = 2 * model.d

    def rhs(y):
        zz = y[:n2]
        kk = y[n2:].reshape(n2, n2)
        return np.concatenate([ops.vector_field(zz),
                               (jmat @ ops.hess(zz) @ kk).ravel()])

    best = -np.inf
    for seed in seeds:
        z = seed.as_vector() if isinstance(seed, PhasePoint) else np.asarray(seed, float)
        logs = 0.0
        kap = np.eye(2 * model.d)
        t_done = 0.0
        half_estimate = None
        while t_done < t_total - 1e-12:
            step = min(chunk, t_total - t_done)
            y = np.concatenate([z, kap.ravel()])
            n_out = max(1, int(round(step / dt)))
            n_sub = 1
            for _ in range(n_out):
                y, n_sub = _step_adaptive(rhs, y, step / n_out, n_sub, 1e-10)
                n_sub = max(1, n_sub // 2)
            z = y[:n2]
            kap = y[n2:].reshape(n2, n2)
            nrm = np.linalg.norm(kap, 2)
            logs += np.log(nrm)
            kap = kap / nrm
            t_done += step
            if half_estimate is None and t_done >= 0.5 * t_total - 1e-12:
                half_estimate = logs / t_done
        lam = logs / t_total
        if half_estimate is not None:
            if abs(lam - half_estimate) / max(abs(lam), 0.05) > reltol:
                raise NonConvergenceError(
                    f"Lyapunov windows disagree: {half_estimate:.4f} vs {lam:.4f}")
        best = max(best, lam)
    return float(best)


def _central_indices(model, central="model"):
    d = model.d
    if central == "all":
        return list(range(2 * d))
    dp = model.d_par
    return list(range(dp)) + list(range(d, d + dp))


def _check_on_k(model, z, tol=1e-10):
    d, dp = model.d, model.d_par
    trans = list(range(dp, d)) + list(range(d + dp, 2 * d))
    if trans and np.max(np.abs(np.asarray(z)[trans])) > tol:
        raise ValueError("sample point is off the invariant set K")


def central_growth(model, samples, t, dt=0.01, central="model"):
    """sup over samples of ||dPhi^t restricted to the central tangent block||."""
    idx = _central_indices(model, central)
    if not idx:
        raise ValueError("model has no central directions")
    best = 0.0
    for rho in samples:
        z = rho.as_vector() if isinstance(rho, PhasePoint) else np.asarray(rho, float)
        if central != "all":
            _check_on_k(model, z)
        _, kap = jacobian_of_flow(model, PhasePoint.from_vector(z), t, dt=dt)
        block = kap[np.ix_(idx, idx)]
        best = max(best, float(np.linalg.norm(block, 2)))
    return best


def estimate_rates(model, seeds, t_lyap=6.0, dt=0.01, alpha_floor=0.05):
    """Sample-based rate estimates on K: lambda_max, lambda_c, nu_min_perp."""
    lam_max = lyapunov_max(model, seeds, t_lyap, dt=dt)
    d, dp = model.d, model.d_par
    tidx = list(range(dp, d)) + list(range(d + dp, 2 * d))
    lam_c = 0.0
    nu_min = np.inf
    t_win = min(t_lyap, 3.0)
    for rho in seeds:
        _, kap = jacobian_of_flow(model, rho, t_win, dt=dt)
        if dp:
            cidx = _central_indices(model)
            lam_c = max(lam_c, np.log(np.linalg.norm(kap[np.ix_(cidx, cidx)], 2)) / t_win)
        if tidx:
            tb = kap[np.ix_(tidx, tidx)]
            svals = np.linalg.svd(tb, compute_uv=False)
            nu_min = min(nu_min, np.log(svals.max()) / t_win,
                         -np.log(svals.min()) / t_win)
    lam_c = max(lam_c, 0.0)
    if not np.isfinite(nu_min):
        nu_min = lam_max
    sig_rate = lam_c if lam_c > 1e-6 else alpha_floor
    return DynamicalRates(lambda_max=float(lam_max), lambda_c=float(lam_c),
                          nu_min_perp=float(nu_min),
                          sigma_c=lambda t: float(np.exp(sig_rate * t)))


# -- hyperbolic splitting and adapted frames ---------------------------------


@dataclass
class Splitting:
    """Invariant decomposition at a point of K: central, unstable, stable."""

    base: PhasePoint
    unstable: np.ndarray   # (2d, d_perp) columns
    stable: np.ndarray
    central: np.ndarray    # (2d, 2 d_par) columns

    def expansion_rate(self, model, t=0.25, dt=0.005):
        _, kap = jacobian_of_flow(model, self.base, t, dt=dt)
        v = self.unstable[:, 0]
        return float(np.log(np.linalg.norm(kap @ v) / np.linalg.norm(v)) / t)


def _transverse_indices(model):
    d, dp = model.d, model.d_par
    return list(range(dp, d)) + list(range(d + dp, 2 * d))


def hyperbolic_splitting(model, rho, t_window=3.0, dt=0.1, residual_tol=1e-3):
    """Unstable/stable transverse directions at a point of K.

    V^u is the dominant left-singular direction of the forward Jacobian over
    the window ending at rho (push-forward from the past); V^s likewise for
    the backward Jacobian.  Both live in the symplectic complement of T K.
    """
    tidx = _transverse_indices(model)
    if not tidx:
        raise ValueError("model has no transverse directions")
    d, dp = model.d, model.d_par
    if model.has_invariant_K:
        _check_on_k(model, rho.as_vector())

    def top_left_singular(window_sign):
        start = flow_map(model, rho, -window_sign * t_window, dt=dt)
        _, kap = jacobian_of_flow(model, start, window_sign * t_window, dt=dt)
        block = kap[np.ix_(tidx, tidx)]
        uu, sv, _ = np.linalg.svd(block)
        if sv[0] < (1.0 + 1e-2):
            raise DegenerateHyperbolicityError(
                f"transverse expansion factor {sv[0]:.4f} too close to 1")
        vec = np.zeros(2 * d)
        vec[tidx] = uu[:, 0]
        if vec[np.argmax(np.abs(vec))] < 0:
            vec = -vec
        return vec

    v_u = top_left_singular(+1)
    v_s = top_left_singular(-1)

    # invariance residual: push V^u forward one step and compare
    t0 = 0.5
    rho1 = flow_map(model, rho, t0, dt=dt)
    _, kap01 = jacobian_of_flow(model, rho, t0, dt=dt)
    v_u_pushed = kap01 @ v_u
    v_u_pushed /= np.linalg.norm(v_u_pushed)
    v_u_there = hyperbolic_splitting_direction(model, rho1, t_window, dt, tidx)
    angle = np.arccos(min(1.0, abs(float(v_u_pushed @ v_u_there))))
    if angle > 1e-2:
        raise DegenerateHyperbolicityError(
            f"splitting invariance residual {angle:.2e} too large")
    if angle > residual_tol:
        warnings.warn(f"splitting invariance residual {angle:.2e} above "
                      f"{residual_tol:.0e}", stacklevel=2)

    central = np.zeros((2 * d, 2 * dp))
    for k, i in enumerate(_central_indices(model)):
        central[i, k] = 1.0
    return Splitting(base=rho, unstable=v_u[:, None], stable=v_s[:, None],
                     central=central)


def hyperbolic_splitting_direction(model, rho, t_window, dt, tidx):
    start = flow_map(model, rho, -t_window, dt=dt)
    _, kap = jacobian_of_flow(model, start, t_window, dt=dt)
    block = kap[np.ix_(tidx, tidx)]
    uu = np.linalg.svd(block)[0]
    d = model.d
    vec = np.zeros(2 * d)
    vec[tidx] = uu[:, 0]
    if vec[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    return vec


def adapted_frame(model, rho, splitting=None, dt=0.1):
    """Symplectic map sending T K to the (x, xi) plane, V^u to the y plane
    and V^s to the eta plane (ambient -> adapted coordinates)."""
    if splitting is None:
        splitting = hyperbolic_splitting(model, rho, dt=dt)
    d, dp = model.d, model.d_par
    jmat = standard_j(d)

    v_u = splitting.unstable[:, 0].copy()
    v_u /= np.linalg.norm(v_u)
    v_s = splitting.stable[:, 0].copy()
    pairing = float(v_u @ jmat @ v_s)
    if abs(pairing) < 1e-12:
        raise DegenerateHyperbolicityError("unstable/stable pairing degenerate")
    v_s = v_s / pairing

    cols = np.zeros((2 * d, 2 * d))
    cols[:, :dp] = splitting.central[:, :dp]            # x block
    cols[:, dp:d] = v_u[:, None]                         # y block
    cols[:, d:d + dp] = splitting.central[:, dp:]        # xi block
    cols[:, d + dp:] = v_s[:, None]                      # eta block
    res = symplectic_residual(cols)
    if res > 1e-8:
        cols = project_symplectic(cols)
    frame = -jmat @ cols.T @ jmat    # inverse of a symplectic matrix
    if symplectic_residual(frame) > 1e-8:
        raise DegenerateHyperbolicityError("adapted frame not symplectic")
    return frame


# -- isotropic manifold graphs (d_perp = 1) ----------------------------------


@dataclass
class ManifoldGraph:
    """Graph y -> (x(y), y, xi(y), eta(y)) in the adapted chart of a base point.

    phi is the generating phase (d phi = eta dy + (xi dx - x dxi)/2 on the
    graph); accumulated_action tracks int(xi . dx/dt - p) dt per sample.
    """

    base: PhasePoint
    frame: np.ndarray                 # ambient -> chart, symplectic
    y: np.ndarray                     # uniform samples, shape (n,)
    x_bar: np.ndarray                 # (n, d_par)
    xi_bar: np.ndarray                # (n, d_par)
    eta_bar: np.ndarray               # (n,)
    phi: np.ndarray                   # (n,)
    accumulated_action: np.ndarray = None
    gamma1: float = 5.0
    parent: object = None             # previous graph in the evolution chain
    y_prev_map: np.ndarray = None     # y^{j}(y^{j+1}) sampled on self.y

    def __post_init__(self):
        if self.accumulated_action is None:
            self.accumulated_action = np.zeros_like(self.y)
        self.x_bar = np.atleast_2d(np.asarray(self.x_bar, float).T).T \
            if np.asarray(self.x_bar).ndim == 1 else np.asarray(self.x_bar, float)
        self.xi_bar = np.atleast_2d(np.asarray(self.xi_bar, float).T).T \
            if np.asarray(self.xi_bar).ndim == 1 else np.asarray(self.xi_bar, float)

    @property
    def n(self):
        return self.y.size

    @property
    def d_par(self):
        return self.x_bar.shape[1]

    def chart_points(self):
        """Sample points in chart coordinates (x, y, xi, eta), shape (n, 2d)."""
        n, dp = self.n, self.d_par
        d = dp + 1
        z = np.zeros((n, 2 * d))
        z[:, :dp] = self.x_bar
        z[:, dp] = self.y
        z[:, d:d + dp] = self.xi_bar
        z[:, d + dp] = self.eta_bar
        return z

    def ambient_points(self):
        inv = np.linalg.inv(self.frame)
        return self.base.as_vector()[None, :] + self.chart_points() @ inv.T

    def eta_reconstructed(self):
        """eta from the isotropy identity, via spectral-quality finite differences."""
        dphi = np.gradient(self.phi, self.y, edge_order=2)
        dxi = np.gradient(self.xi_bar, self.y, axis=0, edge_order=2)
        dx = np.gradient(self.x_bar, self.y, axis=0, edge_order=2)
        corr = 0.5 * (np.sum(dxi * self.x_bar, axis=1)
                      - np.sum(self.xi_bar * dx, axis=1))
        return dphi + corr

    def isotropy_residual(self):
        return float(np.max(np.abs(self.eta_reconstructed() - self.eta_bar)))

    def c1_norms(self):
        """Sup norms of d/dy of (x, xi, eta)."""
        dx = np.gradient(self.x_bar, self.y, axis=0, edge_order=2)
        dxi = np.gradient(self.xi_bar, self.y, axis=0, edge_order=2)
        deta = np.gradient(self.eta_bar, self.y, edge_order=2)
        return (float(np.max(np.abs(dx))), float(np.max(np.abs(dxi))),
                float(np.max(np.abs(deta))))

    def splines(self):
        return {
            "x": CubicSpline(self.y, self.x_bar, axis=0),
            "xi": CubicSpline(self.y, self.xi_bar, axis=0),
            "eta": CubicSpline(self.y, self.eta_bar),
            "phi": CubicSpline(self.y, self.phi),
        }


def flat_graph(base, frame, y_min, y_max, n, d_par=1):
    """The model graph {x = xi = eta = 0, phi = 0} over a uniform y window."""
    y = np.linspace(y_min, y_max, n)
    zeros = np.zeros((n, d_par))
    return ManifoldGraph(base=base, frame=frame, y=y, x_bar=zeros,
                         xi_bar=zeros.copy(), eta_bar=np.zeros(n),
                         phi=np.zeros(n))


def evolve_manifold_graph(model, graph, t0, dt=0.005, n_out=None,
                          det_tol=1e-6, trim=0.0):
    """Flow a manifold graph for time t0 and re-parametrize over the new y.

    The base point flows along K and receives a fresh adapted frame; samples
    flow in ambient coordinates with per-point action integrals.  The phase
    phi transports exactly through the symmetrized primitive (invariant under
    the linear chart maps), so global phase consistency across steps is kept.
    """
    if graph.d_par + 1 != model.d:
        raise ValueError("graph dimensions do not match the model")
    n = graph.n
    n_out = n_out or n
    d, dp = model.d, model.d_par
    jmat = standard_j(d)

    c1 = max(graph.c1_norms())
    if c1 > graph.gamma1:
        warnings.warn(f"graph C1 norm {c1:.3f} exceeds gamma1 = {graph.gamma1}",
                      stacklevel=2)

    amb0 = graph.ambient_points()
    z1, _, s_sym, s_naive = integrate_ensemble(model, amb0, t0, dt=dt,
                                               with_action=True)
    base1 = flow_map(model, graph.base, t0, dt=dt)
    frame1 = adapted_frame(model, base1, dt=dt)
    chart1 = (z1 - base1.as_vector()[None, :]) @ frame1.T

    x1 = chart1[:, :dp]
    y1 = chart1[:, dp]
    xi1 = chart1[:, d:d + dp]
    eta1 = chart1[:, d + dp]

    dy1 = np.gradient(y1, graph.y, edge_order=2)
    if np.min(np.abs(dy1)) < det_tol or np.any(np.sign(dy1) != np.sign(dy1[0])):
        raise ProjectabilityError("y map lost monotone projectability")

    # exact transport of the generating phase through the chart changes
    omega0 = (graph.base.as_vector() @ jmat) @ graph.ambient_points().T
    omega1 = (base1.as_vector() @ jmat) @ z1.T
    phi_sym0 = graph.phi - 0.5 * graph.y * graph.eta_bar
    theta0 = phi_sym0 + 0.5 * omega0
    theta1 = theta0 + s_sym
    phi_sym1 = theta1 - 0.5 * omega1
    phi1 = phi_sym1 + 0.5 * y1 * eta1

    order = np.argsort(y1)
    ys, xs = y1[order], x1[order]
    lo, hi = ys[0], ys[-1]
    if trim > 0.0:
        span = hi - lo
        lo += trim * span
        hi -= trim * span
    y_new = np.linspace(lo, hi, n_out)

    def resample(vals):
        return CubicSpline(ys, np.asarray(vals)[order], axis=0)(y_new)

    g1 = ManifoldGraph(
        base=base1, frame=frame1, y=y_new,
        x_bar=resample(x1), xi_bar=resample(xi1),
        eta_bar=resample(eta1), phi=resample(phi1),
        accumulated_action=resample(graph.accumulated_action + s_naive),
        gamma1=graph.gamma1, parent=graph,
        y_prev_map=CubicSpline(ys, graph.y[order])(y_new),
    )
    return g1


def back_map_determinant(g_before, g_after):
    """Per-sample |det d y_before / d y_after| along the evolution chain."""
    det = np.ones_like(g_after.y)
    g = g_after
    y_cur = g_after.y
    while g is not g_before:
        if g.parent is None or g.y_prev_map is None:
            raise ValueError("graphs are not linked by stored evolution steps")
        y_prev_at = CubicSpline(g.y, g.y_prev_map)(y_cur)
        det = det * np.abs(CubicSpline(g.y, g.y_prev_map).derivative()(y_cur))
        y_cur = y_prev_at
        g = g.parent
    return det


# -- shadowing report ---------------------------------------------------------


@dataclass
class ShadowReport:
    steps: np.ndarray
    q_x: np.ndarray
    q_y: np.ndarray
    p_x: np.ndarray
    p_y: np.ndarray
    jac_diff: np.ndarray
    envelope_central: np.ndarray
    envelope_ok: bool
    fitted_rates: dict = field(default_factory=dict)


def shadow_deviation(model, rho, rho_tilde, n_steps, t0, dt=0.005,
                     lambda_c=0.0, eps1=0.1, eps2=0.3):
    """Track a point near K in the adapted charts of its shadow on K.

    Reports per-step chart coordinates of Phi^{k t0}(rho), the Jacobian
    difference against the shadow, and the central-envelope check
    (1 + eps1) exp((lambda_c + 2 eps2/3) k t0) * d0.
    """
    d, dp = model.d, model.d_par
    z = rho.as_vector()
    zt = rho_tilde.as_vector()
    _check_on_k(model, zt)
    d0 = np.linalg.norm(z - zt)

    rows = {"q_x": [], "q_y": [], "p_x": [], "p_y": [], "jd": []}
    k_rho = np.eye(2 * d)
    k_til = np.eye(2 * d)
    for k in range(n_steps + 1):
        frame = adapted_frame(model, PhasePoint.from_vector(zt), dt=dt)
        chart = frame @ (z - zt)
        rows["q_x"].append(np.linalg.norm(chart[:dp]))
        rows["q_y"].append(np.linalg.norm(chart[dp:d]))
        rows["p_x"].append(np.linalg.norm(chart[d:d + dp]))
        rows["p_y"].append(np.linalg.norm(chart[d + dp:]))
        rows["jd"].append(np.linalg.norm(k_rho - k_til, 2))
        if k == n_steps:
            break
        zp, kap = jacobian_of_flow(model, PhasePoint.from_vector(z), t0, dt=dt)
        z = zp.as_vector()
        k_rho = kap @ k_rho
        zp, kap = jacobian_of_flow(model, PhasePoint.from_vector(zt), t0, dt=dt)
        zt = zp.as_vector()
        k_til = kap @ k_til

    steps = np.arange(n_steps + 1)
    env = (1.0 + eps1) * np.exp((lambda_c + 2.0 * eps2 / 3.0) * steps * t0) * d0
    central = np.array(rows["q_x"]) + np.array(rows["p_x"]) + np.array(rows["p_y"])
    ok = bool(np.all(central <= env + 1e-14))

    fits = {}
    for key in ("q_x", "q_y", "p_x", "p_y"):
        vals = np.array(rows[key])
        good = vals > 1e-14
        if good.sum() >= 3:
            slope = np.polyfit(steps[good] * t0, np.log(vals[good]), 1)[0]
            fits[key] = float(slope)
    return ShadowReport(steps=steps, q_x=np.array(rows["q_x"]),
                        q_y=np.array(rows["q_y"]), p_x=np.array(rows["p_x"]),
                        p_y=np.array(rows["p_y"]), jac_diff=np.array(rows["jd"]),
                        envelope_central=env, envelope_ok=ok, fitted_rates=fits)
