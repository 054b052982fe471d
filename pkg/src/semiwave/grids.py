"""Uniform-grid complex wavefunctions, the common currency for comparisons."""

from dataclasses import dataclass

import numpy as np

from .errors import CoverageError

BOUNDARY_RATIO = 1e-12


@dataclass(frozen=True)
class Axis:
    origin: float
    spacing: float
    count: int

    def points(self):
        return self.origin + self.spacing * np.arange(self.count)

    @staticmethod
    def centered(half_width, count):
        """Symmetric axis [-half_width, half_width) with the given sample count."""
        spacing = 2.0 * half_width / count
        return Axis(-half_width, spacing, count)


class GridWavefunction:
    """Complex samples on a tensor-product uniform grid, with a fixed hbar."""

    def __init__(self, hbar, axes, values):
        self.hbar = float(hbar)
        self.axes = tuple(axes)
        self.values = np.asarray(values, dtype=complex)
        if self.values.shape != tuple(ax.count for ax in self.axes):
            raise ValueError("values shape does not match axes")

    @property
    def d(self):
        return len(self.axes)

    def coords(self):
        return [ax.points() for ax in self.axes]

    def meshgrid(self):
        return np.meshgrid(*self.coords(), indexing="ij")

    def cell_volume(self):
        return float(np.prod([ax.spacing for ax in self.axes]))

    def _trapz_weights(self):
        w = np.array([1.0])
        for ax in self.axes:
            wa = np.full(ax.count, ax.spacing)
            wa[0] *= 0.5
            wa[-1] *= 0.5
            w = np.multiply.outer(w, wa)
        return w[0] if w.ndim > self.d else w

    def norm(self):
        w = self._trapz_weights()
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))

    def boundary_ratio(self):
        """Max boundary magnitude over max interior magnitude."""
        v = np.abs(self.values)
        peak = v.max()
        if peak == 0.0:
            return 0.0
        edge = 0.0
        for ax in range(self.d):
            sl = [slice(None)] * self.d
            sl[ax] = 0
            edge = max(edge, v[tuple(sl)].max())
            sl[ax] = -1
            edge = max(edge, v[tuple(sl)].max())
        return float(edge / peak)

    def check_coverage(self, ratio=1e-8):
        if self.boundary_ratio() > ratio:
            raise CoverageError(
                f"boundary magnitude ratio {self.boundary_ratio():.2e} exceeds {ratio:.0e}")

    def copy_with(self, values):
        return GridWavefunction(self.hbar, self.axes, values)

    def __add__(self, other):
        _require_same_axes(self, other)
        return self.copy_with(self.values + other.values)

    def __sub__(self, other):
        _require_same_axes(self, other)
        return self.copy_with(self.values - other.values)

    def __mul__(self, scalar):
        return self.copy_with(self.values * scalar)

    __rmul__ = __mul__


def _require_same_axes(a, b):
    if a.axes != b.axes or a.hbar != b.hbar:
        raise ValueError("grid axes / hbar mismatch")


def inner_product(a, b):
    """Trapezoid-rule <a, b> with the physics convention (conjugate on b)."""
    _require_same_axes(a, b)
    w = a._trapz_weights()
    return complex(np.sum(w * a.values * np.conj(b.values)))


def suggest_axes(hbar, centers, spreads, extent_factor=12.0, min_points=64,
                 max_points=4096, spacing_factor=6.0):
    """Per-axis grids: half-width extent_factor * max(sqrt(hbar), spread) around
    the center, power-of-two counts with spacing below sqrt(hbar)/spacing_factor."""
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    spreads = np.atleast_1d(np.asarray(spreads, dtype=float))
    axes = []
    for c, s in zip(centers, spreads):
        half = extent_factor * max(np.sqrt(hbar), s)
        n = min_points
        while 2.0 * half / n > np.sqrt(hbar) / spacing_factor and n < max_points:
            n *= 2
        axes.append(Axis(c - half, 2.0 * half / n, n))
    return tuple(axes)


def save_wavefunction(u, path):
    """Text dump: header (d, hbar, axes), then rows 'i j ... re im'."""
    with open(path, "w") as fh:
        fh.write(f"d {u.d}\n")
        fh.write(f"hbar {u.hbar!r}\n")
        for ax in u.axes:
            fh.write(f"axis {ax.origin!r} {ax.spacing!r} {ax.count}\n")
        for idx in np.ndindex(*u.values.shape):
            v = u.values[idx]
            fh.write(" ".join(str(i) for i in idx)
                     + f" {v.real!r} {v.imag!r}\n")


def load_wavefunction(path):
    with open(path) as fh:
        d = int(fh.readline().split()[1])
        hbar = float(fh.readline().split()[1])
        axes = []
        for _ in range(d):
            parts = fh.readline().split()
            axes.append(Axis(float(parts[1]), float(parts[2]), int(parts[3])))
        values = np.zeros(tuple(ax.count for ax in axes), dtype=complex)
        for line in fh:
            parts = line.split()
            idx = tuple(int(p) for p in parts[:d])
            values[idx] = complex(float(parts[d]), float(parts[d + 1]))
    return GridWavefunction(hbar, axes, values)
