"""Shifted convolution that stays inside the domain up to the boundary.

f^kappa(x) = int_{B(0, eta)} f~(x - kappa e(x) - y) rho_kappa(y) dy,
eta = kappa sin(theta/2), rho_kappa(y) = eta^-d rho(y / eta),

where f~ is the extension of f by zero. Supported domains are the interval
and the axis-aligned rectangle; with ``e=None`` the shift direction at each
node is the outward diagonal of the quadrant the node lies in, which moves
the sample ball towards the domain centre.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.interpolate import RegularGridInterpolator

from .errors import GeometryError, InvalidParameterError
from .quadrature import adaptive_simpson


_HEADER_ITEM = re.compile(r"(\w+)=(.*?)\s*(?=\s\w+=|$)")


@dataclass(frozen=True)
class ConeSpec:
    angle: float = math.pi / 2
    height: float = 0.5

    def __post_init__(self):
        if not 0 < self.angle < math.pi:
            raise InvalidParameterError("cone angle must lie in (0, pi)")
        if self.height <= 0:
            raise InvalidParameterError("cone height must be positive")

    @property
    def kappa_max(self):
        return self.height / (1.0 + math.sin(self.angle / 2.0))


INTERVAL_CONE = ConeSpec(math.pi / 2, 0.5)
SQUARE_CONE = ConeSpec(math.pi / 3, 0.5)


def eta(kappa, cone: ConeSpec, strict=True):
    if strict and not 0 < kappa < cone.kappa_max:
        raise InvalidParameterError(f"kappa={kappa} outside (0, {cone.kappa_max:.6g})")
    return kappa * math.sin(cone.angle / 2.0)


@dataclass(eq=False)
class GridFunction:
    """Nodal values on a uniform grid over [lower, upper] (per axis)."""

    lower: tuple
    upper: tuple
    values: np.ndarray

    def __post_init__(self):
        self.lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        self.upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != len(self.lower) or len(self.lower) not in (1, 2):
            raise InvalidParameterError("GridFunction supports 1-d intervals and 2-d rectangles")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("GridFunction values must be finite")

    @property
    def dim(self):
        return self.values.ndim

    @property
    def spacing(self):
        return tuple((b - a) / (n - 1) for a, b, n in zip(self.lower, self.upper, self.values.shape))

    @property
    def axes(self):
        return [np.linspace(a, b, n) for a, b, n in zip(self.lower, self.upper, self.values.shape)]

    @classmethod
    def sample(cls, f, lower, upper, shape):
        lower, upper, shape = np.atleast_1d(lower), np.atleast_1d(upper), np.atleast_1d(shape)
        axes = [np.linspace(a, b, n) for a, b, n in zip(lower, upper, shape)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return cls(tuple(lower), tuple(upper), f(*mesh))

    def lp_norm(self, p=1):
        """Trapezoidal L^p norm over the domain."""
        v = np.abs(self.values) ** p
        for axis, h in enumerate(self.spacing):
            v = np.trapezoid(v, dx=h, axis=0)
        return float(v) ** (1.0 / p)

    def __sub__(self, other):
        return GridFunction(self.lower, self.upper, self.values - other.values)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("# levyspde grid function v1\n")
        kind = "interval" if self.dim == 1 else "rectangle"
        buf.write(f"# domain={kind} lower={' '.join(map(repr, self.lower))} upper={' '.join(map(repr, self.upper))}\n")
        buf.write(f"# shape={' '.join(map(str, self.values.shape))} dx={' '.join(map(repr, self.spacing))}\n")
        w = csv.writer(buf, lineterminator="\n")
        for row in np.atleast_2d(self.values):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        meta = {}
        rows = []
        for line in text.splitlines():
            if line.startswith("#"):
                meta.update(_HEADER_ITEM.findall(line[1:]))
            elif line.strip():
                rows.append([float(v) for v in line.split(",")])
        lower = tuple(float(v) for v in meta["lower"].split())
        upper = tuple(float(v) for v in meta["upper"].split())
        vals = np.array(rows)
        if meta["domain"] == "interval":
            vals = vals[0]
        return cls(lower, upper, vals)


# --------------------------------------------------------------------------
# kernel


def _bump(r2):
    r2 = np.asarray(r2, dtype=float)
    inside = r2 < 1.0
    return np.where(inside, np.exp(-1.0 / np.where(inside, 1.0 - r2, 1.0)), 0.0)


@lru_cache(maxsize=None)
def bump_normalization(dim):
    """1 / int_{B(0,1)} exp(-1/(1-|y|^2)) dy."""
    if dim == 1:
        val, _ = integrate.quad(lambda y: float(_bump(y * y)), -1.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    elif dim == 2:
        val, _ = integrate.quad(lambda r: 2 * math.pi * r * float(_bump(r * r)), 0.0, 1.0, epsabs=1e-14, epsrel=1e-14)
    else:
        raise InvalidParameterError("only d = 1, 2 are supported")
    return 1.0 / val


def kernel(y, h, dim):
    """rho_h(y) = h^-d C rho(y / h); ``y`` has the coordinate on the last axis for d = 2."""
    y = np.asarray(y, dtype=float)
    r2 = (y / h) ** 2 if dim == 1 else np.sum((y / h) ** 2, axis=-1)
    return bump_normalization(dim) * _bump(r2) / h**dim


def kernel_mass(kappa, cone: ConeSpec, dim=1, tol=1e-12):
    """Quadrature of rho_kappa over its support (expected 1)."""
    h = eta(kappa, cone)
    if dim == 1:
        return adaptive_simpson(lambda y: float(kernel(y, h, 1)), -h, h, tol)
    n = 400
    c = -h + (np.arange(n) + 0.5) * (2 * h / n)
    Y = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1)
    return float(np.sum(kernel(Y, h, 2)) * (2 * h / n) ** 2)


def _kernel_stencil(h, step, dim):
    n = max(2, int(math.ceil(2 * h / step)))
    c = -h + (np.arange(n) + 0.5) * (2 * h / n)
    if dim == 1:
        pts = c[:, None]
    else:
        pts = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1).reshape(-1, 2)
    w = kernel(pts if dim == 2 else pts[:, 0], h, dim)
    keep = w > 0
    pts, w = pts[keep], w[keep]
    return pts, w / w.sum()


# --------------------------------------------------------------------------
# shifted mollification


def shift_directions(f: GridFunction, e=None):
    """Unit vector e(x) for every node, shape (*values.shape, d)."""
    mesh = np.stack(np.meshgrid(*f.axes, indexing="ij"), axis=-1)
    if e is not None:
        e = np.asarray(e, dtype=float).reshape(f.dim)
        return np.broadcast_to(e / np.linalg.norm(e), mesh.shape)
    mid = (np.array(f.lower) + np.array(f.upper)) / 2.0
    out = np.where(mesh < mid, -1.0, 1.0)
    return out / math.sqrt(f.dim)


def check_containment(f: GridFunction, kappa, cone: ConeSpec, e=None):
    """Raise GeometryError unless every shifted ball x - kappa e - B(0, eta) lies in D."""
    h = eta(kappa, cone)
    mesh = np.stack(np.meshgrid(*f.axes, indexing="ij"), axis=-1)
    centre = mesh - kappa * shift_directions(f, e)
    lo, hi = np.array(f.lower), np.array(f.upper)
    bad = np.any((centre - h <= lo) | (centre + h >= hi), axis=-1)
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        raise GeometryError(
            f"shifted ball at node {idx} (x={mesh[idx].tolist()}) leaves the domain",
            node=idx,
        )
    return centre


def mollify_shifted(f: GridFunction, kappa, cone: ConeSpec, e=None, resolution=None):
    """Shifted mollification f^kappa on the nodes of ``f``.

    Midpoint rule on the kernel support with spacing min(dx, eta/16); the
    discrete weights are renormalized to unit mass. Off-grid values of f come
    from multilinear interpolation of the zero extension.
    """
    h = eta(kappa, cone)
    centre = check_containment(f, kappa, cone, e)
    step = resolution or min(min(f.spacing), h / 16.0)
    pts, w = _kernel_stencil(h, step, f.dim)
    if f.dim == 1:
        xs = centre[..., 0][:, None] - pts[:, 0][None, :]
        vals = np.interp(xs, f.axes[0], f.values, left=0.0, right=0.0)
        return GridFunction(f.lower, f.upper, vals @ w)
    interp = RegularGridInterpolator(f.axes, f.values, bounds_error=False, fill_value=0.0)
    flat = centre.reshape(-1, 2)
    out = np.empty(len(flat))
    chunk = max(1, 200000 // len(pts))
    for s in range(0, len(flat), chunk):
        q = flat[s : s + chunk, None, :] - pts[None, :, :]
        out[s : s + chunk] = interp(q.reshape(-1, 2)).reshape(-1, len(pts)) @ w
    return GridFunction(f.lower, f.upper, out.reshape(f.values.shape))


def premollify(values, lower, upper, kappa, cone=INTERVAL_CONE):
    """Mollify 1-d nodal data and reimpose the zero boundary values."""
    g = mollify_shifted(GridFunction((lower,), (upper,), values), kappa, cone)
    out = g.values.copy()
    out[0] = out[-1] = 0.0
    return out
