"""Semi-Kruzhkov entropy approximations, entropy fluxes and model families.

Everything here is a pure function of its arguments. Scalar entry points use
adaptive Simpson quadrature (``entropy_flux``, ``kirchhoff``); the ``*_array``
variants are vectorized fixed-rule versions used on whole space-time grids and
are cross-checked against the scalar ones in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from .errors import InvalidParameterError, ModelViolationError
from .quadrature import DEFAULT_TOL, adaptive_simpson, gauss_legendre

Orientation = Literal["plus", "minus"]


def pos(x):
    return np.maximum(x, 0.0)


def neg(x):
    return np.maximum(-x, 0.0)


@dataclass(frozen=True)
class EntropyApprox:
    """Convex C^{2,1} approximation of x -> x^+ with smoothing width ``xi``.

    ``orientation="minus"`` gives the reflected entropy r -> beta(-r).
    """

    xi: float
    orientation: Orientation = "plus"

    def __post_init__(self):
        if not (self.xi > 0 and math.isfinite(self.xi)):
            raise InvalidParameterError(f"xi must be positive, got {self.xi!r}")
        if self.orientation not in ("plus", "minus"):
            raise InvalidParameterError(f"unknown orientation {self.orientation!r}")

    @property
    def sign(self):
        return 1.0 if self.orientation == "plus" else -1.0

    def reflected(self):
        return EntropyApprox(self.xi, "minus" if self.orientation == "plus" else "plus")

    def __call__(self, r):
        return beta_eval(self, r, 0)

    def d1(self, r):
        return beta_eval(self, r, 1)

    def d2(self, r):
        return beta_eval(self, r, 2)


def _beta_plus(xi, r, order):
    r = np.asarray(r, dtype=float)
    inside = (r >= 0.0) & (r <= xi)
    rc = np.clip(r, 0.0, xi)
    if order == 0:
        # clipped at 0 against cancellation for tiny r
        smooth = np.maximum(0.5 * rc - xi / (2.0 * np.pi) * np.sin(np.pi * rc / xi), 0.0)
        out = np.where(r > xi, r - 0.5 * xi, smooth)
        return np.where(r < 0.0, 0.0, out)
    if order == 1:
        smooth = 0.5 * (1.0 + np.sin(np.pi * (2.0 * rc - xi) / (2.0 * xi)))
        out = np.where(r > xi, 1.0, smooth)
        return np.where(r < 0.0, 0.0, out)
    return np.where(inside, np.pi / (2.0 * xi) * np.maximum(np.sin(np.pi * rc / xi), 0.0), 0.0)


def beta_eval(approx: EntropyApprox, r, order: int = 0):
    """beta(r), beta'(r) or beta''(r); accepts scalars or arrays."""
    if order not in (0, 1, 2):
        raise InvalidParameterError(f"order must be 0, 1 or 2, got {order!r}")
    if approx.orientation == "plus":
        out = _beta_plus(approx.xi, r, order)
    else:
        out = _beta_plus(approx.xi, -np.asarray(r, dtype=float), order)
        if order == 1:
            out = -out
    return float(out) if np.ndim(out) == 0 else out


def sign_bracket(x, mode="plus"):
    """sgn^+, sgn^- or their sum, with value 0 at x = 0 in every mode.

    ``mode="full"`` is the literal sum sgn^+ + sgn^- (1 for every x != 0);
    ``mode="signed"`` is the conventional sign function with values -1, 0, 1.
    """
    x = np.asarray(x, dtype=float)
    if mode == "plus":
        out = (x > 0).astype(float)
    elif mode == "minus":
        out = (x < 0).astype(float)
    elif mode == "full":
        out = (x > 0).astype(float) + (x < 0).astype(float)
    elif mode == "signed":
        out = np.sign(x)
    else:
        raise InvalidParameterError(f"unknown sign mode {mode!r}")
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# model families


@dataclass(frozen=True)
class FluxModel:
    """Scalar convective flux F with its monotone splitting.

    ``increasing``/``decreasing`` are u -> int_0^u max(F', 0) and
    u -> int_0^u min(F', 0); they feed the Engquist-Osher flux.
    """

    name: str
    F: Callable
    dF: Callable
    lipschitz: float
    increasing: Callable
    decreasing: Callable
    bound: float = math.inf
    kinks: tuple = ()
    dim: int = 1

    def __call__(self, u):
        return self.F(u)

    def derivative(self, u):
        return self.dF(u)


@dataclass(frozen=True)
class DiffusionModel:
    """Nondecreasing Lipschitz diffusion Phi with optional closed-form Kirchhoff G."""

    name: str
    Phi: Callable
    dPhi: Callable
    lipschitz: float
    G: Callable | None = None
    bound: float = math.inf
    kinks: tuple = ()

    def __call__(self, u):
        return self.Phi(u)

    def derivative(self, u):
        return self.dPhi(u)


def zero_flux():
    z = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    return FluxModel("zero", z, z, 0.0, z, z)


def linear_flux(c):
    c = float(c)
    F = lambda u: c * np.asarray(u, dtype=float)
    dF = lambda u: np.full_like(np.asarray(u, dtype=float), c)
    z = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    inc, dec = (F, z) if c >= 0 else (z, F)
    return FluxModel(f"linear({c:g})", F, dF, abs(c), inc, dec)


def burgers_flux(bound=4.0):
    """u^2/2 on [-M, M], continued linearly outside so F stays M-Lipschitz."""
    M = float(bound)

    def F(u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        return np.where(a <= M, 0.5 * u * u, M * a - 0.5 * M * M)

    def dF(u):
        return np.clip(np.asarray(u, dtype=float), -M, M)

    inc = lambda u: F(np.maximum(u, 0.0))
    dec = lambda u: F(np.minimum(u, 0.0))
    return FluxModel(f"burgers(M={M:g})", F, dF, M, inc, dec, bound=M, kinks=(-M, M))


def zero_diffusion():
    z = lambda u: np.zeros_like(np.asarray(u, dtype=float))
    return DiffusionModel("zero", z, z, 0.0, G=z)


def linear_diffusion(a=1.0):
    a = float(a)
    if a < 0:
        raise ModelViolationError("linear diffusion needs a nonnegative slope")
    s = math.sqrt(a)
    return DiffusionModel(
        f"linear({a:g})",
        lambda u: a * np.asarray(u, dtype=float),
        lambda u: np.full_like(np.asarray(u, dtype=float), a),
        a,
        G=lambda u: s * np.asarray(u, dtype=float),
    )


def power_diffusion(m=2.0, clamp=4.0):
    """sgn(u) min(|u|^m, L|u|): degenerate at u = 0, Lipschitz constant m*L."""
    m, L = float(m), float(clamp)
    if m <= 1 or L <= 0:
        raise InvalidParameterError("power diffusion needs m > 1 and L > 0")
    uc = L ** (1.0 / (m - 1.0))

    def Phi(u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        return np.sign(u) * np.minimum(a**m, L * a)

    def dPhi(u):
        a = np.abs(np.asarray(u, dtype=float))
        return np.where(a < uc, m * a ** (m - 1.0), L)

    def G(u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        core = math.sqrt(m) * 2.0 / (m + 1.0) * np.minimum(a, uc) ** ((m + 1.0) / 2.0)
        return np.sign(u) * (core + math.sqrt(L) * np.maximum(a - uc, 0.0))

    return DiffusionModel(
        f"power(m={m:g},L={L:g})", Phi, dPhi, m * L, G=G, kinks=(-uc, 0.0, uc)
    )


FLUX_FAMILIES = {
    "zero": lambda p=None: zero_flux(),
    "linear": lambda p=1.0: linear_flux(p),
    "burgers": lambda p=4.0: burgers_flux(p),
}

DIFFUSION_FAMILIES = {
    "zero": lambda p=None: zero_diffusion(),
    "linear": lambda p=1.0: linear_diffusion(p),
    "power": lambda p=2.0: power_diffusion(p),
}


# --------------------------------------------------------------------------
# Kruzhkov brackets and entropy fluxes


def _model_fn(model):
    return model.F if isinstance(model, FluxModel) else model.Phi


def kruzhkov_flux(model, a, b, mode="full"):
    """sgn-bracket(a - b) * (model(a) - model(b))."""
    fn = _model_fn(model)
    return sign_bracket(np.asarray(a) - np.asarray(b), mode) * (fn(a) - fn(b))


def entropy_flux(model, approx: EntropyApprox, a, b, quad_tol=DEFAULT_TOL):
    """int_b^a beta'(r - b) model'(r) dr by adaptive Simpson."""
    if quad_tol <= 0:
        raise InvalidParameterError("quad_tol must be positive")
    a, b = float(a), float(b)
    if a == b:
        return 0.0
    xi = approx.xi
    d = model.derivative

    def integrand(r):
        return approx.d1(r - b) * float(d(r))

    brk = (b, b + xi, b - xi, *model.kinks)
    return adaptive_simpson(integrand, b, a, quad_tol, breakpoints=brk)


def entropy_flux_array(model, approx: EntropyApprox, a, b, nodes=16):
    """Vectorized entropy flux over arrays ``a``, ``b`` (broadcast).

    Integration by parts moves the derivative onto beta so only model values
    are sampled; the smooth part over the width-xi layer uses Gauss-Legendre.
    """
    fn = _model_fn(model)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    xi = approx.xi
    s = approx.sign
    # distance into the active side of the entropy
    gap = s * (a - b)
    out = np.zeros(a.shape)
    on = gap > 0.0
    if not np.any(on):
        return out
    a, b, gap = a[on], b[on], gap[on]
    s1 = np.minimum(gap, xi)
    x, w = gauss_legendre(nodes)

    def piece(bb, lo, hi):
        sig = lo[:, None] + (hi - lo)[:, None] * x
        return np.sum(w * _beta_plus(xi, sig, 2) * fn(bb[:, None] + s * sig), axis=-1) * (hi - lo)

    def layer(bb, width):
        # split at a model kink inside the layer so both pieces are smooth
        cut = 0.5 * width
        for kink in model.kinks:
            sk = s * (kink - bb)
            cut = np.where((sk > 0) & (sk < width), sk, cut)
        return piece(bb, np.zeros_like(width), cut) + piece(bb, cut, width)

    # past the layer the integral only depends on b, so it is computed once per distinct b
    full = gap >= xi
    lay = np.empty(a.shape)
    if np.any(full):
        ub, inv = np.unique(b[full], return_inverse=True)
        lay[full] = layer(ub, np.full(ub.shape, xi))[inv]
    part = ~full
    if np.any(part):
        lay[part] = layer(b[part], s1[part])
    edge = _beta_plus(xi, s1, 1) * fn(b + s * s1)
    tail = np.where(full, fn(a) - fn(b + s * xi), 0.0)
    out[on] = s * (edge - lay + tail)
    return out


def kirchhoff(model: DiffusionModel, x, quad_tol=DEFAULT_TOL):
    """G(x) = int_0^x sqrt(Phi'(r)) dr by adaptive Simpson."""
    x = float(x)

    def integrand(r):
        v = float(model.dPhi(r))
        if v < 0:
            raise ModelViolationError(f"Phi'({r:g}) = {v:g} < 0")
        return math.sqrt(v)

    return adaptive_simpson(integrand, 0.0, x, quad_tol, breakpoints=model.kinks)


def kirchhoff_array(model: DiffusionModel, u):
    """Vectorized G(u); uses the closed form when the model ships one."""
    if model.G is not None:
        return model.G(u)
    u = np.asarray(u, dtype=float)
    lim = max(float(np.max(np.abs(u), initial=0.0)), 1.0)
    grid = np.linspace(-lim, lim, 4001)
    table = np.array([kirchhoff(model, g, 1e-9) for g in grid])
    return np.interp(u, grid, table)


def beta_kernel_limit(l, a, b, xi_seq, part="i", quad_tol=DEFAULT_TOL):
    """Integrals of beta_xi'' against ``l`` that concentrate at a or b as xi -> 0.

    part "i":  int_a^b beta''(a - s) l(s) ds   (limit -sgn^+(a-b) l(a))
    part "ii": int_b^a beta''(s - b) l(s) ds   (limit  sgn^+(a-b) l(b))
    """
    xi_seq = [float(x) for x in xi_seq]
    if any(x <= 0 for x in xi_seq) or any(x1 >= x0 for x0, x1 in zip(xi_seq, xi_seq[1:])):
        raise InvalidParameterError("xi_seq must be positive and strictly decreasing")
    a, b = float(a), float(b)
    out = []
    for xi in xi_seq:
        beta = EntropyApprox(xi)
        if part == "i":
            f = lambda s: beta.d2(a - s) * l(s)
            val = adaptive_simpson(f, a, b, quad_tol, breakpoints=(a - xi, a))
        elif part == "ii":
            f = lambda s: beta.d2(s - b) * l(s)
            val = adaptive_simpson(f, b, a, quad_tol, breakpoints=(b, b + xi))
        else:
            raise InvalidParameterError(f"part must be 'i' or 'ii', got {part!r}")
        out.append(val)
    return out


def split_positive_part(a, b):
    """(a^+ - b^+)^+ + (b^- - a^-)^+, which equals (a - b)^+."""
    return pos(pos(a) - pos(b)) + pos(neg(b) - neg(a))


def identity_residuals(flux: FluxModel, diffusion: DiffusionModel, a, b):
    """Residual arrays of the positive-part identities behind the comparison argument.

    Each entry is lhs - rhs evaluated on the arrays ``a``, ``b``; all of them
    vanish exactly in real arithmetic.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    F, Phi = flux.F, diffusion.Phi
    sp = lambda x: sign_bracket(x, "plus")
    ap, bp, am, bm = pos(a), pos(b), neg(a), neg(b)
    out = {
        "split": pos(a - b) - split_positive_part(a, b),
        "truncate": pos(ap - b) - (pos(ap - bp) - sp(bm) * b),
    }
    for name, fn in (("flux", F), ("diffusion", Phi)):
        out[f"{name}_truncate"] = sp(ap - b) * (fn(ap) - fn(b)) - (sp(ap - bp) * (fn(ap) - fn(bp)) - sp(bm) * fn(b))
        out[f"{name}_switch"] = sp(ap - bp) * (fn(ap) - fn(bp)) - sp(ap - b) * (fn(ap) - fn(bp))
    out["diffusion_signed"] = sign_bracket(ap - bp, "signed") * (Phi(ap) - Phi(bp)) - sign_bracket(
        ap - b, "signed"
    ) * (Phi(ap) - Phi(bp))
    # the two halves of the doubled problem recombine into the Kruzhkov brackets
    out["flux_recombine"] = (
        -sp(ap - bp) * (F(ap) - F(bp)) + sp(bm - am) * (F(-bm) - F(-am)) + kruzhkov_flux(flux, a, b, "plus")
    )
    out["diffusion_recombine"] = (
        sp(ap - bp) * (Phi(ap) - Phi(bp)) - sp(bm - am) * (Phi(-bm) - Phi(-am)) - kruzhkov_flux(diffusion, a, b, "plus")
    )
    return out
