"""Compactly supported kernels and their rescaled point-probe versions.

The kernel family is built from the bump

    phi(x) = exp(-12 / (1 - x^2))   for |x| < 1,  0 otherwise.

Derivatives of phi are rational prefactors times phi:
phi^(n)(x) = P_n(x) / (1-x^2)^(2n) * phi(x), with the integer-coefficient
polynomials P_n generated by

    P_{n+1} = P_n' (1-x^2)^2 + 4 n x P_n (1-x^2) - 24 x P_n.

The two reference kernels are K1 = phi''' (which has the compactly supported
second antiderivative phi') and K2 = phi' (which has none, since its first
moment does not vanish).

A probe at scale delta and centre x0 is the L^2-normalised rescaling
delta^(-1/2) K((x - x0)/delta); its Laplacian carries the extra delta^(-2)
factor.  Centres closer than delta to the boundary are shifted onto
delta or 1 - delta so the support stays inside the unit interval.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.polynomial import chebyshev as _cheb
from numpy.polynomial import polynomial as _poly

from .errors import (AnalyticUnavailable, ConfigError, DomainTooSmall,
                     MomentConditionViolated, ProbeOutsideDomain,
                     UnknownPreset)
from .quadrature import integrate

MAX_DERIVATIVE_ORDER = 6
SUPPORT_EDGE = 1.0 - 1e-12

_U2 = np.array([1.0, 0.0, -1.0])           # 1 - x^2
_U4 = _poly.polymul(_U2, _U2)
_X = np.array([0.0, 1.0])


def _bump_prefactors(max_order):
    out = [np.array([1.0])]
    for n in range(max_order):
        pn = out[-1]
        nxt = _poly.polyadd(
            _poly.polymul(_poly.polyder(pn), _U4),
            _poly.polyadd(
                4.0 * n * _poly.polymul(_X, _poly.polymul(pn, _U2)),
                -24.0 * _poly.polymul(_X, pn),
            ),
        )
        out.append(nxt)
    return out


_PREFACTORS = _bump_prefactors(MAX_DERIVATIVE_ORDER)


def bump(x):
    """The bump phi(x) = exp(-12/(1-x^2)) on (-1, 1), zero outside."""
    return bump_derivative(0, x)


def bump_derivative(order, x):
    """n-th derivative of the bump, exact rational-prefactor evaluation.

    Vanishes identically for |x| >= 1 - 1e-12 (all derivatives of phi
    extend continuously by zero).
    """
    if not 0 <= order <= MAX_DERIVATIVE_ORDER:
        raise ValueError(f"bump derivative order {order} outside 0..{MAX_DERIVATIVE_ORDER}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    inside = np.abs(x) < SUPPORT_EDGE
    xi = x[inside]
    u = 1.0 - xi * xi
    out[inside] = _poly.polyval(xi, _PREFACTORS[order]) / u ** (2 * order) * np.exp(-12.0 / u)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class KernelSpec:
    """A compactly supported kernel together with its first two derivatives.

    `antiderivative` / `antiderivative_deriv` hold the compactly supported
    second antiderivative K~ (Delta K~ = K) and its first derivative when one
    exists; both are None otherwise.
    """

    name: str
    eval: callable = field(repr=False)
    deriv1: callable = field(repr=False)
    deriv2: callable = field(repr=False)
    support_radius: float = 1.0
    moment0: float = 0.0
    moment1: float = 0.0
    antiderivative: callable = field(default=None, repr=False)
    antiderivative_deriv: callable = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def moments_by_quadrature(self):
        r = self.support_radius
        m0 = integrate(self.eval, -r, r)
        m1 = integrate(lambda x: x * self.eval(x), -r, r)
        return m0, m1

    def norm(self, derivative_order=0):
        """Cached L^2 norm of K, K' or K''."""
        key = ("norm", derivative_order)
        if key not in self._cache:
            self._cache[key] = l2_norm(self, derivative_order)
        return self._cache[key]

    def antiderivative_norm(self, derivative_order=1):
        """Cached L^2 norm of K~ or K~' (raises if no antiderivative)."""
        if self.antiderivative is None:
            raise AnalyticUnavailable(
                f"kernel {self.name!r} has no compactly supported second antiderivative"
            )
        key = ("anorm", derivative_order)
        if key not in self._cache:
            f = self.antiderivative if derivative_order == 0 else self.antiderivative_deriv
            r = self.support_radius
            key_val = np.sqrt(integrate(lambda x: f(x) ** 2, -r, r))
            self._cache[key] = key_val
        return self._cache[key]


def l2_norm(f, derivative_order=0, support=(-1.0, 1.0)):
    """L^2 norm over the support; f is a KernelSpec or a plain evaluator.

    For a KernelSpec, derivative_order in {0, 1} picks K or K'.  For a plain
    callable only order 0 is defined (the caller passes the derivative
    evaluator directly if it wants a derivative norm).
    """
    if isinstance(f, KernelSpec):
        g = {0: f.eval, 1: f.deriv1, 2: f.deriv2}[derivative_order]
        a, b = -f.support_radius, f.support_radius
    else:
        if derivative_order != 0:
            raise ValueError("derivative_order > 0 needs a KernelSpec")
        g = f
        a, b = support
    return float(np.sqrt(integrate(lambda x: g(x) ** 2, a, b)))


def make_paper_kernels():
    """The two reference kernels (K1, K2) = (phi''', phi')."""
    k1 = KernelSpec(
        name="k1",
        eval=lambda x: bump_derivative(3, x),
        deriv1=lambda x: bump_derivative(4, x),
        deriv2=lambda x: bump_derivative(5, x),
        moment0=0.0,
        moment1=0.0,
        antiderivative=lambda x: bump_derivative(1, x),
        antiderivative_deriv=lambda x: bump_derivative(2, x),
    )
    minus_int_phi = -integrate(bump, -1.0, 1.0)
    k2 = KernelSpec(
        name="k2",
        eval=lambda x: bump_derivative(1, x),
        deriv1=lambda x: bump_derivative(2, x),
        deriv2=lambda x: bump_derivative(3, x),
        moment0=0.0,
        moment1=minus_int_phi,
    )
    return k1, k2


MOMENT_TOL = 1e-9


class AntiderivativePair:
    """Second antiderivative K~ of a kernel, with its first derivative.

    K~(x) = int_{-r}^{x} int_{-r}^{y} K(u) du dy, represented by a Chebyshev
    series on the support and zero outside.  Compact support requires
    int K = int x K = 0.
    """

    def __init__(self, value, deriv):
        self.value = value
        self.deriv = deriv

    def __call__(self, x):
        return self.value(x)


def antiderivative_pair(kernel, degree=1024):
    """Build K~ with Delta K~ = K; raises MomentConditionViolated unless
    both the mass and the first moment of K vanish (|.| < 1e-9)."""
    m0, m1 = kernel.moments_by_quadrature()
    if abs(m0) >= MOMENT_TOL or abs(m1) >= MOMENT_TOL:
        raise MomentConditionViolated(
            f"kernel {kernel.name!r} moments (m0={m0:.3e}, m1={m1:.3e}) "
            f"exceed {MOMENT_TOL:g}; no compactly supported antiderivative"
        )
    r = kernel.support_radius
    coeffs = _cheb.chebinterpolate(lambda t: kernel.eval(t * r), degree)
    c1 = _cheb.chebint(coeffs, lbnd=-1.0) * r          # d/dx -> d/dt chain rule
    c2 = _cheb.chebint(c1, lbnd=-1.0) * r

    def _masked(c, scale):
        def f(x):
            x = np.asarray(x, dtype=float)
            scalar = x.ndim == 0
            x = np.atleast_1d(x)
            out = np.zeros_like(x)
            inside = np.abs(x) < r
            out[inside] = _cheb.chebval(x[inside] / r, c) * scale
            return float(out[0]) if scalar else out
        return f

    return AntiderivativePair(_masked(c2, 1.0), _masked(c1, 1.0))


@dataclass(frozen=True)
class RescaledProbe:
    """L^2-normalised probe delta^(-1/2) K((x-x0)/delta) and its Laplacian."""

    kernel: KernelSpec
    delta: float
    x0: float

    def eval(self, x):
        s = self.delta ** -0.5
        return s * self.kernel.eval((np.asarray(x, dtype=float) - self.x0) / self.delta)

    def laplacian(self, x):
        s = self.delta ** -2.5
        return s * self.kernel.deriv2((np.asarray(x, dtype=float) - self.x0) / self.delta)

    @property
    def support(self):
        r = self.kernel.support_radius * self.delta
        return (self.x0 - r, self.x0 + r)


def rescale(kernel, delta, x0):
    """Probe at resolution delta centred at x0, shifted off the boundary.

    Centres with x0 < delta (resp. x0 > 1 - delta) are moved to delta
    (resp. 1 - delta).  delta >= 1/2 leaves no admissible centre.
    """
    if not 0.0 < delta:
        raise DomainTooSmall(f"delta must be positive, got {delta}")
    if delta * kernel.support_radius >= 0.5:
        raise DomainTooSmall(
            f"probe radius {delta * kernel.support_radius:g} >= 1/2; "
            "support cannot fit inside the unit interval"
        )
    if not 0.0 <= x0 <= 1.0:
        raise ProbeOutsideDomain(f"centre {x0} outside [0, 1]")
    r = delta * kernel.support_radius
    shifted = min(max(x0, r), 1.0 - r)
    return RescaledProbe(kernel=kernel, delta=delta, x0=shifted)


def polynomial_bump_kernel(coeffs, name="poly-bump"):
    """Kernel K = (P phi)'' for a polynomial P, with K~ = P phi built in.

    Any such K integrates to zero with zero first moment (it is the second
    derivative of a compactly supported function), so the antiderivative
    pair always exists and equals (P phi, (P phi)').
    """
    coeffs = np.asarray(coeffs, dtype=float)

    def ad_derivative(order):
        # (P phi)^(n) = sum_j binom(n, j) P^(n-j) phi^(j)
        polys = [coeffs]
        for _ in range(order):
            polys.append(_poly.polyder(polys[-1]))

        def f(x):
            x = np.asarray(x, dtype=float)
            total = np.zeros_like(x, dtype=float)
            for j in range(order + 1):
                binom = math.comb(order, j)
                total = total + binom * _poly.polyval(x, polys[order - j]) \
                    * bump_derivative(j, x)
            return total if total.ndim else float(total)
        return f

    return KernelSpec(
        name=name,
        eval=ad_derivative(2),
        deriv1=ad_derivative(3),
        deriv2=ad_derivative(4),
        moment0=0.0,
        moment1=0.0,
        antiderivative=ad_derivative(0),
        antiderivative_deriv=ad_derivative(1),
    )


def load_custom_kernel(path):
    """Kernel from a two-column text file (x, K(x)), cubic-spline rebuilt.

    The sample must cover a symmetric interval [-r, r]; the kernel is zero
    outside the sampled range.  Moments are recomputed from the spline.
    """
    from scipy.interpolate import CubicSpline

    data = np.loadtxt(path)
    if data.ndim != 2 or data.shape[1] != 2 or data.shape[0] < 8:
        raise ConfigError(
            f"custom kernel file {path} must have >= 8 rows of (x, K(x))"
        )
    x, y = data[:, 0], data[:, 1]
    order = np.argsort(x)
    x, y = x[order], y[order]
    r = float(max(abs(x[0]), abs(x[-1])))
    spline = CubicSpline(x, y, bc_type="natural")
    d1, d2 = spline.derivative(1), spline.derivative(2)

    def _masked(f):
        def g(t):
            t = np.asarray(t, dtype=float)
            scalar = t.ndim == 0
            t = np.atleast_1d(t)
            out = np.zeros_like(t)
            inside = (t >= x[0]) & (t <= x[-1])
            out[inside] = f(t[inside])
            return float(out[0]) if scalar else out
        return g

    k = KernelSpec(
        name=f"custom:{Path(path).name}",
        eval=_masked(spline),
        deriv1=_masked(d1),
        deriv2=_masked(d2),
        support_radius=r,
    )
    m0, m1 = k.moments_by_quadrature()
    k = KernelSpec(
        name=k.name, eval=k.eval, deriv1=k.deriv1, deriv2=k.deriv2,
        support_radius=r, moment0=m0, moment1=m1,
    )
    if abs(m0) < MOMENT_TOL and abs(m1) < MOMENT_TOL:
        pair = antiderivative_pair(k)
        k = KernelSpec(
            name=k.name, eval=k.eval, deriv1=k.deriv1, deriv2=k.deriv2,
            support_radius=r, moment0=m0, moment1=m1,
            antiderivative=pair.value, antiderivative_deriv=pair.deriv,
        )
    return k


_PRESET_KERNELS = {}


def get_kernel(name):
    """Kernel by name: 'k1', 'k2' or 'custom:<path>'.

    The named presets are built once and shared, so their cached norms and
    frequency tables are reused across calls.
    """
    if name in ("k1", "k2"):
        if not _PRESET_KERNELS:
            pair = make_paper_kernels()
            _PRESET_KERNELS["k1"], _PRESET_KERNELS["k2"] = pair
        return _PRESET_KERNELS[name]
    if name.startswith("custom:"):
        return load_custom_kernel(name.split(":", 1)[1])
    raise UnknownPreset(f"unknown kernel name {name!r}")
