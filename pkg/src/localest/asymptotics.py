"""Asymptotic bias and variance constants, and confidence intervals.

As the probe scale shrinks, both estimators obey central limit theorems:

    delta^-1 (theta_hat^A - theta(x0)) -> N(mu_A, theta(x0) Sigma_A)
    delta^-1 (theta_hat^P - theta(x0)) -> N(mu_1P + mu_2P, theta(x0) Sigma_P)

All constants reduce to weighted frequency integrals of the kernel through
the covariance functional

    Psi(z1, z2) = sigma0^2 (1/2pi) int Fz1(w) conj(Fz2(w)) / (2 w^2) dw,

which for z1 = Delta z has the closed form -(sigma0^2/2) <z, z2>.  Where a
closed form exists, the module computes the constant both ways and insists
they agree; disagreement points at a quadrature or transform defect and
raises instead of returning a silently wrong number.

Frequency integrals use |Ff(w)|^2 tables on geometrically spaced
Gauss-Legendre panels, with the upper cutoff grown until the w^4-weighted
tail is negligible.
"""

import math

import numpy as np

from .errors import (AnalyticUnavailable, DegeneratePsi, InternalInconsistency,
                     InvalidLevel, NonConvergence, OrderingViolated,
                     RouteDisagreement)
from .quadrature import panel_nodes

W_MIN = 1e-4
PANELS_PER_OCTAVE = 16
ROUTE_TOL = 1e-5


class FourierTable:
    """Sampled transform Ff(w) = int f(x) e^(-iwx) dx on a frequency grid.

    Nodes cover [W_MIN, w_max] with 16-point Gauss-Legendre panels, 16 per
    octave; w_max doubles until the w^4-weighted tail of |Ff|^2 drops below
    `tail_tol` of the total, so that every moment up to w^4 used downstream
    is resolved.
    """

    def __init__(self, f, support, w_max=256.0, tail_tol=1e-10):
        self.f = f
        self.support = support
        while True:
            self._build(f, support, w_max)
            tail = self.integrate(self.power * self.w ** 4, last_octave=True)
            total = self.integrate(self.power * self.w ** 4)
            if tail <= tail_tol * total or total == 0.0:
                break
            if w_max >= 1 << 16:
                raise NonConvergence(
                    f"frequency tail still {tail / total:.2e} at w_max={w_max:g}"
                )
            w_max *= 2.0

    def _build(self, f, support, w_max):
        lo, hi = support
        octaves = int(np.ceil(np.log2(w_max / W_MIN)))
        edges = W_MIN * 2.0 ** np.linspace(0.0, octaves, octaves * PANELS_PER_OCTAVE + 1)
        w_parts, wt_parts = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            n, wt = panel_nodes(a, b, 1)
            w_parts.append(n)
            wt_parts.append(wt)
        self.w = np.concatenate(w_parts)
        self.weights = np.concatenate(wt_parts)
        width = hi - lo
        x_panels = int(np.ceil(width * w_max / (3.0 * np.pi))) + 8
        x, xw = panel_nodes(lo, hi, x_panels)
        fx = f(x) * xw
        vals = np.empty(len(self.w), dtype=complex)
        block = 512
        for start in range(0, len(self.w), block):
            wb = self.w[start:start + block]
            phase = np.exp(-1j * np.outer(wb, x))
            vals[start:start + block] = phase @ fx
        self.values = vals
        self.power = np.abs(vals) ** 2
        self._n_last = PANELS_PER_OCTAVE * 16

    def integrate(self, integrand_values, last_octave=False):
        """Weighted sum over the positive-frequency grid."""
        if last_octave:
            return float(np.dot(self.weights[-self._n_last:],
                                integrand_values[-self._n_last:]))
        return float(np.dot(self.weights, integrand_values))


def _table(kernel, tag, f):
    key = ("fourier", tag)
    if key not in kernel._cache:
        r = kernel.support_radius
        kernel._cache[key] = FourierTable(f, (-r, r))
    return kernel._cache[key]


def _common_grid(ta, tb):
    """Common prefix of two tables' frequency grids.

    Grids share the per-octave layout and differ only in the adaptive upper
    cutoff, so the shorter one is a prefix of the longer.
    """
    n = min(len(ta.w), len(tb.w))
    return ta.w[:n], ta.weights[:n], ta.values[:n], tb.values[:n]


def kernel_table(kernel):
    return _table(kernel, "eval", kernel.eval)


def psi(z1, z2, support, sigma0=1.0):
    """Psi(z1, z2) = sigma0^2 (1/2pi) int Fz1 conj(Fz2) / (2 w^2) dw.

    For real z the integrand's real part is even in w, so the full-line
    integral is twice the positive-frequency one.
    """
    t1 = FourierTable(z1, support)
    t2 = t1 if z2 is z1 else FourierTable(z2, support)
    w, weights, v1, v2 = _common_grid(t1, t2)
    integrand = np.real(v1 * np.conj(v2)) / (2.0 * w ** 2)
    return float(sigma0 ** 2 / np.pi * np.dot(weights, integrand))


def psi_laplacian(kernel, sigma0=1.0):
    """Psi(Delta K, Delta K) by the frequency route: F(Delta K) = -w^2 FK.

    The closed form is (sigma0^2 / 2) ||K'||^2; `psi_laplacian_identity`
    returns that for comparison.
    """
    t = kernel_table(kernel)
    val = sigma0 ** 2 / np.pi * t.integrate(t.w ** 2 * t.power / 2.0)
    if not val > 0.0:
        raise DegeneratePsi(f"Psi(DK, DK) = {val:g} for kernel {kernel.name!r}")
    return float(val)


def psi_laplacian_identity(kernel, sigma0=1.0):
    return sigma0 ** 2 / 2.0 * kernel.norm(1) ** 2


def mu_augmented(kernel, theta_grad, a0=0.0, check=True):
    """Asymptotic bias constant of the augmented estimator.

    In one dimension the local linearisation beta of the generator error is

        beta = theta'(x0) (x K'' + 2 K') - (theta'(x0) - a(x0)) K'

    and mu_A = Psi(Delta K, beta) / Psi(Delta K, Delta K).  Using
    Psi(Delta K, z) = -(1/2) <K, z> and <K, K'> = 0 this collapses to
    theta'(x0) int x K'(x)^2 dx / ||K'||^2, independent of a(x0).  Both
    routes are computed and must agree to 1e-5.
    """
    r = kernel.support_radius
    x, w = panel_nodes(-r, r, 256)
    d1 = kernel.deriv1(x)
    shortcut = theta_grad * float(np.dot(w * x, d1 * d1)) / kernel.norm(1) ** 2
    if not check:
        return shortcut
    if theta_grad == 0.0 and a0 == 0.0:
        return 0.0

    def beta(y):
        return (theta_grad * (y * kernel.deriv2(y) + 2.0 * kernel.deriv1(y))
                - (theta_grad - a0) * kernel.deriv1(y))

    t_k = kernel_table(kernel)
    t_b = FourierTable(beta, (-r, r))
    w, weights, v_k, v_b = _common_grid(t_k, t_b)
    # Psi(Delta K, beta) with F(Delta K) = -w^2 FK
    num = float(1.0 / np.pi * np.dot(
        weights, np.real(-w ** 2 * v_k * np.conj(v_b)) / (2.0 * w ** 2)
    ))
    via_psi = num / psi_laplacian(kernel)
    # floor scales with the coefficient gradients so that symmetric kernels,
    # whose bias constant is exactly zero, compare as zero on both routes
    tol = ROUTE_TOL * max(abs(shortcut), abs(via_psi)) \
        + 1e-9 * r * (abs(theta_grad) + abs(a0))
    if abs(shortcut - via_psi) > tol:
        raise InternalInconsistency(
            f"mu_A routes disagree: {shortcut:.8e} vs {via_psi:.8e}"
        )
    return shortcut


def sigma_augmented(kernel, horizon):
    """Asymptotic variance constant 2 ||K||^2 / (T ||K'||^2).

    Equals Psi(Delta K, Delta K)^(-1) sigma0^2 ||K||^2 / T for any sigma0;
    both forms are checked against each other.
    """
    closed = 2.0 * kernel.norm() ** 2 / (horizon * kernel.norm(1) ** 2)
    generic = kernel.norm() ** 2 / (horizon * psi_laplacian(kernel))
    scale = max(closed, generic)
    if abs(closed - generic) > ROUTE_TOL * scale:
        raise InternalInconsistency(
            f"Sigma_A routes disagree: {closed:.8e} vs {generic:.8e}"
        )
    return closed


def antiderivative_gradient_power(kernel):
    """Frequency-side |F K~'|^2 table values: |FK|^2 / w^2 on the grid."""
    t = kernel_table(kernel)
    return t.power / t.w ** 2


def regularized_antiderivative_energy(kernel):
    """Stand-in for ||K~'||^2 when K~ does not exist.

    Cuts the divergent low-frequency part at the domain's lowest mode:
    (1/pi) int_pi^inf |FK(w)|^2 / w^2 dw.
    """
    t = kernel_table(kernel)
    integrand = np.where(t.w >= np.pi, t.power / t.w ** 2, 0.0)
    return float(t.integrate(integrand) / np.pi)


def gradient_heat_energy(kernel, s):
    """g(s) = || grad e^{(s/2) Laplace} K~ ||^2 = (1/pi) int_0^inf w^2 e^{-s w^2} |FK~|^2 dw.

    Vectorised over s.  |FK~|^2 = |FK|^2 / w^4.
    """
    t = kernel_table(kernel)
    base = t.power / t.w ** 2
    s = np.atleast_1d(np.asarray(s, dtype=float))
    out = np.exp(-np.outer(s, t.w ** 2)) @ (base * t.weights) / np.pi
    return out if out.shape[0] > 1 else float(out[0])


def sigma_proxy(kernel, horizon, check=True):
    """Asymptotic variance constant of the proxy estimator.

    Route (a): Sigma_P = (4/T) ||K~'||^-4 int_0^inf g(s)^2 ds with
    g(s) = || grad e^{(s/2) Laplace} K~ ||^2, integrated on a log grid with
    analytic head and tail stubs.  Route (b) does the s-integral exactly,
    leaving the double frequency integral

        (4/T) ||K~'||^-4 (1/pi^2) int int w^2 v^2 |FK~(w)|^2 |FK~(v)|^2
                                         / (w^2 + v^2) dw dv.

    Both routes must agree to 1e-5.

    Requires a compactly supported second antiderivative: when the first
    moment of the kernel survives, |FK~(w)|^2 grows like w^-2 near zero,
    g(s) decays only like s^(-1/2), and the s-integral diverges.  Such
    kernels raise AnalyticUnavailable instead of truncating a divergence.
    """
    if kernel.antiderivative is None:
        raise AnalyticUnavailable(
            "sigma_proxy needs a compactly supported second antiderivative; "
            "without it the variance integral diverges")
    t = kernel_table(kernel)
    grad_norm4 = kernel.antiderivative_norm(1) ** 4

    u = np.linspace(-16.0, 12.0, 3001)
    s = np.exp(u)
    g = gradient_heat_energy(kernel, s)
    core = float(np.trapezoid(g * g * s, u))
    head = s[0] * gradient_heat_energy(kernel, 0.0) ** 2
    # beyond s0 = e^12, g decays at least like s^-3/2 (worst case of a
    # nonvanishing kernel mass at w = 0), so g(s)^2 <= g(s0)^2 (s0/s)^3
    tail = float(g[-1] ** 2 * s[-1] / 2.0)
    route_a = 4.0 / horizon * (core + head + tail) / grad_norm4

    base = (t.power / t.w ** 2) * t.weights
    w2 = t.w ** 2
    double = 0.0
    block = 256
    for start in range(0, len(w2), block):
        rows = 1.0 / (w2[start:start + block, None] + w2[None, :])
        double += float(base[start:start + block] @ rows @ base)
    route_b = 4.0 / horizon * double / np.pi ** 2 / grad_norm4

    if check and abs(route_a - route_b) > ROUTE_TOL * max(route_a, route_b):
        raise RouteDisagreement(
            f"Sigma_P routes disagree: (a) {route_a:.8e} vs (b) {route_b:.8e}"
        )
    return route_b


def mu_proxy(kernel, theta, sigma_sq, theta_grad, sigma_sq_grad):
    """Asymptotic bias constants (mu_1P, mu_2P) of the proxy estimator.

    mu_1P = -(theta^2 / sigma^2) ||K~'||^-2 int x (sigma^2/theta)'(x0) K~'(x)^2 dx
    mu_2P =  (theta / sigma^2) ||K||^-2 int x (sigma^2)'(x0) K(x)^2 dx

    Scalar 1-d form: the coefficient gradients at the centre weight the
    first moments of |K~'|^2 and |K|^2.  Constant coefficients give (0, 0).
    """
    if kernel.antiderivative is None:
        raise AnalyticUnavailable(
            f"proxy bias constants need the antiderivative of {kernel.name!r}"
        )
    ratio_grad = (sigma_sq_grad * theta - sigma_sq * theta_grad) / theta ** 2
    r = kernel.support_radius
    x, w = panel_nodes(-r, r, 256)
    ad1 = kernel.antiderivative_deriv(x)
    kv = kernel.eval(x)
    m_ad = float(np.dot(w * x, ad1 * ad1))
    m_k = float(np.dot(w * x, kv * kv))
    mu1 = -(theta ** 2 / sigma_sq) * ratio_grad * m_ad \
        / kernel.antiderivative_norm(1) ** 2
    mu2 = (theta / sigma_sq) * sigma_sq_grad * m_k / kernel.norm() ** 2
    return mu1, mu2


def variance_ordering(kernel, horizon):
    """(Sigma_A, mid, Sigma_P) with mid = 2 ||K~'||^2 / (T ||K||^2).

    The chain Sigma_P >= mid >= Sigma_A holds for every admissible kernel
    by Cauchy-Schwarz; OrderingViolated reports the broken inequality.
    """
    s_a = sigma_augmented(kernel, horizon)
    s_p = sigma_proxy(kernel, horizon)
    mid = 2.0 * kernel.antiderivative_norm(1) ** 2 / (horizon * kernel.norm() ** 2)
    if s_p < mid * (1.0 - 1e-9) or mid < s_a * (1.0 - 1e-9):
        raise OrderingViolated(
            f"Sigma_P={s_p:.6e}, mid={mid:.6e}, Sigma_A={s_a:.6e}"
        )
    return s_a, mid, s_p


_ACKLAM_A = [-3.969683028665376e+01, 2.209460984245205e+02,
             -2.759285104469687e+02, 1.383577518672690e+02,
             -3.066479806614716e+01, 2.506628277459239e+00]
_ACKLAM_B = [-5.447609879822406e+01, 1.615858368580409e+02,
             -1.556989798598866e+02, 6.680131188771972e+01,
             -1.328068155288572e+01]
_ACKLAM_C = [-7.784894002430293e-03, -3.223964580411365e-01,
             -2.400758277161838e+00, -2.549732539343734e+00,
             4.374664141464968e+00, 2.938163982698783e+00]
_ACKLAM_D = [7.784695709041462e-03, 3.224671290700398e-01,
             2.445134137142996e+00, 3.754408661907416e+00]


def normal_quantile(p):
    """Inverse standard normal CDF: rational approximation polished with
    Newton steps on the erf residual to ~1e-15."""
    if not 0.0 < p < 1.0:
        raise InvalidLevel(f"quantile argument must be in (0, 1), got {p}")
    p_low = 0.02425
    if p < p_low:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_ACKLAM_C[0] * q + _ACKLAM_C[1]) * q + _ACKLAM_C[2]) * q
               + _ACKLAM_C[3]) * q + _ACKLAM_C[4]) * q + _ACKLAM_C[5])
             / ((((_ACKLAM_D[0] * q + _ACKLAM_D[1]) * q + _ACKLAM_D[2]) * q
                 + _ACKLAM_D[3]) * q + 1.0))
    elif p <= 1.0 - p_low:
        q = p - 0.5
        r = q * q
        x = ((((((_ACKLAM_A[0] * r + _ACKLAM_A[1]) * r + _ACKLAM_A[2]) * r
               + _ACKLAM_A[3]) * r + _ACKLAM_A[4]) * r + _ACKLAM_A[5]) * q
             / (((((_ACKLAM_B[0] * r + _ACKLAM_B[1]) * r + _ACKLAM_B[2]) * r
                  + _ACKLAM_B[3]) * r + _ACKLAM_B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        x = -((((((_ACKLAM_C[0] * q + _ACKLAM_C[1]) * q + _ACKLAM_C[2]) * q
                + _ACKLAM_C[3]) * q + _ACKLAM_C[4]) * q + _ACKLAM_C[5])
              / ((((_ACKLAM_D[0] * q + _ACKLAM_D[1]) * q + _ACKLAM_D[2]) * q
                  + _ACKLAM_D[3]) * q + 1.0))
    for _ in range(2):
        cdf = 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
        pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
        if pdf <= 0.0:
            break
        x -= (cdf - p) / pdf
    return x


def confidence_interval(theta_hat, delta, sigma_const, level=0.95):
    """Interval [theta_hat -+ delta sqrt(theta_hat Sigma) q_(1 - alpha/2)].

    Plug-in CLT interval; sigma_const is Sigma_A or Sigma_P for the chosen
    estimator (already containing the 1/T factor).
    """
    if not 0.0 < level < 1.0:
        raise InvalidLevel(f"confidence level must be in (0, 1), got {level}")
    q = normal_quantile(0.5 + level / 2.0)
    half = delta * math.sqrt(abs(theta_hat) * sigma_const) * q
    return theta_hat - half, theta_hat + half, level


def fisher_limit(kernel, theta, sigma, horizon):
    """Limit of delta^2 E[I_A]: T sigma^2 ||K'||^2 / (2 theta)."""
    return horizon * sigma ** 2 * kernel.norm(1) ** 2 / (2.0 * theta)


def scaling_limit_covariance(kernel, theta, sigma, t, t_prime):
    """Whole-line limit of the rescaled probe covariance, zero start:

    sigma^2 (1/2pi) int |FK(w)|^2 (e^{-theta |t-t'| w^2} - e^{-theta (t+t') w^2})
                                     / (2 theta w^2) dw.
    """
    tab = kernel_table(kernel)
    w2 = tab.w ** 2
    decay = (np.exp(-theta * abs(t - t_prime) * w2)
             - np.exp(-theta * (t + t_prime) * w2))
    integrand = tab.power * decay / (2.0 * theta * w2)
    return float(sigma ** 2 / np.pi * tab.integrate(integrand))
