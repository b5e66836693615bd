"""Exact Gaussian reference model in the Dirichlet sine basis.

With constant diffusivity theta and noise level sigma the field solves, mode
by mode in the basis e_k(x) = sqrt(2) sin(k pi x) with rates
lambda_k = theta (k pi)^2, the scalar OU equations

    d x_k = -lambda_k x_k dt + sigma d w_k.

Everything observable through compactly supported probes is a linear
functional of finitely many (well-approximated) modes, so probe time series
can be simulated exactly: the transition over a step of length dt is

    x_k(t + dt) = e^(-lambda_k dt) x_k(t) + N(0, sigma^2 (1 - e^(-2 lambda_k dt)) / (2 lambda_k)).

This module is the ground truth the estimators and the finite-difference
solver are validated against: exact covariances, exact expected energies,
and exact path laws with no spatial or temporal discretisation error.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, TruncationInsufficient
from .measurements import MeasurementPath
from .quadrature import integrate, panel_nodes

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

TAIL_TOL = 1e-7
MODE_BLOCK = 128
MODE_CAP = 1 << 13


def probe_coefficients(probe, n_modes):
    """Sine-basis coefficients c_k = <probe, sqrt(2) sin(k pi x)>, k = 1..n_modes.

    Composite Gauss-Legendre over the probe support with at least one panel
    per half-period of the fastest mode.
    """
    lo, hi = probe.support
    width = hi - lo
    panels = max(64, int(np.ceil(width * n_modes)) + 1)
    x, w = panel_nodes(lo, hi, panels)
    pw = probe.eval(x) * w
    k = np.arange(1, n_modes + 1)
    return np.sqrt(2.0) * np.sin(np.pi * np.outer(k, x)) @ pw


@dataclass(frozen=True)
class Channel:
    """Mode loadings of one scalar observation of the field.

    kind 'value' pairs the field with the probe itself; 'laplacian' pairs it
    with the probe's Laplacian, which by self-adjointness multiplies each
    coefficient by -(k pi)^2.
    """

    probe: object
    kind: str
    coeffs: np.ndarray


class OracleModel:
    """Constant-coefficient model with exact mode-wise simulation."""

    def __init__(self, theta, sigma):
        if theta <= 0.0:
            raise ConfigError(f"theta must be positive, got {theta}")
        if sigma < 0.0:
            raise ConfigError(f"sigma must be nonnegative, got {sigma}")
        self.theta = theta
        self.sigma = sigma

    def rates(self, n_modes):
        k = np.arange(1, n_modes + 1)
        return self.theta * (np.pi * k) ** 2

    def build_channels(self, probe_kinds, n_modes=None):
        """Channels for (probe, kind) pairs, with automatic mode truncation.

        Modes are added in blocks until the trailing block contributes less
        than a 1e-7 relative tail to sum f^2 and sum f^2 / lambda for every
        channel, or TruncationInsufficient is raised at the cap.
        """
        if n_modes is not None:
            return [self._channel(p, kind, n_modes) for p, kind in probe_kinds]
        n = MODE_BLOCK
        while True:
            chans = [self._channel(p, kind, n) for p, kind in probe_kinds]
            lam = self.rates(n)
            tail_ok = True
            for ch in chans:
                f2 = ch.coeffs ** 2
                for weighted in (f2, f2 / lam):
                    total = weighted.sum()
                    tail = weighted[-MODE_BLOCK:].sum()
                    if not tail <= TAIL_TOL * total:
                        tail_ok = False
            if tail_ok:
                return chans
            if 2 * n > MODE_CAP:
                raise TruncationInsufficient(
                    f"mode tail still above {TAIL_TOL:g} at {n} modes"
                )
            n *= 2

    def _channel(self, probe, kind, n_modes):
        c = probe_coefficients(probe, n_modes)
        if kind == "value":
            f = c
        elif kind == "laplacian":
            k = np.arange(1, n_modes + 1)
            f = -((np.pi * k) ** 2) * c
        else:
            raise ConfigError(f"unknown channel kind {kind!r}")
        return Channel(probe=probe, kind=kind, coeffs=f)

    def covariance(self, channels, t, s, init="stationary"):
        """Exact covariance matrix Cov(y_i(t), y_j(s)) of the channels.

        init 'stationary' draws x(0) from the invariant law; 'zero' starts
        every mode at zero, giving the inhomogeneous covariance
        (e^(-lambda |t-s|) - e^(-lambda (t+s))) sigma^2 / (2 lambda).
        """
        n = max(len(ch.coeffs) for ch in channels)
        lam = self.rates(n)
        decay = np.exp(-lam * abs(t - s))
        if init == "zero":
            decay = decay - np.exp(-lam * (t + s))
        elif init != "stationary":
            raise ConfigError(f"unknown init {init!r}")
        base = self.sigma ** 2 * decay / (2.0 * lam)
        out = np.empty((len(channels), len(channels)))
        for i, ci in enumerate(channels):
            for j, cj in enumerate(channels):
                out[i, j] = np.dot(ci.coeffs * cj.coeffs, base[: len(ci.coeffs)])
        return out

    def stationary_variance(self, channel):
        lam = self.rates(len(channel.coeffs))
        return float(self.sigma ** 2 * np.dot(channel.coeffs ** 2, 1.0 / (2.0 * lam)))

    def expected_energy(self, channel, horizon, init="stationary"):
        """E int_0^T y(t)^2 dt in closed form."""
        lam = self.rates(len(channel.coeffs))
        f2 = channel.coeffs ** 2
        if init == "stationary":
            per_mode = horizon / (2.0 * lam)
        elif init == "zero":
            per_mode = (horizon - (1.0 - np.exp(-2.0 * lam * horizon)) / (2.0 * lam)) \
                / (2.0 * lam)
        else:
            raise ConfigError(f"unknown init {init!r}")
        return float(self.sigma ** 2 * np.dot(f2, per_mode))

    def wick_integral_variance(self, channel, horizon):
        """Var int_0^T y(t)^2 dt for the stationary Gaussian channel.

        For a centred Gaussian process the variance is
        2 int int Cov(y_t, y_s)^2 dt ds, which for a stationary covariance
        C(u) collapses to 4 int_0^T (T - u) C(u)^2 du.
        """
        lam = self.rates(len(channel.coeffs))
        w = self.sigma ** 2 * channel.coeffs ** 2 / (2.0 * lam)

        def cov_sq(u):
            c = np.exp(-np.outer(u, lam)) @ w
            return c * c

        val = integrate(lambda u: (horizon - u) * cov_sq(u), 0.0, horizon,
                        tol=1e-11)
        return float(4.0 * val)

    def simulate(self, channels, horizon, n_steps, seed, init="stationary",
                 backend="auto"):
        """Exact joint sample of the channel series on t_k = k T / n.

        Returns an array of shape (n_channels, n_steps + 1).  The same seed
        yields the same path on every backend.
        """
        if init not in ("stationary", "zero"):
            raise ConfigError(f"unknown init {init!r}")
        n_modes = max(len(ch.coeffs) for ch in channels)
        lam = self.rates(n_modes)
        dt = horizon / n_steps
        a = np.exp(-lam * dt)
        s = self.sigma * np.sqrt((1.0 - a * a) / (2.0 * lam))
        stat = self.sigma * np.sqrt(1.0 / (2.0 * lam))
        F = np.zeros((len(channels), n_modes))
        for i, ch in enumerate(channels):
            F[i, : len(ch.coeffs)] = ch.coeffs
        draw_init = init == "stationary"
        seed = int(seed) & 0xFFFFFFFF
        if backend == "auto":
            backend = "numba" if HAVE_NUMBA else "numpy"
        if backend == "numba":
            if not HAVE_NUMBA:
                raise ConfigError("numba backend requested but numba is missing")
            return _simulate_numba(seed, n_steps, a, s, stat, F, draw_init)
        if backend == "numpy":
            return _simulate_numpy(seed, n_steps, a, s, stat, F, draw_init)
        raise ConfigError(f"unknown backend {backend!r}")

    def simulate_measurement(self, probe, horizon, n_steps, seed,
                             init="stationary", backend="auto", n_modes=None):
        """MeasurementPath of (value, laplacian) channels for one probe."""
        chans = self.build_channels(
            [(probe, "value"), (probe, "laplacian")], n_modes=n_modes
        )
        out = self.simulate(chans, horizon, n_steps, seed, init=init,
                            backend=backend)
        return MeasurementPath(
            dt=horizon / n_steps,
            x=out[0],
            x_lap=out[1],
            meta={
                "delta": probe.delta,
                "x0": probe.x0,
                "kernel": probe.kernel.name,
                "theta": self.theta,
                "sigma": self.sigma,
                "seed": seed,
                "init": init,
                "n_modes": len(chans[0].coeffs),
            },
        )


def _simulate_numpy(seed, n_steps, a, s, stat, F, draw_init):
    """Chunked lfilter implementation; bit-identical to the numba kernel."""
    m = len(a)
    rs = np.random.RandomState(seed)
    x = np.zeros(m)
    if draw_init:
        x = stat * rs.standard_normal(m)
    out = np.empty((F.shape[0], n_steps + 1))
    out[:, 0] = F @ x
    chunk = max(1, (1 << 22) // m)
    pos = 0
    while pos < n_steps:
        nb = min(chunk, n_steps - pos)
        z = rs.standard_normal((nb, m))
        y = np.empty_like(z)
        for j in range(m):
            y[:, j], _ = lfilter([1.0], [1.0, -a[j]], s[j] * z[:, j],
                                 zi=np.array([a[j] * x[j]]))
        out[:, pos + 1: pos + nb + 1] = F @ y.T
        x = y[-1].copy()
        pos += nb
    return out


def _simulate_core(seed, n_steps, a, s, stat, F, draw_init):
    m = a.shape[0]
    n_ch = F.shape[0]
    np.random.seed(seed)
    x = np.zeros(m)
    if draw_init:
        z0 = np.random.standard_normal(m)
        for j in range(m):
            x[j] = stat[j] * z0[j]
    out = np.empty((n_ch, n_steps + 1))
    for c in range(n_ch):
        acc = 0.0
        for j in range(m):
            acc += F[c, j] * x[j]
        out[c, 0] = acc
    for k in range(n_steps):
        z = np.random.standard_normal(m)
        for j in range(m):
            x[j] = a[j] * x[j] + s[j] * z[j]
        for c in range(n_ch):
            acc = 0.0
            for j in range(m):
                acc += F[c, j] * x[j]
            out[c, k + 1] = acc
    return out


if HAVE_NUMBA:
    _simulate_numba = njit(cache=True)(_simulate_core)
else:  # pragma: no cover
    _simulate_numba = _simulate_core
