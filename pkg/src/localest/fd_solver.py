"""Semi-implicit finite-difference simulation with streaming probe readout.

The field is advanced on a regular grid over (0, 1) with homogeneous
Dirichlet boundaries by

    (I - dt A) X_{k+1} = X_k + sigma(y_j) sqrt(dt / h) xi_{k,j},

where A discretises div(theta grad .) + a d/dx + b in flux form and the
xi_{k,j} are i.i.d. standard normals at the interior nodes (the L^2
projection of space-time white noise onto grid cells).  Treating all of A
implicitly keeps the step unconditionally stable, so one tridiagonal
factorisation serves the whole run.

The full field is never stored across time.  Probes are registered up
front and accumulated online; a run returns one measurement path per
probe, holding the h-weighted probe and Laplacian-probe values at every
time step.  Optionally the field itself is dumped every few steps as raw
rows of little-endian doubles for heatmap rendering.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import solve_banded

from .errors import (
    ConfigError,
    NonPositiveDiffusivity,
    ProbeOutsideDomain,
    UnknownPreset,
    ZeroPivot,
)
from .kernels import bump_derivative
from .measurements import MeasurementPath

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False

# peak value of the smooth bump, used to normalise initial-condition peaks
PHI_PEAK = float(bump_derivative(0, 0.0))


@dataclass(frozen=True)
class Grid:
    """Regular space-time grid: nodes y_j = j/m, times t_k = k horizon/n."""

    m: int
    n: int
    horizon: float

    def __post_init__(self):
        if self.m < 4:
            raise ConfigError(f"need at least 4 spatial intervals, got {self.m}")
        if self.n < 1:
            raise ConfigError(f"need at least 1 time step, got {self.n}")
        if not self.horizon > 0.0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")

    @property
    def h(self):
        return 1.0 / self.m

    @property
    def dt(self):
        return self.horizon / self.n

    @property
    def nodes(self):
        return np.arange(self.m + 1) / self.m

    @property
    def interior(self):
        return np.arange(1, self.m) / self.m


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class CoefficientField:
    """Spatially varying coefficients of the generator and the noise.

    theta and sigma carry gradient evaluators (of theta and of sigma^2)
    because the estimator bias constants depend on local derivatives.
    All evaluators map arrays of points in [0, 1] to arrays of values.
    """

    theta: Callable
    theta_grad: Callable
    sigma: Callable
    sigma_sq_grad: Callable
    a: Callable = _zero
    b: Callable = _zero


def constant_coefficients(theta, sigma):
    """Constant diffusivity and noise level, no lower-order terms."""
    if not theta > 0.0:
        raise NonPositiveDiffusivity(f"theta must be positive, got {theta}")
    th, sg = float(theta), float(sigma)
    return CoefficientField(
        theta=lambda x: np.full(np.shape(x), th, dtype=float),
        theta_grad=_zero,
        sigma=lambda x: np.full(np.shape(x), sg, dtype=float),
        sigma_sq_grad=_zero,
    )


def two_level_theta(sigma=1.0, low=0.05, high=0.4, center=0.5, width=0.08):
    """Smooth step diffusivity: high plateau left of center, low right.

    theta(x) = low + (high - low) (1 - tanh((x - center)/width)) / 2, with
    the matching analytic gradient; constant noise level sigma.
    """
    if not (low > 0.0 and high > 0.0):
        raise NonPositiveDiffusivity("both plateau values must be positive")
    jump = high - low
    sg = float(sigma)

    def theta(x):
        u = (np.asarray(x, dtype=float) - center) / width
        return low + jump * (1.0 - np.tanh(u)) / 2.0

    def theta_grad(x):
        u = (np.asarray(x, dtype=float) - center) / width
        return -jump / (2.0 * width * np.cosh(u) ** 2)

    return CoefficientField(
        theta=theta,
        theta_grad=theta_grad,
        sigma=lambda x: np.full(np.shape(x), sg, dtype=float),
        sigma_sq_grad=_zero,
    )


def coefficient_preset(name, theta=0.5, sigma=1.0):
    """Named coefficient families used by the experiment configs."""
    if name == "constant":
        return constant_coefficients(theta, sigma)
    if name == "two-level":
        return two_level_theta(sigma=sigma)
    raise UnknownPreset(f"unknown coefficient preset {name!r}")


@dataclass(frozen=True)
class TwoPeaks:
    """Initial condition with equal smooth peaks at the given centers.

    Each peak is height * phi((x - c)/width) / phi(0) for the bump phi, so
    the peaks actually reach the requested height.
    """

    height: float = 5.0
    width: float = 0.05
    centers: tuple = (0.2, 0.8)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in self.centers:
            out += self.height * bump_derivative(0, (x - c) / self.width) / PHI_PEAK
        return out


def initial_field(x0_initial, grid):
    """Node values of the initial condition, boundary pinned to zero.

    Accepts "zero" or None, a TwoPeaks spec, a callable of position, or an
    array tabulated at all m + 1 nodes.
    """
    y = grid.nodes
    if x0_initial is None or (isinstance(x0_initial, str) and x0_initial == "zero"):
        return np.zeros(grid.m + 1)
    if isinstance(x0_initial, str):
        raise ConfigError(f"unknown initial-condition name {x0_initial!r}")
    if isinstance(x0_initial, TwoPeaks):
        vals = x0_initial.eval(y)
    elif callable(x0_initial):
        vals = np.asarray(x0_initial(y), dtype=float)
    else:
        vals = np.asarray(x0_initial, dtype=float)
        if vals.shape != y.shape:
            raise ConfigError(
                f"tabulated initial condition needs {grid.m + 1} node values, "
                f"got shape {vals.shape}"
            )
        vals = vals.copy()
    if vals.shape != y.shape or not np.all(np.isfinite(vals)):
        raise ConfigError("initial condition must be finite on all nodes")
    vals[0] = 0.0
    vals[-1] = 0.0
    return vals


@dataclass(frozen=True)
class SimConfig:
    """One simulation: grid, coefficients, initial condition, seed."""

    grid: Grid
    coeffs: CoefficientField
    x0_initial: object = "zero"
    seed: int = 0


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Interior rows of the discretised div(theta grad .) + a d/dx + b.

    Entry conventions for interior nodes i = 1..m-1 stored at q = i-1:
    row q couples lower[q], diag[q], upper[q] to (z_{i-1}, z_i, z_{i+1});
    lower[0] and upper[-1] are zero because the Dirichlet neighbours are
    eliminated.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    h: float

    def apply(self, z):
        z = np.asarray(z, dtype=float)
        out = self.diag * z
        out[1:] += self.lower[1:] * z[:-1]
        out[:-1] += self.upper[:-1] * z[1:]
        return out


def _eval_on(f, x):
    vals = np.asarray(f(x), dtype=float)
    if vals.ndim == 0:
        vals = np.full(x.shape, float(vals))
    if vals.shape != x.shape:
        raise ConfigError("coefficient evaluator must map the grid to the grid")
    return vals


def build_operator(coeffs, grid):
    """Flux-form assembly with half-node diffusivity by arithmetic means.

    Diffusion row: (th_{i+1/2}(z_{i+1}-z_i) - th_{i-1/2}(z_i-z_{i-1}))/h^2;
    drift by centered differences a_i (z_{i+1}-z_{i-1})/(2h); zero-order
    term b_i z_i.
    """
    h = grid.h
    th = _eval_on(coeffs.theta, grid.nodes)
    if not np.all(np.isfinite(th)) or np.any(th <= 0.0):
        raise NonPositiveDiffusivity("theta must be finite and positive on all nodes")
    th_half = 0.5 * (th[:-1] + th[1:])
    if np.any(th_half <= 0.0):
        raise NonPositiveDiffusivity("theta non-positive at a half node")
    yi = grid.interior
    av = _eval_on(coeffs.a, yi)
    bv = _eval_on(coeffs.b, yi)
    left = th_half[:-1] / h**2
    right = th_half[1:] / h**2
    lower = left - av / (2.0 * h)
    upper = right + av / (2.0 * h)
    diag = -(th_half[:-1] + th_half[1:]) / h**2 + bv
    lower[0] = 0.0
    upper[-1] = 0.0
    return TridiagonalOperator(lower=lower, diag=diag, upper=upper, h=h)


@dataclass(frozen=True, eq=False)
class ThomasFactorization:
    """Forward-elimination data of a tridiagonal system, reusable per solve."""

    sub: np.ndarray
    cp: np.ndarray
    inv_piv: np.ndarray


def thomas_factorize(sub, diag, sup):
    """One O(m) elimination sweep; each later solve is two O(m) sweeps."""
    sub = np.asarray(sub, dtype=float)
    diag = np.asarray(diag, dtype=float)
    sup = np.asarray(sup, dtype=float)
    mi = len(diag)
    cp = np.empty(mi)
    inv_piv = np.empty(mi)
    piv = diag[0]
    for i in range(mi):
        if i > 0:
            piv = diag[i] - sub[i] * cp[i - 1]
        if not abs(piv) > 0.0:
            raise ZeroPivot(f"vanishing pivot in row {i}")
        inv_piv[i] = 1.0 / piv
        cp[i] = sup[i] * inv_piv[i] if i < mi - 1 else 0.0
    return ThomasFactorization(sub=sub, cp=cp, inv_piv=inv_piv)


def implicit_system(op, dt):
    """Tridiagonal bands of I - dt A for the implicit step."""
    return -dt * op.lower, 1.0 - dt * op.diag, -dt * op.upper


def thomas_solve(fact, rhs):
    """Solve the factorised tridiagonal system for one right-hand side."""
    rhs = np.asarray(rhs, dtype=float)
    mi = len(rhs)
    y = np.empty(mi)
    y[0] = rhs[0] * fact.inv_piv[0]
    for i in range(1, mi):
        y[i] = (rhs[i] - fact.sub[i] * y[i - 1]) * fact.inv_piv[i]
    x = np.empty(mi)
    x[-1] = y[-1]
    for i in range(mi - 2, -1, -1):
        x[i] = y[i] - fact.cp[i] * x[i + 1]
    return x


def _seed_core(seed):
    np.random.seed(seed)


def _step_core(n_steps, x, s, sub, cp, inv_piv, W, h, out, col0, noisy):
    mi = x.shape[0]
    n_ch = W.shape[0]
    y = np.empty(mi)
    for k in range(n_steps):
        if noisy:
            z = np.random.standard_normal(mi)
            for j in range(mi):
                y[j] = x[j] + s[j] * z[j]
        else:
            for j in range(mi):
                y[j] = x[j]
        y[0] = y[0] * inv_piv[0]
        for i in range(1, mi):
            y[i] = (y[i] - sub[i] * y[i - 1]) * inv_piv[i]
        x[mi - 1] = y[mi - 1]
        for i in range(mi - 2, -1, -1):
            x[i] = y[i] - cp[i] * x[i + 1]
        col = col0 + k + 1
        for c in range(n_ch):
            acc = 0.0
            for j in range(mi):
                acc += W[c, j] * x[j]
            out[c, col] = h * acc


if HAVE_NUMBA:
    _seed_numba = njit(cache=True)(_seed_core)
    _step_numba = njit(cache=True)(_step_core)
else:  # pragma: no cover
    _seed_numba = _seed_core
    _step_numba = _step_core

NUMPY_DRAW_CHUNK = 1 << 22


def _step_numpy(rs, n_steps, x, s, ab, W, h, out, col0, noisy):
    mi = x.shape[0]
    pos = 0
    while pos < n_steps:
        nb = min(max(1, NUMPY_DRAW_CHUNK // mi), n_steps - pos)
        z = rs.standard_normal((nb, mi)) if noisy else None
        for k in range(nb):
            rhs = x + s * z[k] if noisy else x
            x[:] = solve_banded((1, 1), ab, rhs)
            out[:, col0 + pos + k + 1] = h * (W @ x)
        pos += nb


def _snapshot_row(handle, grid, x_interior):
    row = np.zeros(grid.m + 1)
    row[1:-1] = x_interior
    handle.write(row.astype("<f8").tobytes())


def simulate(config, probes, backend="auto", snapshot_path=None,
             snapshot_every=None):
    """Run the scheme once, returning one measurement path per probe.

    Probe and Laplacian-probe values are accumulated at every step through
    the h-weighted interior quadrature; the field itself is kept only for
    the current step.  The same seed yields the same paths on a given
    backend; with snapshot_path set, the node values are appended as raw
    little-endian float64 rows at step 0 and then after every
    snapshot_every steps (default n // 100).
    """
    grid = config.grid
    if not probes:
        raise ConfigError("need at least one probe")
    for p in probes:
        lo, hi = p.support
        if lo < 0.0 or hi > 1.0:
            raise ProbeOutsideDomain(
                f"probe support [{lo:g}, {hi:g}] leaves the unit interval"
            )
    op = build_operator(config.coeffs, grid)
    sub, diag, sup = implicit_system(op, grid.dt)
    fact = thomas_factorize(sub, diag, sup)
    yi = grid.interior
    sig = _eval_on(config.coeffs.sigma, yi)
    if not np.all(np.isfinite(sig)) or np.any(sig < 0.0):
        raise ConfigError("sigma must be finite and non-negative on the grid")
    noisy = bool(np.any(sig > 0.0))
    s = sig * math.sqrt(grid.dt / grid.h)
    W = np.empty((2 * len(probes), grid.m - 1))
    for i, p in enumerate(probes):
        W[2 * i] = p.eval(yi)
        W[2 * i + 1] = p.laplacian(yi)
    x = initial_field(config.x0_initial, grid)[1:-1].copy()
    out = np.empty((2 * len(probes), grid.n + 1))
    out[:, 0] = grid.h * (W @ x)
    seed = int(config.seed) & 0xFFFFFFFF
    if backend == "auto":
        backend = "numba" if HAVE_NUMBA else "numpy"
    if backend == "numba":
        if not HAVE_NUMBA:
            raise ConfigError("numba backend requested but numba is missing")
        _seed_numba(seed)
        def stepper(col0, n_steps):
            _step_numba(n_steps, x, s, fact.sub, fact.cp, fact.inv_piv, W,
                        grid.h, out, col0, noisy)
    elif backend == "numpy":
        rs = np.random.RandomState(seed)
        ab = np.zeros((3, grid.m - 1))
        ab[0, 1:] = sup[:-1]
        ab[1, :] = diag
        ab[2, :-1] = sub[1:]
        def stepper(col0, n_steps):
            _step_numpy(rs, n_steps, x, s, ab, W, grid.h, out, col0, noisy)
    else:
        raise ConfigError(f"unknown backend {backend!r}")
    if snapshot_path is None:
        stepper(0, grid.n)
    else:
        every = snapshot_every if snapshot_every else max(1, grid.n // 100)
        with open(snapshot_path, "wb") as handle:
            _snapshot_row(handle, grid, x)
            done = 0
            while done < grid.n:
                nb = min(every, grid.n - done)
                stepper(done, nb)
                done += nb
                _snapshot_row(handle, grid, x)
    paths = []
    for i, p in enumerate(probes):
        paths.append(MeasurementPath(
            dt=grid.dt,
            x=out[2 * i].copy(),
            x_lap=out[2 * i + 1].copy(),
            meta={
                "delta": p.delta,
                "x0": p.x0,
                "kernel": p.kernel.name,
                "seed": seed,
                "backend": backend,
                "solver": "fd",
                "m": grid.m,
                "n": grid.n,
            },
        ))
    return paths


def _sine_coefficients(values_or_fn, grid, n_modes):
    """Coefficients <X0, sqrt(2) sin(k pi x)> of the initial condition.

    Callables are integrated by composite Gauss-Legendre; tabulated node
    values use the h-weighted sum, which is exact for the discrete modes.
    """
    k = np.arange(1, n_modes + 1)
    if callable(values_or_fn):
        from .quadrature import panel_nodes

        xq, wq = panel_nodes(0.0, 1.0, max(64, n_modes + 1))
        vals = np.asarray(values_or_fn(xq), dtype=float)
        return np.sqrt(2.0) * np.sin(np.pi * np.outer(k, xq)) @ (vals * wq)
    nodes = grid.nodes
    vals = np.asarray(values_or_fn, dtype=float)
    return grid.h * (np.sqrt(2.0) * np.sin(np.pi * np.outer(k, nodes)) @ vals)


def deterministic_heat_check(config, probe, times, backend="auto"):
    """Noise-free propagation versus the exact heat semigroup.

    Requires sigma = 0, constant theta and no lower-order terms.  Returns
    an array with rows (t snapped to the grid, finite-difference probe
    value, spectral probe value sum_k exp(-theta pi^2 k^2 t) c_k g_k).
    """
    from .spectral_oracle import probe_coefficients

    grid = config.grid
    yi = grid.interior
    th = _eval_on(config.coeffs.theta, grid.nodes)
    sig = _eval_on(config.coeffs.sigma, yi)
    av = _eval_on(config.coeffs.a, yi)
    bv = _eval_on(config.coeffs.b, yi)
    theta0 = float(th[0])
    if np.ptp(th) > 1e-12 * max(1.0, abs(theta0)):
        raise ConfigError("heat check needs constant theta")
    if np.any(sig != 0.0) or np.any(av != 0.0) or np.any(bv != 0.0):
        raise ConfigError("heat check needs sigma = 0 and a = b = 0")
    path = simulate(config, [probe], backend=backend)[0]
    times = np.atleast_1d(np.asarray(times, dtype=float))
    idx = np.rint(times / grid.dt).astype(int)
    if np.any(idx < 0) or np.any(idx > grid.n):
        raise ConfigError("requested times leave the simulated horizon")
    t_snap = idx * grid.dt
    pos = t_snap[t_snap > 0.0]
    n_modes = 256
    if len(pos):
        decay_cut = math.sqrt(
            math.log(1e16) / (theta0 * np.pi**2 * float(pos.min()))
        )
        n_modes = max(16, min(2048, int(math.ceil(decay_cut)) + 8, grid.m - 1))
        if 0.0 in t_snap:
            n_modes = max(n_modes, min(256, grid.m - 1))
    x0 = config.x0_initial
    source = x0 if callable(x0) or isinstance(x0, TwoPeaks) else initial_field(x0, grid)
    if isinstance(source, TwoPeaks):
        source = source.eval
    c = _sine_coefficients(source, grid, n_modes)
    g = probe_coefficients(probe, n_modes)
    lam = theta0 * (np.pi * np.arange(1, n_modes + 1)) ** 2
    spectral = np.exp(-np.outer(t_snap, lam)) @ (c * g)
    return np.column_stack([t_snap, path.x[idx], spectral])
