"""Local measurement paths and the discrete integrals built from them.

A measurement path holds the two scalar time series obtained by pairing a
field with a rescaled probe and with its Laplacian on a uniform time grid:

    x[k]     = <X(t_k), K_{delta,x0}>
    x_lap[k] = <X(t_k), Delta K_{delta,x0}>

Stochastic integrals are discretised with left-point (Ito) sums and time
integrals with left Riemann sums, matching the observation scheme t_k = k dt.
"""

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SchemaMismatch

CSV_TAG = "localest-measurement v1"


def time_integral(values, dt):
    """Left Riemann sum dt * sum_{k<n} f(t_k) for samples on t_k = k dt."""
    values = np.asarray(values, dtype=float)
    return float(dt * values[:-1].sum())


def ito_integral(integrand, integrator):
    """Left-point sum sum_k f(t_k) (g(t_{k+1}) - g(t_k))."""
    f = np.asarray(integrand, dtype=float)
    g = np.asarray(integrator, dtype=float)
    if f.shape != g.shape:
        raise ValueError("integrand and integrator must share a time grid")
    return float(np.dot(f[:-1], np.diff(g)))


def quadratic_variation(values):
    """Realised quadratic variation sum_k (x_{k+1} - x_k)^2."""
    d = np.diff(np.asarray(values, dtype=float))
    return float(np.dot(d, d))


def probe_inner_product(field_values, h, probe_values):
    """h-weighted inner product of interior grid samples with a probe.

    Both arrays sample the interior nodes of a uniform grid with spacing h;
    homogeneous boundary values make the rectangle rule the trapezoid rule.
    """
    return float(h * np.dot(field_values, probe_values))


@dataclass
class MeasurementPath:
    """Uniformly sampled probe and Laplacian-probe series with metadata."""

    dt: float
    x: np.ndarray
    x_lap: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.x_lap = np.asarray(self.x_lap, dtype=float)
        if self.x.shape != self.x_lap.shape or self.x.ndim != 1:
            raise ConfigError("x and x_lap must be 1-d arrays of equal length")
        if self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")

    @property
    def n_steps(self):
        return len(self.x) - 1

    @property
    def horizon(self):
        return self.dt * self.n_steps

    @property
    def times(self):
        return self.dt * np.arange(len(self.x))

    def downsample(self, stride):
        """Every stride-th sample; the coarse path of the same observation."""
        if self.n_steps % stride != 0:
            raise ConfigError(
                f"stride {stride} does not divide {self.n_steps} steps"
            )
        return MeasurementPath(
            dt=self.dt * stride,
            x=self.x[::stride].copy(),
            x_lap=self.x_lap[::stride].copy(),
            meta=dict(self.meta),
        )

    def to_csv(self, path):
        buf = io.StringIO()
        buf.write(f"# {CSV_TAG}\n")
        buf.write(f"# dt={float(self.dt)!r}\n")
        for key in sorted(self.meta):
            buf.write(f"# {key}={_format_meta(self.meta[key])}\n")
        buf.write("t,x,x_lap\n")
        t = self.times
        for k in range(len(self.x)):
            buf.write(
                f"{float(t[k])!r},{float(self.x[k])!r},{float(self.x_lap[k])!r}\n"
            )
        with open(path, "w") as fh:
            fh.write(buf.getvalue())

    @classmethod
    def from_csv(cls, path):
        meta = {}
        rows = []
        header_seen = False
        with open(path) as fh:
            first = fh.readline().strip()
            if first != f"# {CSV_TAG}":
                raise SchemaMismatch(f"{path} is not a {CSV_TAG} file")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    key, _, val = line[1:].strip().partition("=")
                    meta[key] = _parse_meta(val)
                    continue
                if not header_seen:
                    if line != "t,x,x_lap":
                        raise SchemaMismatch(
                            f"{path}: expected column header 't,x,x_lap', got {line!r}"
                        )
                    header_seen = True
                    continue
                rows.append([float(v) for v in line.split(",")])
        if not header_seen or not rows:
            raise SchemaMismatch(f"{path}: no data rows")
        data = np.array(rows)
        dt = meta.pop("dt", None)
        if dt is None:
            raise SchemaMismatch(f"{path}: missing dt metadata")
        return cls(dt=dt, x=data[:, 1], x_lap=data[:, 2], meta=meta)


def _format_meta(value):
    if isinstance(value, str):
        return f"{value!r}"
    if isinstance(value, (bool, int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _parse_meta(val):
    val = val.strip()
    if val.startswith("'") and val.endswith("'"):
        return val[1:-1]
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val
