"""Composite Gauss-Legendre quadrature with dyadic panel refinement.

All spatial integrals in the package go through `integrate`: 16-point
Gauss-Legendre panels, panel count doubled until two successive levels agree
to the requested relative tolerance.  The integrand must accept a numpy array
and return an array of the same shape.
"""

import numpy as np

from .errors import NonConvergence

GL_POINTS = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_POINTS)


def panel_nodes(a, b, panels):
    """Nodes and weights of a composite Gauss-Legendre rule on [a, b]."""
    edges = np.linspace(a, b, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    weights = (half[:, None] * _GL_W[None, :]).ravel()
    return nodes, weights


def integrate(f, a, b, tol=1e-10, initial_panels=8, max_panels=1 << 15):
    """Integrate f over [a, b] to relative tolerance `tol`.

    Doubles the panel count until two successive composite rules agree to
    tol, measured against the larger of the estimate's magnitude and a
    small fraction of int |f| (so integrals that cancel to zero still
    converge).  Raises NonConvergence past `max_panels`.
    """
    if b <= a:
        raise ValueError(f"empty integration interval [{a}, {b}]")
    panels = initial_panels
    nodes, weights = panel_nodes(a, b, panels)
    prev = float(np.dot(f(nodes), weights))
    while panels <= max_panels:
        panels *= 2
        nodes, weights = panel_nodes(a, b, panels)
        vals = f(nodes)
        cur = float(np.dot(vals, weights))
        mass = float(np.dot(np.abs(vals), weights))
        bound = tol * max(abs(cur), abs(prev), 1e-3 * mass) + 1e-300
        if abs(cur - prev) <= bound:
            return cur
        prev = cur
    raise NonConvergence(
        f"quadrature on [{a}, {b}] did not reach rel tol {tol:g} "
        f"within {max_panels} panels"
    )


def integrate_2d(f, a, b, c, d, panels_x=64, panels_y=64):
    """Tensor-product Gauss-Legendre rule for f(t, s) on [a,b] x [c,d].

    Fixed panel counts; the caller doubles and compares if adaptivity is
    needed.  f must broadcast over a (t, s) meshgrid.
    """
    nx, wx = panel_nodes(a, b, panels_x)
    ny, wy = panel_nodes(c, d, panels_y)
    vals = f(nx[:, None], ny[None, :])
    return float(wx @ vals @ wy)
