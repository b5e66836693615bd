"""Local measurements and diffusivity estimation for a stochastic heat
equation on the unit interval.

Modules
-------
kernels          compactly supported probe kernels and rescaling
quadrature       Gauss-Legendre panel quadrature
measurements     measurement paths and discrete stochastic integrals
spectral_oracle  exact sine-basis Gaussian reference model
estimators       augmented and proxy likelihood estimators
asymptotics      bias/variance constants and confidence intervals
fd_solver        semi-implicit finite-difference simulator
harness          experiment configs, studies and CSV output
"""

__version__ = "0.1.0"
