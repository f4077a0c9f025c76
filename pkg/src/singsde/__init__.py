"""Analysis and simulation of scalar SDEs with a singular point.

Modules: ``model`` (parameterization and assumption checks), ``classify``
(regime decision tables), ``scale`` (numerical Feller boundary test),
``density`` (stationary densities), ``ldp`` (quasipotential), ``sim``
(Euler-Maruyama particle engine) and ``cli``.
"""

__version__ = "0.1.0"
