"""Longitudinal mediation engine on register-style panels.

Submodules: synthdata (cohort generator with known ground truth), geo
(individualized neighborhoods and the disadvantage score), glm (weighted
fitters), weights (stabilized IPW families), effects (MSMs, interventional
contrasts, bootstrap), oracle (exact discrete evaluation), sensitivity
(unmeasured-confounder simulations), cli (pipeline orchestration).
"""

__version__ = "0.1.0"

from .effects import interventional_effects  # noqa: F401
