"""Planar three-body toolkit for co-orbital (1:1) resonance: horseshoe and tadpole orbits."""

from .core import (BodyState, CollisionError, DivergentPeriodError, HorseshoeError,
                   InfiniteDriftError, InvalidInputError, NumericalError, SingularityError,
                   SystemState, UnboundOrbitError, UnitSystem, kepler_period, mean_motion,
                   normalize, synodic_catchup_time)
from .integrator import IntegratorConfig, Scheme, TrajectoryRecord, propagate, step

__version__ = "0.1.0"
