"""Threshold-triggered (state-dependent impulsive) control of a mosquito/bird West Nile virus model."""

__version__ = "0.1.0"

from .errors import (ConfigError, IntegrationError, NoBracketError, NoHitError, NumericalError,
                     SingularKappaError, WNVError)
from .model import (ControlPolicy, EquilibriumSet, Parameters, Region, RegimeReport, State,
                    classify_region, dulac_divergence, equilibria, jacobian_eigenvalues,
                    nullcline_markers, vector_field)
from .integrator import (FullState3D, ImpulseEvent, Trajectory, TrajectorySegment, apply_impulse,
                         integrate_segment, logistic_closed_form, simulate, simulate_full_3d)
from .orbits import (MapIteration, PeriodicOrbit, PoincareSample, StabilityReport, find_order1,
                     find_order2, floquet_multiplier, iterate_map, poincare_map)
