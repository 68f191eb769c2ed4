"""Coherent-state quantization on a two-dimensional phase space."""

__version__ = "0.1.0"

from .config import GlobalConfig
from .errors import (ChartMismatch, DiscretizationWarning, DomainError, FiducialMismatch,
                     InvalidParameter, InvalidSpin, MetriqError, NotHermitian, NumericalFailure,
                     PoleProximity, TailTruncation, UnsupportedChart, UnsupportedObservable,
                     ValidationError, VarianceBlowup)
from .phase import (CARTESIAN, POLAR, ROTATED_45, Chart, ClassicalObservable, PhaseSpacePoint,
                    get_chart, harmonic, observable_from_json, transport)
from .fock import FockOperator, FockVector, build_kinematics, polynomial_operator, spectrum
from .coherent import (CoherentState, FiducialSpec, PhaseSpaceQuadrature, coherent_state,
                       default_quadrature, kernel, overlap, resolution_of_unity_defect,
                       upper_symbol)
from .toeplitz import admissibility, toeplitz_quantize, toeplitz_spectrum, weyl_symbol
from .geometry import geometry_report, metric, one_form, symplectic_form
from .semiclassical import bohr_sommerfeld, bohr_sommerfeld_levels, orbit_area
from .propagators import (LatticeConfig, PropagatorEstimate, WienerConfig, exact_propagator,
                          fresnel_toy, lattice_weyl_propagator, richardson, wiener_propagator)
from .spin import SpinSpec, build_spin, spin_coherent, spin_induced_metric
from .verify import verify_suite
