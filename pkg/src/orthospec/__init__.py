"""Orthogeodesics between convex bodies in flat tori, their zeta functions,
singular supports and the decay of geodesic-flow correlations."""
from .bodies import (Ball, Ellipsoid, MinkowskiSum, Point, SupportSeries2D, body_from_dict,
                     intrinsic_volumes, minkowski_difference, minkowski_sum, steiner_coefficients,
                     steiner_volume)
from .correlations import (Observable, anisotropic_norm, correlation, invariant_term,
                           laplace_transform, mellin_transform, oscillatory_integral, projectors,
                           stationary_phase_leading)
from .errors import (AccuracyError, ConfigError, DomainError, InvalidBodyError, OrthospecError,
                     PoleError, PreconditionError, RangeError, ScaleError, SingularityError,
                     SolverError)
from .orthospectrum import (LengthSpectrum, TorusFourierSeries, common_perpendicular,
                            counting_function, length_spectrum, steiner_count)
from .spectral import (AtomicMeasure, atom_extract, dirac_comb, guinand_meyer_measure,
                       singularity_scan, windowed_fourier)
from .zeta import (ConvexZeta, convex_zeta_continued, convex_zeta_direct, epstein_zeta,
                   residues)

__version__ = "0.1.0"
