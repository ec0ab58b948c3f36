"""lambdabar: the normalized first Laplace eigenvalue on flat tori and Klein
bottles, at desk scale.

Closed-form flat spectra, a Fourier-Galerkin solver for conformal densities
(including conical ones), the Sturm-Liouville pipeline for the extremal
Klein-bottle metric of revolution, Mobius renormalization machinery on round
spheres, Teichmueller-distance certificates, and in-class maximization of
lambda1 * area.
"""

from .spectrum import (
    Spectrum,
    CeilingViolation,
    TORUS_CEILING,
    KLEIN_CEILING,
)
from .lattices import (
    Lattice,
    TorusModulus,
    KleinModulus,
    DegenerateLatticeError,
    reduce_to_fundamental_domain,
    dual_lattice,
    flat_torus_spectrum,
    flat_klein_spectrum,
    fundamental_tone_sweep,
    equilateral_modulus,
    square_modulus,
)
from .elliptic import (
    complete_E,
    complete_E_quadrature,
    WeierstrassP,
    sphere_pullback_factor,
)
from .galerkin import (
    ConformalFactor,
    GalerkinProblem,
    AliasingError,
    assemble,
    eigenvalues,
    density_stability_test,
    weyl_sanity,
)
from .revolution import (
    RevolutionMetric,
    SturmLiouvilleProblem,
    maximal_klein_metric,
    separate,
    klein_g0_lambda1bar,
    klein_g0_target,
)
from .mobius import (
    MobiusMap,
    SphereMap,
    weierstrass_sphere_map,
    clifford_torus_map,
    center_of_mass,
    hersch_center,
    conformal_area,
    area_monotonicity_trace,
    capacity_profile,
    mobius_degeneration_study,
)
from .teich import (
    dilatation,
    teich_distance_tori,
    teich_distance_klein,
    continuity_certificate,
    TeichCertificate,
)
from .maximize import (
    DensityParameterization,
    OptimizationReport,
    maximize_in_class,
    degeneration_sweep,
    eigenvalue_gradient,
)

__version__ = "0.1.0"
