"""Numerical laboratory for 1-D lattice Schrodinger operators with
site-dependent random potentials.

The package splits into:

* :mod:`anderson_lab.measures` - single-site laws, perturbing density
  sequences, product laws, window sampling, Radon-Nikodym products, and the
  decay-condition diagnostics;
* :mod:`anderson_lab.transfer` - overflow-safe transfer-matrix products and
  truncated-determinant recurrences;
* :mod:`anderson_lab.spectral` - finite boxes, the Sturm-bisection
  eigensolver, Green's functions, and regularity classification;
* :mod:`anderson_lab.estimators` - Monte Carlo growth rates, tail curves,
  the change-of-measure lifting bound, and deterministic envelope scans;
* :mod:`anderson_lab.experiments` - seeded end-to-end studies with
  reproducibility manifests;
* :mod:`anderson_lab.cli` - the ``anderson-lab`` command-line front end.
"""

__version__ = "0.1.0"

from .rng import RngStream
from .measures import (
    AtomReweight,
    BumpSchedule,
    FiniteAtoms,
    Identity,
    ParetoTail,
    PotentialWindow,
    ProductLaw,
    UniformInterval,
    condition_report,
    radon_nikodym_product,
    sample_window,
    sample_windows,
)
from .transfer import ScaledMatrix, SignedLog, det_recurrence, one_step, product
from .spectral import TridiagonalBox, classify_regularity, correlator, eigenpairs, eigenvalues, green
from .estimators import (
    craig_simon_scan,
    deviation_classify,
    lde_curve,
    lift_check,
    lyapunov_closed_form,
    lyapunov_mc,
    submean_check,
)
from .experiments import (
    RunManifest,
    Scenario,
    edge_bound_census,
    nu_inf,
    persist,
    run_localization,
    singularity_census,
)

__all__ = [
    "__version__",
    "RngStream",
    "AtomReweight",
    "BumpSchedule",
    "FiniteAtoms",
    "Identity",
    "ParetoTail",
    "PotentialWindow",
    "ProductLaw",
    "UniformInterval",
    "condition_report",
    "radon_nikodym_product",
    "sample_window",
    "sample_windows",
    "ScaledMatrix",
    "SignedLog",
    "det_recurrence",
    "one_step",
    "product",
    "TridiagonalBox",
    "classify_regularity",
    "correlator",
    "eigenpairs",
    "eigenvalues",
    "green",
    "craig_simon_scan",
    "deviation_classify",
    "lde_curve",
    "lift_check",
    "lyapunov_closed_form",
    "lyapunov_mc",
    "submean_check",
    "RunManifest",
    "Scenario",
    "edge_bound_census",
    "nu_inf",
    "persist",
    "run_localization",
    "singularity_census",
]
