"""Checks for equilibrium functions on Riemannian manifolds.

The heavy lifting happens in the compiled ``_equipart`` extension; this
package re-exports it.
"""

from ._equipart import (
    CheckReport,
    CriticalPointError,
    DomainError,
    Error,
    GeometryError,
    Manifest,
    ManifestError,
    Manifold,
    ParseError,
    PreconditionError,
    SamplingError,
    ScalarField,
    SubCheck,
    Verdict,
    VectorField,
    WarpedPlane,
    __version__,
    check_equilibrium,
    check_separability,
    check_symmetry,
    first_variation_check,
    grad_norm_sq,
    killing_residual,
    laplacian,
    lie_bracket,
    load_manifest,
    parse_manifest,
    ritore_criterion,
    run_task,
    second_variation_mode,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
