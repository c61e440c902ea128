"""Central table of numerical tolerances.

=====================  ========  ==============================================
name                   default   used by
=====================  ========  ==============================================
singular_rel           1e-10     interior-block singularity (relative to the
                                 largest eigenvalue / spectral radius)
markov_rel             1e-10     off-diagonal sign and symmetry checks
identity_rel           1e-10     verification of trace / resolvent identities
simple_gap_rel         1e-8      simplicity of the lowest eigenvalue
positive_rel           1e-12     strict positivity of vectors (``h > 0``)
recurrent_abs          1e-9      row sums of an h-transformed generator
near_threshold_rel     1e-6      warning band around a singular interior block
semigroup_abs          1e-8      semigroup conjugation check
mc_sigmas              5.0       Monte Carlo acceptance radius (standard errors)
=====================  ========  ==============================================

Values may be overridden per run with ``--tol name=value`` or ``DN_TOL_<NAME>``.
"""

import os

DEFAULTS = {
    "singular_rel": 1e-10,
    "markov_rel": 1e-10,
    "identity_rel": 1e-10,
    "simple_gap_rel": 1e-8,
    "positive_rel": 1e-12,
    "recurrent_abs": 1e-9,
    "near_threshold_rel": 1e-6,
    "semigroup_abs": 1e-8,
    "mc_sigmas": 5.0,
}


def resolve(overrides=None, environ=None):
    """Merge defaults, ``DN_TOL_*`` environment variables and explicit overrides."""
    environ = os.environ if environ is None else environ
    tol = dict(DEFAULTS)
    for name in DEFAULTS:
        key = "DN_TOL_" + name.upper()
        if key in environ:
            tol[name] = float(environ[key])
    for name, value in (overrides or {}).items():
        if name not in DEFAULTS:
            raise KeyError(f"unknown tolerance {name!r}")
        tol[name] = float(value)
    for name, value in tol.items():
        if not value > 0:
            raise ValueError(f"tolerance {name} must be positive, got {value}")
    return tol
