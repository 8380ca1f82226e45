"""Spectra, exceptional points, transport phases, dynamics and fits for the
three-state lossy model. Thin wrapper over the C++ core."""

import json as _json

from ._core import (  # noqa: F401
    Degenerate,
    IllConditioned,
    NoBracket,
    TrackingLost,
    __version__,
    berry_phase,
    discriminant,
    eigensystem,
    evolve,
    extract_alpha,
    fit_two_rate,
    hamiltonian,
    locate_ep2,
    locate_ex,
    run_cli,
    scaling_exponents,
    solve_cubic,
    sweep_spectrum,
    synth_dataset,
)
from ._core import schema as _schema


def schema():
    """Column documentation plus the metadata JSON schema, as a dict."""
    return _json.loads(_schema())
