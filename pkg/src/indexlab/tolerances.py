"""Central table of numerical tolerances and experiment thresholds.

Every tolerance used by the library is looked up here, so a single
override (for example from the command line) changes it everywhere.
"""

from __future__ import annotations

from contextlib import contextmanager

DEFAULTS = {
    # linear algebra
    "hermitian": 1e-12,  # relative ||M - M*|| accepted as Hermitian
    "reconstruction": 1e-10,
    "unitarity": 1e-10,
    "jacobi_offdiag": 1e-14,
    "jacobi_max_sweeps": 60,
    # K-theory
    "rank_tol": 1e-6,
    "projection": 1e-8,
    # Clifford / symbols
    "clifford": 1e-12,
    "symbol_selfadjoint": 1e-10,
    "coefficient_selfadjoint": 1e-8,
    # Bott operator
    "chirality": 1e-3,
    "localizer_low": 0.2,
    "localizer_high": 0.8,
    "gaussian_boundary": 1e-7,
    # quantization
    "c0_decay": 1e-4,  # boundary-shell sup of a C_0 symbol
    "resolved_fraction": 0.5,  # |k| < fraction * N/2 is the resolved band
    "gibbs": 1e-10,
    # experiment thresholds
    "decay_threshold": 0.05,
    "torus_quant_threshold": 0.1,
    "diffeo_threshold": 0.1,
    "freeze_threshold": 0.1,
    "slope_low": -1.15,
    "slope_high": -0.85,
    "homotopy_zero": 1e-8,
    "isometry": 1e-8,
    "bott_eig": 1e-6,
    "gap_tol_torus": 0.05,
    "t_small_factor": 0.1,
}

_current = dict(DEFAULTS)


def get(key: str) -> float:
    return _current[key]


def set_tol(key: str, value: float) -> None:
    if key not in DEFAULTS:
        raise KeyError(f"unknown tolerance {key!r}")
    _current[key] = type(DEFAULTS[key])(value)


def reset() -> None:
    _current.clear()
    _current.update(DEFAULTS)


def snapshot() -> dict:
    return dict(_current)


@contextmanager
def overridden(**values):
    old = dict(_current)
    try:
        for k, v in values.items():
            set_tol(k, v)
        yield
    finally:
        _current.clear()
        _current.update(old)


def parse_override(text: str) -> tuple[str, float]:
    """Parse ``KEY=VAL`` as given on the command line."""
    if "=" not in text:
        raise ValueError(f"expected KEY=VAL, got {text!r}")
    key, val = text.split("=", 1)
    key = key.strip()
    if key not in DEFAULTS:
        raise KeyError(f"unknown tolerance {key!r}")
    return key, float(val)
