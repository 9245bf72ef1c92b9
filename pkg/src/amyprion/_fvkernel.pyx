# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled finite-volume transport kernel.

Mirrors the arithmetic of the NumPy fallback exactly (same per-cell
operation order) so both paths are interchangeable.
"""

import numpy as np


def upwind_step(
    double[::1] f,
    double[::1] dx,
    double[::1] edge_vel,
    double[::1] mu,
    double influx,
    double dt,
    double[::1] out,
):
    """Advance cell averages one upwind advection-decay step.

    Same contract as the fallback: fluxes use the left cell's state, the
    left boundary receives ``influx``, and the right boundary flux is
    returned for outflow accounting. ``out`` may alias ``f``.
    """
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t i
    cdef double[::1] flux = np.empty(n + 1)
    cdef double outflow

    flux[0] = influx
    for i in range(1, n + 1):
        flux[i] = edge_vel[i] * f[i - 1]
    outflow = flux[n]

    for i in range(n):
        out[i] = f[i] - (dt / dx[i]) * (flux[i + 1] - flux[i]) - (dt * mu[i]) * f[i]
    return outflow
