"""NumPy reference implementation of the finite-volume transport kernel.

Kept in exact arithmetic lockstep with the compiled version: the same
operations in the same order per cell, so the two produce bit-identical
results and either can back the solver.
"""

import numpy as np


def upwind_step(f, dx, edge_vel, mu, influx, dt, out):
    """Advance cell averages one step of upwind advection with decay.

    Parameters
    ----------
    f : (n,) cell-average density before the step.
    dx : (n,) cell widths.
    edge_vel : (n+1,) advection speed at each cell edge (nonnegative).
    mu : (n,) decay rate per cell.
    influx : number flux entering through the left boundary edge.
    dt : time step (caller enforces the stability bound).
    out : (n,) preallocated output array; may alias ``f``.

    Returns
    -------
    float
        Number flux leaving through the right boundary edge, for outflow
        accounting by the caller.
    """
    flux = np.empty(len(f) + 1)
    flux[0] = influx
    np.multiply(edge_vel[1:], f, out=flux[1:])
    outflow = float(flux[-1])
    out[:] = f - (dt / dx) * (flux[1:] - flux[:-1]) - (dt * mu) * f
    return outflow
