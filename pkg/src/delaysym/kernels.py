"""Hot integration kernel.

A classical 4th-order one-step scheme for a single-delay system
``dx/dt = f(x(t), x(t-D), u)`` under a constant input, marched on a step
``dt`` that divides both the history grid spacing and the horizon.  The
delayed argument is read

* from the computed trajectory: exactly at accepted points, and by cubic
  Hermite interpolation (values + stored derivatives) at step midpoints —
  interior stage times only ever fall on accepted points or midpoints;
* from the initial history segment: by 4-point polynomial interpolation
  on its uniform grid (exact at the grid nodes).

Hermite midpoint reads keep the scheme at full 4th order; rounding the
delayed stage argument to the grid would cap it at 2nd.

The same source is compiled two ways: ``numba`` (default when importable)
and plain ``numpy``.  Select with the environment variable
``DELAYSYM_BACKEND`` = ``auto`` | ``numba`` | ``numpy``.
"""

import os

import numpy as np

RHS_LINEAR = 0
RHS_TANH = 1
RHS_POLY = 2

_STATUS_OK = 0
_STATUS_ESCAPE = 1
_STATUS_NONFINITE = 2


def _rk4_dde_impl(hist, k_sub, dt, steps, kind, a0, a1, bmat,
                  pcoef, pexpo, pout, u, lo, hi):
    """March ``steps`` RK4 steps of size ``dt`` from t=0.

    hist   : (H+1, n) initial history samples on [-D, 0], spacing k_sub*dt
    k_sub  : history grid spacing in units of dt
    kind   : rhs selector; 0 linear, 1 tanh-saturated, 2 polynomial
    a0,a1  : (n, n) matrices on x(t) and the delayed state
    bmat   : (n, m) input matrix
    pcoef/pexpo/pout : polynomial terms (coef, exponents over
             [x(t), x(t-D), u], output row)
    lo, hi : (n,) embedding box; leaving it aborts the march

    Returns (traj, fder, status, stop_index): trajectory and rhs values at
    the accepted points, status 0=ok 1=escape 2=non-finite.
    """
    H = hist.shape[0] - 1
    n = hist.shape[1]
    m = u.shape[0]
    m2 = 2 * H * k_sub  # delay in half-step units

    traj = np.empty((steps + 1, n))
    fder = np.empty((steps + 1, n))
    for i in range(n):
        traj[0, i] = hist[H, i]

    dvals = np.empty((3, n))
    ys = np.empty(n)
    knew = np.empty(n)
    ksum = np.empty(n)
    kprev = np.empty(n)
    z = np.empty(2 * n + m)

    status = _STATUS_OK
    stop = steps

    for j in range(steps + 1):
        # delayed arguments for the three distinct stage times of this step
        for sidx in range(3):
            d2 = 2 * j + sidx - m2
            if d2 >= 0:
                if d2 % 2 == 0:
                    jj = d2 // 2
                    for i in range(n):
                        dvals[sidx, i] = traj[jj, i]
                else:
                    jj = (d2 - 1) // 2
                    for i in range(n):
                        dvals[sidx, i] = (0.5 * (traj[jj, i] + traj[jj + 1, i])
                                          + 0.125 * dt * (fder[jj, i] - fder[jj + 1, i]))
            else:
                pos = H + d2 / (2.0 * k_sub)
                inear = int(round(pos))
                if abs(pos - inear) < 1e-9:
                    for i in range(n):
                        dvals[sidx, i] = hist[inear, i]
                elif H >= 3:
                    base = int(np.floor(pos)) - 1
                    if base < 0:
                        base = 0
                    if base > H - 3:
                        base = H - 3
                    xl = pos - base
                    for i in range(n):
                        acc = 0.0
                        for kk in range(4):
                            w = 1.0
                            for jl in range(4):
                                if jl != kk:
                                    w *= (xl - jl) / (kk - jl)
                            acc += w * hist[base + kk, i]
                        dvals[sidx, i] = acc
                else:
                    i0 = int(np.floor(pos))
                    if i0 < 0:
                        i0 = 0
                    if i0 > H - 1:
                        i0 = H - 1
                    fr = pos - i0
                    for i in range(n):
                        dvals[sidx, i] = (1.0 - fr) * hist[i0, i] + fr * hist[i0 + 1, i]

        # four stages; stage weights 1,2,2,1 and abscissae 0, 1/2, 1/2, 1
        for i in range(n):
            ksum[i] = 0.0
            kprev[i] = 0.0
        for s in range(4):
            if s == 0:
                astage = 0.0
            elif s == 3:
                astage = 1.0
            else:
                astage = 0.5
            if s == 0:
                dsel = 0
            elif s == 3:
                dsel = 2
            else:
                dsel = 1
            for i in range(n):
                ys[i] = traj[j, i] + dt * astage * kprev[i]

            if kind == RHS_POLY:
                for i in range(n):
                    z[i] = ys[i]
                    z[n + i] = dvals[dsel, i]
                for i in range(m):
                    z[2 * n + i] = u[i]
                for i in range(n):
                    knew[i] = 0.0
                for t in range(pcoef.shape[0]):
                    p = pcoef[t]
                    for v in range(2 * n + m):
                        e = pexpo[t, v]
                        for _ in range(e):
                            p *= z[v]
                    knew[pout[t]] += p
            else:
                for i in range(n):
                    acc = 0.0
                    for c in range(n):
                        acc += a0[i, c] * ys[c]
                    if kind == RHS_TANH:
                        for c in range(n):
                            acc += a1[i, c] * np.tanh(dvals[dsel, c])
                    else:
                        for c in range(n):
                            acc += a1[i, c] * dvals[dsel, c]
                    for c in range(m):
                        acc += bmat[i, c] * u[c]
                    knew[i] = acc

            if s == 0:
                for i in range(n):
                    fder[j, i] = knew[i]
                if j == steps:
                    break
            wt = 2.0 if (s == 1 or s == 2) else 1.0
            for i in range(n):
                ksum[i] += wt * knew[i]
                kprev[i] = knew[i]

        if j == steps:
            break

        ok = True
        for i in range(n):
            xi = traj[j, i] + dt / 6.0 * ksum[i]
            traj[j + 1, i] = xi
            if not np.isfinite(xi):
                status = _STATUS_NONFINITE
                ok = False
            elif xi < lo[i] or xi > hi[i]:
                status = _STATUS_ESCAPE
                ok = False
        if not ok:
            stop = j + 1
            break

    return traj, fder, status, stop


rk4_dde_numpy = _rk4_dde_impl

try:
    import numba

    rk4_dde_numba = numba.njit(cache=True, nogil=True)(_rk4_dde_impl)
    _HAVE_NUMBA = True
except ImportError:
    rk4_dde_numba = None
    _HAVE_NUMBA = False


def _pick_backend():
    choice = os.environ.get("DELAYSYM_BACKEND", "auto").strip().lower()
    if choice in ("", "auto"):
        return "numba" if _HAVE_NUMBA else "numpy"
    if choice == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("DELAYSYM_BACKEND=numba but numba is not importable")
        return "numba"
    if choice == "numpy":
        return "numpy"
    raise RuntimeError(f"unknown DELAYSYM_BACKEND value: {choice!r}")


_ACTIVE = _pick_backend()


def backend():
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return _ACTIVE


def rk4_dde(hist, k_sub, dt, steps, kind, a0, a1, bmat, pcoef, pexpo, pout,
            u, lo, hi, force_backend=None):
    """Dispatch to the active (or forced) kernel backend."""
    which = force_backend or _ACTIVE
    fn = rk4_dde_numba if which == "numba" else rk4_dde_numpy
    return fn(hist, k_sub, dt, steps, kind, a0, a1, bmat,
              pcoef, pexpo, pout, u, lo, hi)
