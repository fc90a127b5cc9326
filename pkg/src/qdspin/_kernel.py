"""Compiled Dormand-Prince 5(4) integrator for the matrix-form master equation.

Everything in here works on packed arrays prepared by :mod:`qdspin.lindblad`.
Time coefficients are rows of ``COEF_FIELDS``:

    value(t) = amp * exp(-(t - center)^2 / (2 width^2)) * exp(-1j * carrier * t)

for ``lo <= t <= hi`` and exactly zero outside; ``width == 0`` drops the
Gaussian factor. A collapse channel ``m`` owns coefficient rows
``c_start[m]:c_start[m+1]``; its amplitude is their sum and its rate the
squared modulus of that sum.

``packed`` is the tuple built by ``LindbladSystem.packed``: the static
Hamiltonian, then sparse (ptr, idx, val) triples for the driven terms, the
collapse operators and their C^H C products, plus the coefficient rows.
"""

import numpy as np
from numba import njit

COEF_FIELDS = ("amp_re", "amp_im", "center", "width", "carrier", "lo", "hi")

STATUS_OK = 0
STATUS_DIVERGED = 1
STATUS_STIFF = 2
STATUS_MAX_STEPS = 3

RENORM_LIMIT = 1e-6
MIN_STEP = 1e-9

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200,
               -22 / 525, 1 / 40])
# Continuous extension (Hairer's dense output for DOPRI5).
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])


@njit(cache=True, nogil=True)
def coef_value(par, t):
    if t < par[5] or t > par[6]:
        return 0.0j
    v = complex(par[0], par[1])
    if par[3] > 0.0:
        x = (t - par[2]) / par[3]
        v *= np.exp(-0.5 * x * x)
    if par[4] != 0.0:
        v *= np.exp(-1j * par[4] * t)
    return v


@njit(cache=True, nogil=True)
def _channel_rate(c_par, c_start, m, t):
    a = 0.0j
    for r in range(c_start[m], c_start[m + 1]):
        a += coef_value(c_par[r], t)
    return a.real * a.real + a.imag * a.imag


@njit(cache=True, nogil=True)
def _add_sparse(ptr, idx, val, k, scale, out):
    for e in range(ptr[k], ptr[k + 1]):
        out[idx[e, 0], idx[e, 1]] += scale * val[e]


@njit(cache=True, nogil=True)
def lindblad_rhs(packed, rho, t, out, heff, rates):
    """out <- -i (Heff rho - rho Heff^H) + sum_m r_m C rho C^H.

    Operators are stored sparsely (CSR-like ``ptr``/``idx``/``val`` triples);
    the model operators have one or two nonzeros each.
    """
    (h_static, t_ptr, t_idx, t_val, t_par, c_ptr, c_idx, c_val,
     d_ptr, d_idx, d_val, c_par, c_start) = packed
    n = rho.shape[0]
    for i in range(n):
        for j in range(n):
            heff[i, j] = h_static[i, j]
    for k in range(t_par.shape[0]):
        c = coef_value(t_par[k], t)
        if c == 0.0:
            continue
        for e in range(t_ptr[k], t_ptr[k + 1]):
            a = t_idx[e, 0]
            b = t_idx[e, 1]
            v = c * t_val[e]
            heff[a, b] += v
            heff[b, a] += np.conj(v)
    for m in range(rates.shape[0]):
        r = _channel_rate(c_par, c_start, m, t)
        rates[m] = r
        if r != 0.0:
            _add_sparse(d_ptr, d_idx, d_val, m, -0.5j * r, heff)

    for i in range(n):
        for j in range(n):
            s = 0.0j
            for k in range(n):
                s += heff[i, k] * rho[k, j] - rho[i, k] * np.conj(heff[j, k])
            out[i, j] = -1j * s

    for m in range(rates.shape[0]):
        r = rates[m]
        if r == 0.0:
            continue
        for e in range(c_ptr[m], c_ptr[m + 1]):
            a = c_idx[e, 0]
            b = c_idx[e, 1]
            va = r * c_val[e]
            for f in range(c_ptr[m], c_ptr[m + 1]):
                out[a, c_idx[f, 0]] += va * rho[b, c_idx[f, 1]] * np.conj(c_val[f])


@njit(cache=True, nogil=True)
def _step_cap(t, windows, free_cap, t_end):
    """Largest allowed step from t: window-dependent cap, clipped at the next
    window boundary and at t_end."""
    cap = free_cap
    nxt = t_end
    for w in range(windows.shape[0]):
        lo = windows[w, 0]
        hi = windows[w, 1]
        if lo <= t < hi:
            if windows[w, 2] < cap:
                cap = windows[w, 2]
            if hi < nxt:
                nxt = hi
        elif lo > t and lo < nxt:
            nxt = lo
    return cap, nxt


@njit(cache=True, nogil=True)
def integrate(packed, rho0, t0, t1, samples, rtol, atol, proj, weight,
              windows, free_cap, max_steps):
    """Adaptive DOPRI5 from t0 to t1.

    Returns (status, t_fail, states, n_steps, n_rejected, max_drift,
    integral, rho_final).
    """
    n = rho0.shape[0]
    ns = samples.shape[0]
    states = np.zeros((ns, n, n), dtype=np.complex128)

    y = rho0.copy()
    ynew = np.empty_like(y)
    ytmp = np.empty_like(y)
    k = np.zeros((7, n, n), dtype=np.complex128)
    heff = np.empty((n, n), dtype=np.complex128)
    rates = np.empty(packed[12].shape[0] - 1)

    si = 0
    while si < ns and samples[si] <= t0:
        states[si] = y
        si += 1

    f_old = 0.0
    for i in range(n):
        for j in range(n):
            f_old += (proj[i, j] * y[j, i]).real
    integral = 0.0

    t = t0
    lindblad_rhs(packed, y, t, k[0], heff, rates)
    cap, nxt = _step_cap(t, windows, free_cap, t1)
    h_prop = cap
    n_steps = 0
    n_rej = 0
    max_drift = 0.0
    status = STATUS_OK
    t_fail = 0.0

    while t < t1:
        if n_steps + n_rej >= max_steps:
            status = STATUS_MAX_STEPS
            t_fail = t
            break
        if h_prop < MIN_STEP:
            status = STATUS_STIFF
            t_fail = t
            break
        cap, nxt = _step_cap(t, windows, free_cap, t1)
        if h_prop > cap:
            h_prop = cap
        h = h_prop
        last = False
        if t + h >= nxt:
            h = nxt - t
            last = True

        for s in range(1, 6):
            for i in range(n):
                for j in range(n):
                    acc = 0.0j
                    for q in range(s):
                        acc += _A[s, q] * k[q, i, j]
                    ytmp[i, j] = y[i, j] + h * acc
            lindblad_rhs(packed, ytmp, t + _C[s] * h, k[s], heff, rates)
        for i in range(n):
            for j in range(n):
                acc = 0.0j
                for q in range(6):
                    acc += _B[q] * k[q, i, j]
                ynew[i, j] = y[i, j] + h * acc
        t_new = nxt if last else t + h
        lindblad_rhs(packed, ynew, t_new, k[6], heff, rates)

        err = 0.0
        for i in range(n):
            for j in range(n):
                e = 0.0j
                for q in range(7):
                    e += _E[q] * k[q, i, j]
                sc = atol + rtol * max(abs(y[i, j]), abs(ynew[i, j]))
                v = abs(h * e) / sc
                err += v * v
        err = np.sqrt(err / (n * n))

        if err > 1.0:
            n_rej += 1
            h_prop = h * max(0.2, 0.9 * err ** -0.2)
            continue

        # Dense output for samples inside (t, t_new].
        while si < ns and samples[si] <= t_new:
            theta = (samples[si] - t) / h
            if theta > 1.0:
                theta = 1.0
            q1 = theta
            q2 = theta * theta
            q3 = q2 * theta
            q4 = q3 * theta
            for i in range(n):
                for j in range(n):
                    acc = 0.0j
                    for q in range(7):
                        acc += k[q, i, j] * (_P[q, 0] * q1 + _P[q, 1] * q2
                                             + _P[q, 2] * q3 + _P[q, 3] * q4)
                    ytmp[i, j] = y[i, j] + h * acc
            tr = 0.0
            for i in range(n):
                tr += ytmp[i, i].real
            for i in range(n):
                for j in range(n):
                    states[si, i, j] = 0.5 * (ytmp[i, j] + np.conj(ytmp[j, i])) / tr
            si += 1

        # Re-symmetrize, check and fix the trace.
        for i in range(n):
            for j in range(i, n):
                v = 0.5 * (ynew[i, j] + np.conj(ynew[j, i]))
                ynew[i, j] = v
                ynew[j, i] = np.conj(v)
        tr = 0.0
        for i in range(n):
            tr += ynew[i, i].real
        drift = abs(tr - 1.0)
        if drift > max_drift:
            max_drift = drift
        if drift >= RENORM_LIMIT:
            status = STATUS_DIVERGED
            t_fail = t_new
            break
        for i in range(n):
            for j in range(n):
                ynew[i, j] /= tr

        f_new = 0.0
        for i in range(n):
            for j in range(n):
                f_new += (proj[i, j] * ynew[j, i]).real
        integral += 0.5 * (t_new - t) * (f_old + f_new)
        f_old = f_new

        for i in range(n):
            for j in range(n):
                y[i, j] = ynew[i, j]
        t = t_new
        n_steps += 1
        # FSAL; symmetrization and renormalization above are roundoff-level.
        for i in range(n):
            for j in range(n):
                k[0, i, j] = k[6, i, j]

        fac = 10.0 if err == 0.0 else min(10.0, max(0.2, 0.9 * err ** -0.2))
        if not last or h * fac > h_prop:
            h_prop = h * fac

    return (status, t_fail, states, n_steps, n_rej, max_drift,
            weight * integral, y)


@njit(cache=True, nogil=True)
def rhs_once(packed, rho, t):
    n = rho.shape[0]
    out = np.empty((n, n), dtype=np.complex128)
    heff = np.empty((n, n), dtype=np.complex128)
    rates = np.empty(packed[12].shape[0] - 1)
    lindblad_rhs(packed, rho, t, out, heff, rates)
    return out
