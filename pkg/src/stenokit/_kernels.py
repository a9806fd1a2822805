"""Compiled time-stepping kernels for the three-vessel network solver.

State is cell-centered (area, velocity) per vessel. Fluxes are evaluated from
limited reconstructions of (transmural pressure, velocity); reconstructing in
pressure rather than area keeps the rest state A = A_d(x), U = 0 an exact
equilibrium even through a stenosis, because a flat pressure field produces
identical face states on both sides of every interior face.

Status codes returned by the cycle driver:
  0 ok, 1 non-finite/non-positive state, 2 step budget exhausted,
  3 junction solve failure, 4 boundary solve failure.
"""

import math

import numpy as np
from numba import njit

STATUS_OK = 0
STATUS_BLOWUP = 1
STATUS_STEP_BUDGET = 2
STATUS_JUNCTION_FAIL = 3
STATUS_BOUNDARY_FAIL = 4


@njit(cache=True, inline="always")
def _phi(area, ad, beta):
    # transmural pressure above diastolic: P - (P_ext + P_d)
    return beta * (math.sqrt(area) - math.sqrt(ad)) / ad


@njit(cache=True, inline="always")
def _area_from_phi(phi, ad, beta):
    s = math.sqrt(ad) + phi * ad / beta
    if s <= 0.0:
        return -1.0
    return s * s


@njit(cache=True, inline="always")
def _celerity(area, ad, beta, rho):
    return math.sqrt(beta * math.sqrt(area) / (2.0 * rho * ad))


@njit(cache=True, inline="always")
def _minmod(a, b):
    if a > 0.0 and b > 0.0:
        return a if a < b else b
    if a < 0.0 and b < 0.0:
        return a if a > b else b
    return 0.0


@njit(cache=True)
def _inflow_at(t, sines, cosines, omega):
    q = 0.0
    for n in range(6):
        q += sines[n] * math.sin(n * omega * t) + cosines[n] * math.cos(n * omega * t)
    return q


@njit(cache=True)
def _solve_inlet(w2, qin, ad, beta, rho):
    """Area at the inflow face: A*(w2 + 4c(A)) = qin, monotone increasing."""
    k = math.sqrt(beta / (2.0 * rho * ad))
    lo = 1e-10 * ad
    hi = 4.0 * ad
    scale = ad * k * ad ** 0.25
    for _ in range(80):
        if lo * (w2 + 4.0 * k * lo ** 0.25) <= qin:
            break
        lo *= 0.25
    for _ in range(80):
        if hi * (w2 + 4.0 * k * hi ** 0.25) >= qin:
            break
        hi *= 4.0
    a = ad
    if a <= lo or a >= hi:
        a = 0.5 * (lo + hi)
    for _ in range(100):
        c = k * a ** 0.25
        f = a * (w2 + 4.0 * c) - qin
        if abs(f) <= 1e-14 * scale:
            return a
        if f > 0.0:
            hi = a
        else:
            lo = a
        df = w2 + 5.0 * c
        a_new = a - f / df if df != 0.0 else 0.5 * (lo + hi)
        if not (lo < a_new < hi) or not math.isfinite(a_new):
            a_new = 0.5 * (lo + hi)
        a = a_new
    return a


@njit(cache=True)
def _solve_outlet(w1, pc, r1, ad, beta, rho, qguess):
    """Area at an RCR-coupled outflow face.

    Root of  phi(A) - pc_rel - A*(w1 - 4c(A))*r1 = 0  where pc_rel is the
    Windkessel node pressure measured relative to P_ext + P_d; the residual is
    strictly increasing in A for subcritical flow.
    """
    k = math.sqrt(beta / (2.0 * rho * ad))
    lo = 1e-10 * ad
    hi = 4.0 * ad
    scale = abs(pc) + beta / math.sqrt(ad) + abs(qguess) * r1 + 1.0
    for _ in range(200):
        c = k * lo ** 0.25
        if _phi(lo, ad, beta) - pc - lo * (w1 - 4.0 * c) * r1 <= 0.0:
            break
        lo *= 0.25
    for _ in range(200):
        c = k * hi ** 0.25
        if _phi(hi, ad, beta) - pc - hi * (w1 - 4.0 * c) * r1 >= 0.0:
            break
        hi *= 2.0
    a = ad
    if a <= lo or a >= hi:
        a = 0.5 * (lo + hi)
    for _ in range(100):
        c = k * a ** 0.25
        u = w1 - 4.0 * c
        f = _phi(a, ad, beta) - pc - a * u * r1
        if abs(f) <= 1e-13 * scale:
            return a
        if f > 0.0:
            hi = a
        else:
            lo = a
        dphi = beta / (2.0 * math.sqrt(a) * ad)
        df = dphi - r1 * (u - c)
        a_new = a - f / df if df != 0.0 else 0.5 * (lo + hi)
        if not (lo < a_new < hi) or not math.isfinite(a_new):
            a_new = 0.5 * (lo + hi)
        a = a_new
    return a


@njit(cache=True)
def _junction_static(w1, w2a, w2b, ad_p, ad_a, ad_b, beta_p, beta_d, rho):
    """Common face pressure at the bifurcation under static-pressure coupling.

    Mass balance g(phi) = Q_parent - Q_a - Q_b is strictly decreasing in the
    shared transmural pressure phi; solved by safeguarded Newton. Returns
    (phi, iterations, ok).
    """
    lo = -0.99 * beta_p / (ad_p / math.sqrt(ad_p))  # keep sqrt-area positive
    lo2 = -0.99 * beta_d / (ad_a / math.sqrt(ad_a))
    if lo2 > lo:
        lo = lo2
    hi = abs(lo)
    kp = math.sqrt(beta_p / (2.0 * rho * ad_p))
    ka = math.sqrt(beta_d / (2.0 * rho * ad_a))
    kb = math.sqrt(beta_d / (2.0 * rho * ad_b))

    def g(phi):
        a_p = _area_from_phi(phi, ad_p, beta_p)
        a_a = _area_from_phi(phi, ad_a, beta_d)
        a_b = _area_from_phi(phi, ad_b, beta_d)
        if a_p <= 0.0 or a_a <= 0.0 or a_b <= 0.0:
            return np.nan
        up = w1 - 4.0 * kp * a_p ** 0.25
        ua = w2a + 4.0 * ka * a_a ** 0.25
        ub = w2b + 4.0 * kb * a_b ** 0.25
        return a_p * up - a_a * ua - a_b * ub

    for _ in range(200):
        v = g(hi)
        if not math.isnan(v) and v <= 0.0:
            break
        hi *= 2.0
    for _ in range(200):
        v = g(lo)
        if not math.isnan(v) and v >= 0.0:
            break
        lo = 0.5 * (lo + hi) if math.isnan(g(lo)) else lo - (hi - lo)
    phi = 0.0
    if not (lo < phi < hi):
        phi = 0.5 * (lo + hi)
    scale = ad_p * kp * ad_p ** 0.25
    iters = 0
    for it in range(120):
        iters = it + 1
        f = g(phi)
        if math.isnan(f):
            phi = 0.5 * (lo + hi)
            continue
        if abs(f) <= 1e-14 * scale:
            return phi, iters, True
        if f > 0.0:
            lo = phi
        else:
            hi = phi
        # analytic slope of g
        a_p = _area_from_phi(phi, ad_p, beta_p)
        a_a = _area_from_phi(phi, ad_a, beta_d)
        a_b = _area_from_phi(phi, ad_b, beta_d)
        cp = kp * a_p ** 0.25
        ca = ka * a_a ** 0.25
        cb = kb * a_b ** 0.25
        up = w1 - 4.0 * cp
        ua = w2a + 4.0 * ca
        ub = w2b + 4.0 * cb
        dap = 2.0 * math.sqrt(a_p) * ad_p / beta_p
        daa = 2.0 * math.sqrt(a_a) * ad_a / beta_d
        dab = 2.0 * math.sqrt(a_b) * ad_b / beta_d
        df = dap * (up - cp) - daa * (ua + ca) - dab * (ub + cb)
        phi_new = phi - f / df if df != 0.0 else 0.5 * (lo + hi)
        if not (lo < phi_new < hi) or not math.isfinite(phi_new):
            phi_new = 0.5 * (lo + hi)
        phi = phi_new
    return phi, iters, False


@njit(cache=True)
def _junction_total(w1, w2a, w2b, ad_p, ad_a, ad_b, beta_p, beta_d, rho):
    """Bifurcation face states under total-pressure coupling.

    Damped Newton on the three face pressures with finite-difference
    Jacobian. Returns (phi_p, phi_a, phi_b, iterations, ok).
    """
    x = np.zeros(3)
    phi0, _, ok0 = _junction_static(w1, w2a, w2b, ad_p, ad_a, ad_b, beta_p, beta_d, rho)
    if ok0:
        x[0] = phi0
        x[1] = phi0
        x[2] = phi0
    kp = math.sqrt(beta_p / (2.0 * rho * ad_p))
    ka = math.sqrt(beta_d / (2.0 * rho * ad_a))
    kb = math.sqrt(beta_d / (2.0 * rho * ad_b))

    def res(xv, out):
        a_p = _area_from_phi(xv[0], ad_p, beta_p)
        a_a = _area_from_phi(xv[1], ad_a, beta_d)
        a_b = _area_from_phi(xv[2], ad_b, beta_d)
        if a_p <= 0.0 or a_a <= 0.0 or a_b <= 0.0:
            return False
        up = w1 - 4.0 * kp * a_p ** 0.25
        ua = w2a + 4.0 * ka * a_a ** 0.25
        ub = w2b + 4.0 * kb * a_b ** 0.25
        tp = xv[0] + 0.5 * rho * up * up
        out[0] = tp - (xv[1] + 0.5 * rho * ua * ua)
        out[1] = tp - (xv[2] + 0.5 * rho * ub * ub)
        out[2] = a_p * up - a_a * ua - a_b * ub
        return True

    r = np.zeros(3)
    r_try = np.zeros(3)
    jac = np.zeros((3, 3))
    xp = np.zeros(3)
    if not res(x, r):
        return 0.0, 0.0, 0.0, 0, False
    scale = beta_p / math.sqrt(ad_p) * 1e-13 + ad_p * kp * ad_p ** 0.25 * 1e-13
    iters = 0
    for it in range(60):
        iters = it + 1
        norm = abs(r[0]) + abs(r[1]) + abs(r[2])
        if norm <= scale:
            return x[0], x[1], x[2], iters, True
        for j in range(3):
            h = 1e-7 * (abs(x[j]) + 1.0)
            for m in range(3):
                xp[m] = x[m]
            xp[j] += h
            if not res(xp, r_try):
                return x[0], x[1], x[2], iters, False
            for m in range(3):
                jac[m, j] = (r_try[m] - r[m]) / h
        step = np.linalg.solve(jac, r)
        lam = 1.0
        improved = False
        for _ in range(12):
            for m in range(3):
                xp[m] = x[m] - lam * step[m]
            if res(xp, r_try):
                tnorm = abs(r_try[0]) + abs(r_try[1]) + abs(r_try[2])
                if tnorm < norm:
                    for m in range(3):
                        x[m] = xp[m]
                        r[m] = r_try[m]
                    improved = True
                    break
            lam *= 0.5
        if not improved:
            return x[0], x[1], x[2], iters, False
    return x[0], x[1], x[2], iters, False


@njit(cache=True)
def _wk_advance(pc, q, r1, r2, cap, pout, dt):
    """Exponential step of the RCR node pressure with the inflow held fixed."""
    peq = pout + q * r2
    return peq + (pc - peq) * math.exp(-dt / (r2 * cap))


@njit(cache=True)
def _rhs(A, U, pc_rel, t, ad_c, ad_f, beta, dx, rho, fric_coef,
         r1, r2, sines, cosines, omega, junction_mode,
         dA, dU, qb, phibuf, sphi, su, fm, fu):
    """Semi-discrete right-hand side; fills dA, dU and outlet flows qb.

    pc_rel holds the two Windkessel node pressures relative to P_ext + P_d,
    the same offset as the reconstructed phi. Returns (status, junction_iters).
    """
    nv, n = A.shape
    for v in range(nv):
        b = beta[v]
        for i in range(n):
            a = A[v, i]
            if not (a > 0.0) or not math.isfinite(a) or not math.isfinite(U[v, i]):
                return STATUS_BLOWUP, 0
            phibuf[v, i] = _phi(a, ad_c[v, i], b)
        sphi[v, 0] = 0.0
        su[v, 0] = 0.0
        sphi[v, n - 1] = 0.0
        su[v, n - 1] = 0.0
        for i in range(1, n - 1):
            sphi[v, i] = _minmod(phibuf[v, i] - phibuf[v, i - 1],
                                 phibuf[v, i + 1] - phibuf[v, i])
            su[v, i] = _minmod(U[v, i] - U[v, i - 1], U[v, i + 1] - U[v, i])
        for j in range(1, n):
            adf = ad_f[v, j]
            phil = phibuf[v, j - 1] + 0.5 * sphi[v, j - 1]
            ul = U[v, j - 1] + 0.5 * su[v, j - 1]
            phir = phibuf[v, j] - 0.5 * sphi[v, j]
            ur = U[v, j] - 0.5 * su[v, j]
            al = _area_from_phi(phil, adf, b)
            ar = _area_from_phi(phir, adf, b)
            if al <= 0.0 or ar <= 0.0:
                return STATUS_BLOWUP, 0
            cl = _celerity(al, adf, b, rho)
            cr = _celerity(ar, adf, b, rho)
            smax = max(abs(ul) + cl, abs(ur) + cr)
            fm[v, j] = 0.5 * (al * ul + ar * ur) - 0.5 * smax * (ar - al)
            fu[v, j] = (0.5 * (0.5 * ul * ul + phil / rho + 0.5 * ur * ur + phir / rho)
                        - 0.5 * smax * (ur - ul))

    # inflow face of the aorta
    beta_a = beta[0]
    w2_in = U[0, 0] - 4.0 * _celerity(A[0, 0], ad_c[0, 0], beta_a, rho)
    qin = _inflow_at(t, sines, cosines, omega)
    adf = ad_f[0, 0]
    a_in = _solve_inlet(w2_in, qin, adf, beta_a, rho)
    if a_in <= 0.0 or not math.isfinite(a_in):
        return STATUS_BOUNDARY_FAIL, 0
    u_in = w2_in + 4.0 * _celerity(a_in, adf, beta_a, rho)
    fm[0, 0] = a_in * u_in
    fu[0, 0] = 0.5 * u_in * u_in + _phi(a_in, adf, beta_a) / rho

    # bifurcation: aorta outflow face feeds both iliac inflow faces
    beta_d = beta[1]
    w1 = U[0, n - 1] + 4.0 * _celerity(A[0, n - 1], ad_c[0, n - 1], beta_a, rho)
    w2a = U[1, 0] - 4.0 * _celerity(A[1, 0], ad_c[1, 0], beta_d, rho)
    w2b = U[2, 0] - 4.0 * _celerity(A[2, 0], ad_c[2, 0], beta_d, rho)
    ad_p = ad_f[0, n]
    ad_a = ad_f[1, 0]
    ad_b = ad_f[2, 0]
    if junction_mode == 0:
        phi_j, jiters, ok = _junction_static(w1, w2a, w2b, ad_p, ad_a, ad_b,
                                             beta_a, beta_d, rho)
        phi_p = phi_j
        phi_a = phi_j
        phi_b = phi_j
    else:
        phi_p, phi_a, phi_b, jiters, ok = _junction_total(
            w1, w2a, w2b, ad_p, ad_a, ad_b, beta_a, beta_d, rho)
    if not ok:
        return STATUS_JUNCTION_FAIL, jiters
    a_p = _area_from_phi(phi_p, ad_p, beta_a)
    a_a = _area_from_phi(phi_a, ad_a, beta_d)
    a_b = _area_from_phi(phi_b, ad_b, beta_d)
    u_p = w1 - 4.0 * _celerity(a_p, ad_p, beta_a, rho)
    u_a = w2a + 4.0 * _celerity(a_a, ad_a, beta_d, rho)
    u_b = w2b + 4.0 * _celerity(a_b, ad_b, beta_d, rho)
    fm[0, n] = a_p * u_p
    fu[0, n] = 0.5 * u_p * u_p + phi_p / rho
    fm[1, 0] = a_a * u_a
    fu[1, 0] = 0.5 * u_a * u_a + phi_a / rho
    fm[2, 0] = a_b * u_b
    fu[2, 0] = 0.5 * u_b * u_b + phi_b / rho

    # iliac outflow faces coupled to the Windkessel nodes
    for k in range(2):
        v = k + 1
        w1o = U[v, n - 1] + 4.0 * _celerity(A[v, n - 1], ad_c[v, n - 1], beta_d, rho)
        adf = ad_f[v, n]
        qguess = A[v, n - 1] * U[v, n - 1]
        a_o = _solve_outlet(w1o, pc_rel[k], r1[k], adf, beta_d, rho, qguess)
        if a_o <= 0.0 or not math.isfinite(a_o):
            return STATUS_BOUNDARY_FAIL, 0
        u_o = w1o - 4.0 * _celerity(a_o, adf, beta_d, rho)
        fm[v, n] = a_o * u_o
        fu[v, n] = 0.5 * u_o * u_o + _phi(a_o, adf, beta_d) / rho
        qb[k] = a_o * u_o

    for v in range(nv):
        inv_dx = 1.0 / dx[v]
        for i in range(n):
            dA[v, i] = -(fm[v, i + 1] - fm[v, i]) * inv_dx
            dU[v, i] = (-(fu[v, i + 1] - fu[v, i]) * inv_dx
                        - fric_coef * U[v, i] / (rho * A[v, i]))
    return STATUS_OK, 0


@njit(cache=True)
def advance_cycle(A, U, pc_rel, ad_c, ad_f, beta, dx, rho, fric_coef,
                  r1, r2, cwk, pout_rel, sines, cosines, omega, t0, period,
                  cfl, junction_mode, max_steps,
                  tbuf, probe_a, probe_u):
    """Advance the network through one cardiac period with SSP-RK2.

    Probe samples (time, area, velocity at the aorta inlet cell and both iliac
    outlet cells) are recorded after every step, including the initial state.
    Returns (status, n_recorded, junction_iterations).
    """
    nv, n = A.shape
    dA1 = np.empty((nv, n))
    dU1 = np.empty((nv, n))
    dA2 = np.empty((nv, n))
    dU2 = np.empty((nv, n))
    a_mid = np.empty((nv, n))
    u_mid = np.empty((nv, n))
    phibuf = np.empty((nv, n))
    sphi = np.empty((nv, n))
    su = np.empty((nv, n))
    fm = np.empty((nv, n + 1))
    fu = np.empty((nv, n + 1))
    qb1 = np.empty(2)
    qb2 = np.empty(2)
    pc_mid = np.empty(2)

    t = t0
    t_end = t0 + period
    rec = 0
    tbuf[rec] = t
    probe_a[0, rec] = A[0, 0]
    probe_a[1, rec] = A[1, n - 1]
    probe_a[2, rec] = A[2, n - 1]
    probe_u[0, rec] = U[0, 0]
    probe_u[1, rec] = U[1, n - 1]
    probe_u[2, rec] = U[2, n - 1]
    rec += 1

    steps = 0
    while t < t_end - 1e-12 * period:
        dt = 1e30
        for v in range(nv):
            b = beta[v]
            for i in range(n):
                c = _celerity(A[v, i], ad_c[v, i], b, rho)
                local = dx[v] / (abs(U[v, i]) + c)
                if local < dt:
                    dt = local
        dt *= cfl
        if t + dt > t_end:
            dt = t_end - t
        if steps >= max_steps or rec >= tbuf.shape[0]:
            return STATUS_STEP_BUDGET, rec, 0

        status, jit1 = _rhs(A, U, pc_rel, t, ad_c, ad_f, beta, dx, rho,
                            fric_coef, r1, r2, sines, cosines, omega,
                            junction_mode, dA1, dU1, qb1, phibuf, sphi, su, fm, fu)
        if status != STATUS_OK:
            return status, rec, jit1
        for v in range(nv):
            for i in range(n):
                a_mid[v, i] = A[v, i] + dt * dA1[v, i]
                u_mid[v, i] = U[v, i] + dt * dU1[v, i]
                if not (a_mid[v, i] > 0.0) or not math.isfinite(a_mid[v, i]):
                    return STATUS_BLOWUP, rec, 0
        for k in range(2):
            pc_mid[k] = _wk_advance(pc_rel[k], qb1[k], r1[k], r2[k], cwk[k],
                                    pout_rel[k], dt)

        status, jit2 = _rhs(a_mid, u_mid, pc_mid, t + dt, ad_c, ad_f, beta, dx,
                            rho, fric_coef, r1, r2, sines, cosines, omega,
                            junction_mode, dA2, dU2, qb2, phibuf, sphi, su, fm, fu)
        if status != STATUS_OK:
            return status, rec, jit2
        for v in range(nv):
            for i in range(n):
                a_new = 0.5 * (A[v, i] + a_mid[v, i] + dt * dA2[v, i])
                u_new = 0.5 * (U[v, i] + u_mid[v, i] + dt * dU2[v, i])
                if not (a_new > 0.0) or not math.isfinite(a_new) or not math.isfinite(u_new):
                    return STATUS_BLOWUP, rec, 0
                A[v, i] = a_new
                U[v, i] = u_new
        for k in range(2):
            pc_rel[k] = _wk_advance(pc_rel[k], 0.5 * (qb1[k] + qb2[k]),
                                    r1[k], r2[k], cwk[k], pout_rel[k], dt)

        t += dt
        steps += 1
        tbuf[rec] = t
        probe_a[0, rec] = A[0, 0]
        probe_a[1, rec] = A[1, n - 1]
        probe_a[2, rec] = A[2, n - 1]
        probe_u[0, rec] = U[0, 0]
        probe_u[1, rec] = U[1, n - 1]
        probe_u[2, rec] = U[2, n - 1]
        rec += 1
    return STATUS_OK, rec, 0
