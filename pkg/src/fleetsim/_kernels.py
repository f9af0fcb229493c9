"""Compiled hot loops: nominal simulation and concurrent estimation.

Everything here is numba-compiled and operates on plain arrays; the
wrappers in :mod:`fleetsim.engine` translate between domain objects and
kernel arguments.  Two properties are deliberately engineered:

* RNG draws are counter-indexed (splitmix64) and bit-identical to the
  pure-Python :mod:`fleetsim.clock` streams, so test oracles can consume
  the exact same randomness.
* Event-selection scans accumulate weights in a fixed order and row/total
  weights are always recomputed fresh (never incrementally drifted), so a
  straightforward Python reimplementation reproduces every branch decision
  bit for bit.  This is what makes exact trace-equality tests possible.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .flow import mcf_kernel

# controller modes
CTRL_NONE = 0
CTRL_STATIC = 1
CTRL_TIME = 2
CTRL_EVENT = 3

# concurrent-estimation modes
CE_SC = 0
CE_VARIANT = 1

# event kind codes (match model.EventKind)
EV_KAPPA = 0
EV_REQUEST = 1
EV_FULL_ARRIVAL = 2
EV_EMPTY_ARRIVAL = 3
EV_EMPTY_DEPARTURE = 4
EV_TIMEOUT = 5
EV_FICTITIOUS = 6

# stats vector layout
ST_REQ = 0
ST_REJ = 1
ST_EMPTY = 2
ST_ELAPSED = 3
ST_FICT = 4
ST_STEPS = 5
N_STATS = 6

# sub-stream tags; the clock tags must match fleetsim.clock
TAG_CLOCK_V = 0x1D872B41
TAG_CLOCK_U = 0x2545F491
TAG_NOMINAL_DT = 0x70A3D70A
TAG_NOMINAL_SEL = 0x51EB851F

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)
_TAG_SALT = _U64(0x3C6EF372FE94F82A)
_INV53 = 2.0**-53


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (z ^ (z >> _U64(30))) * _MIX1
    z = (z ^ (z >> _U64(27))) * _MIX2
    return z ^ (z >> _U64(31))


@njit(cache=True, nogil=True)
def split_seed(seed, tag):
    s = _U64(seed)
    t = _U64(tag)
    return _mix64(_mix64(s + _GOLDEN) ^ _mix64(t * _GOLDEN + _TAG_SALT))


@njit(cache=True, nogil=True, inline="always")
def _u01(key, index):
    word = _mix64(key + _U64(index + 1) * _GOLDEN)
    return np.float64(word >> _U64(11)) * _INV53


@njit(cache=True, nogil=True, inline="always")
def _exp01(key, index):
    word = _mix64(key + _U64(index + 1) * _GOLDEN)
    u = (np.float64(word >> _U64(11)) + 0.5) * _INV53
    return -np.log(u)


@njit(cache=True, nogil=True, inline="always")
def _bisect_right(cum, value, hi):
    lo = 0
    while lo < hi:
        mid = (lo + hi) >> 1
        if value < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, nogil=True, inline="always")
def _row_weight(counts, mu_k, i, n):
    w = 0.0
    for j in range(n):
        w += counts[i, j] * mu_k[i, j]
    return w


@njit(cache=True, nogil=True, inline="always")
def _busy_total(yrow_w, zrow_w, n):
    w = 0.0
    for i in range(n):
        w += yrow_w[i]
    for i in range(n):
        w += zrow_w[i]
    return w


@njit(cache=True, nogil=True)
def _compute_dispatch(x, a, theta_row, inv_mu_k, allow_partial):
    """Dispatch matrix for the current imbalance (zeros when no move).

    Shortfall regions demand exactly their shortfall; when the surplus
    cannot cover it and ``allow_partial`` is set, demands are capped in
    decreasing-shortfall order (ties to the lower region index).
    """
    n = x.shape[0]
    bal = np.empty(n, np.int64)
    supply = np.int64(0)
    demand = np.int64(0)
    for i in range(n):
        d = a[i] - theta_row[i]
        if x[i] < d:
            d = x[i]
        bal[i] = d
        if d > 0:
            supply += d
        else:
            demand -= d
    if demand == 0 or supply == 0:
        return np.zeros((n, n), np.int64)
    if supply < demand:
        if not allow_partial:
            return np.zeros((n, n), np.int64)
        order = np.empty(n, np.int64)
        cnt = 0
        for i in range(n):
            if bal[i] < 0:
                order[cnt] = i
                cnt += 1
        for ii in range(1, cnt):
            key = order[ii]
            jj = ii - 1
            while jj >= 0 and (
                bal[order[jj]] > bal[key]
                or (bal[order[jj]] == bal[key] and order[jj] > key)
            ):
                order[jj + 1] = order[jj]
                jj -= 1
            order[jj + 1] = key
        rem = supply
        for ii in range(cnt):
            i = order[ii]
            take = -bal[i]
            if take > rem:
                take = rem
            bal[i] = -take
            rem -= take
    flows, _shipped = mcf_kernel(inv_mu_k, bal, x)
    return flows


@njit(cache=True, nogil=True, inline="always")
def _event_contrib(a_i, x_i, theta_i):
    """(deficit, supply) contribution of one region to the trigger sums."""
    deficit = theta_i - a_i
    if deficit < 0:
        deficit = 0
    s = a_i - theta_i
    if x_i < s:
        s = x_i
    if s < 0:
        s = 0
    return deficit, s


@njit(cache=True, nogil=True, error_model="numpy")
def simulate_nominal(
    n,
    m,
    n_intervals,
    interval_len,
    horizon,
    lam_cum,
    mu,
    inv_mu,
    ctrl_mode,
    theta,
    omega,
    static_cum,
    seed,
    stats,
    tr_kind,
    tr_i,
    tr_j,
    tr_time,
    tr_flag,
):
    """Event-driven simulation of one sample path (next-event scheduling).

    Service completions race as per-trip exponentials: arc (i, j) completes
    at aggregate rate (full + empty vehicles en route) * mu[i, j].  Returns
    the number of trace records written, or -1 on trace overflow.
    """
    record = tr_kind.shape[0] > 0
    cap = tr_kind.shape[0]
    rec = 0

    x = np.empty(n, np.int64)
    base = m // n
    extra = m % n
    for i in range(n):
        x[i] = base + (1 if i < extra else 0)
    trips_full = np.zeros((n, n), np.int64)
    trips_empty = np.zeros((n, n), np.int64)
    yrow_w = np.zeros(n, np.float64)
    zrow_w = np.zeros(n, np.float64)
    busy_tot = 0.0
    z_count = np.int64(0)

    # availability and trigger bookkeeping (event mode only)
    a = x.copy()
    def_c = np.zeros(n, np.int64)
    sup_c = np.zeros(n, np.int64)
    deficit_sum = np.int64(0)
    supply_sum = np.int64(0)
    k = 0
    if ctrl_mode == CTRL_EVENT:
        for i in range(n):
            d, s = _event_contrib(a[i], x[i], theta[k, i])
            def_c[i] = d
            sup_c[i] = s
            deficit_sum += d
            supply_sum += s

    lam_tot = lam_cum[k, n * n - 1]
    static_tot = static_cum[n * n - 1] if ctrl_mode == CTRL_STATIC else 0.0

    key_dt = split_seed(seed, TAG_NOMINAL_DT)
    key_sel = split_seed(seed, TAG_NOMINAL_SEL)
    ctr_dt = np.int64(0)
    ctr_sel = np.int64(0)

    next_kappa = interval_len if n_intervals > 1 else np.inf
    next_sigma = omega if ctrl_mode == CTRL_TIME else np.inf

    t = 0.0
    req_total = np.int64(0)
    req_rej = np.int64(0)
    empty_time = 0.0

    while True:
        total = lam_tot + static_tot + busy_tot
        dt = _exp01(key_dt, ctr_dt) / total
        ctr_dt += 1
        t_next = t + dt

        sched = next_kappa if next_kappa <= next_sigma else next_sigma
        if sched <= t_next and sched <= horizon:
            empty_time += z_count * (sched - t)
            t = sched
            if next_kappa <= next_sigma:
                # interval switch: new rate tables take effect
                k += 1
                lam_tot = lam_cum[k, n * n - 1]
                for i in range(n):
                    yrow_w[i] = _row_weight(trips_full, mu[k], i, n)
                    zrow_w[i] = _row_weight(trips_empty, mu[k], i, n)
                busy_tot = _busy_total(yrow_w, zrow_w, n)
                next_kappa = (k + 1) * interval_len if k < n_intervals - 1 else np.inf
                if record:
                    if rec >= cap:
                        return -1
                    tr_kind[rec] = EV_KAPPA
                    tr_i[rec] = -1
                    tr_j[rec] = -1
                    tr_time[rec] = t
                    tr_flag[rec] = 0
                    rec += 1
                if ctrl_mode == CTRL_EVENT:
                    # fill levels may change with the interval; the trigger
                    # itself is only evaluated at the next state change
                    deficit_sum = 0
                    supply_sum = 0
                    for i in range(n):
                        d, s = _event_contrib(a[i], x[i], theta[k, i])
                        def_c[i] = d
                        sup_c[i] = s
                        deficit_sum += d
                        supply_sum += s
            else:
                # timeout tick of the time-driven controller
                if record:
                    if rec >= cap:
                        return -1
                    tr_kind[rec] = EV_TIMEOUT
                    tr_i[rec] = -1
                    tr_j[rec] = -1
                    tr_time[rec] = t
                    tr_flag[rec] = 0
                    rec += 1
                # recompute availability lazily (ticks are rare)
                for i in range(n):
                    s = x[i]
                    for j in range(n):
                        s += trips_full[j, i] + trips_empty[j, i]
                    a[i] = s
                flows = _compute_dispatch(x, a, theta[k], inv_mu[k], True)
                added = np.int64(0)
                for i in range(n):
                    out_i = np.int64(0)
                    for j in range(n):
                        u = flows[i, j]
                        if u > 0:
                            out_i += u
                            trips_empty[i, j] += u
                            added += u
                            if record:
                                for _rep in range(u):
                                    if rec >= cap:
                                        return -1
                                    tr_kind[rec] = EV_EMPTY_DEPARTURE
                                    tr_i[rec] = i
                                    tr_j[rec] = j
                                    tr_time[rec] = t
                                    tr_flag[rec] = 0
                                    rec += 1
                    if out_i > 0:
                        x[i] -= out_i
                        zrow_w[i] = _row_weight(trips_empty, mu[k], i, n)
                if added > 0:
                    z_count += added
                    busy_tot = _busy_total(yrow_w, zrow_w, n)
                next_sigma += omega
            continue

        if t_next >= horizon:
            empty_time += z_count * (horizon - t)
            t = horizon
            break

        empty_time += z_count * dt
        t = t_next
        r = _u01(key_sel, ctr_sel) * total
        ctr_sel += 1

        touched_i = np.int64(-1)
        touched_j = np.int64(-1)
        if r < lam_tot:
            idx = _bisect_right(lam_cum[k], r, n * n)
            if idx >= n * n:
                idx = n * n - 1
            i = idx // n
            j = idx - i * n
            req_total += 1
            accepted = x[i] > 0
            if accepted:
                x[i] -= 1
                trips_full[i, j] += 1
                yrow_w[i] = _row_weight(trips_full, mu[k], i, n)
                busy_tot = _busy_total(yrow_w, zrow_w, n)
                a[i] -= 1
                a[j] += 1
                touched_i = i
                touched_j = j
            else:
                req_rej += 1
            if record:
                if rec >= cap:
                    return -1
                tr_kind[rec] = EV_REQUEST
                tr_i[rec] = i
                tr_j[rec] = j
                tr_time[rec] = t
                tr_flag[rec] = 0 if accepted else 1
                rec += 1
        elif r < lam_tot + static_tot:
            rs = r - lam_tot
            idx = _bisect_right(static_cum, rs, n * n)
            if idx >= n * n:
                idx = n * n - 1
            i = idx // n
            j = idx - i * n
            if x[i] > 0:
                x[i] -= 1
                trips_empty[i, j] += 1
                z_count += 1
                zrow_w[i] = _row_weight(trips_empty, mu[k], i, n)
                busy_tot = _busy_total(yrow_w, zrow_w, n)
                if record:
                    if rec >= cap:
                        return -1
                    tr_kind[rec] = EV_EMPTY_DEPARTURE
                    tr_i[rec] = i
                    tr_j[rec] = j
                    tr_time[rec] = t
                    tr_flag[rec] = 0
                    rec += 1
        else:
            rr = r - lam_tot - static_tot
            acc = 0.0
            sel_i = np.int64(-1)
            sel_j = np.int64(-1)
            sel_full = True
            for i in range(n):
                w = yrow_w[i]
                if rr < acc + w:
                    for j in range(n):
                        wij = trips_full[i, j] * mu[k, i, j]
                        if rr < acc + wij:
                            sel_i = i
                            sel_j = j
                            break
                        acc += wij
                    break
                acc += w
            if sel_i < 0:
                for i in range(n):
                    w = zrow_w[i]
                    if rr < acc + w:
                        for j in range(n):
                            wij = trips_empty[i, j] * mu[k, i, j]
                            if rr < acc + wij:
                                sel_i = i
                                sel_j = j
                                sel_full = False
                                break
                            acc += wij
                        break
                    acc += w
            if sel_i >= 0:
                i = sel_i
                j = sel_j
                if sel_full:
                    trips_full[i, j] -= 1
                    x[j] += 1
                    yrow_w[i] = _row_weight(trips_full, mu[k], i, n)
                    if record:
                        if rec >= cap:
                            return -1
                        tr_kind[rec] = EV_FULL_ARRIVAL
                        tr_i[rec] = i
                        tr_j[rec] = j
                        tr_time[rec] = t
                        tr_flag[rec] = 0
                        rec += 1
                else:
                    trips_empty[i, j] -= 1
                    x[j] += 1
                    z_count -= 1
                    zrow_w[i] = _row_weight(trips_empty, mu[k], i, n)
                    if record:
                        if rec >= cap:
                            return -1
                        tr_kind[rec] = EV_EMPTY_ARRIVAL
                        tr_i[rec] = i
                        tr_j[rec] = j
                        tr_time[rec] = t
                        tr_flag[rec] = 0
                        rec += 1
                busy_tot = _busy_total(yrow_w, zrow_w, n)
                touched_i = j
                touched_j = j
            # else: selection fell into vanished weight (only possible through
            # floating underflow of an empty system); treat as no-op

        if ctrl_mode == CTRL_EVENT and touched_i >= 0:
            d, s = _event_contrib(a[touched_i], x[touched_i], theta[k, touched_i])
            deficit_sum += d - def_c[touched_i]
            supply_sum += s - sup_c[touched_i]
            def_c[touched_i] = d
            sup_c[touched_i] = s
            if touched_j != touched_i:
                d, s = _event_contrib(a[touched_j], x[touched_j], theta[k, touched_j])
                deficit_sum += d - def_c[touched_j]
                supply_sum += s - sup_c[touched_j]
                def_c[touched_j] = d
                sup_c[touched_j] = s
            if deficit_sum > omega and supply_sum >= deficit_sum:
                flows = _compute_dispatch(x, a, theta[k], inv_mu[k], False)
                added = np.int64(0)
                for i in range(n):
                    out_i = np.int64(0)
                    for j in range(n):
                        u = flows[i, j]
                        if u > 0:
                            out_i += u
                            trips_empty[i, j] += u
                            a[j] += u
                            added += u
                            if record:
                                for _rep in range(u):
                                    if rec >= cap:
                                        return -1
                                    tr_kind[rec] = EV_EMPTY_DEPARTURE
                                    tr_i[rec] = i
                                    tr_j[rec] = j
                                    tr_time[rec] = t
                                    tr_flag[rec] = 0
                                    rec += 1
                    if out_i > 0:
                        x[i] -= out_i
                        a[i] -= out_i
                        zrow_w[i] = _row_weight(trips_empty, mu[k], i, n)
                if added > 0:
                    z_count += added
                    busy_tot = _busy_total(yrow_w, zrow_w, n)
                    deficit_sum = 0
                    supply_sum = 0
                    for i in range(n):
                        d, s = _event_contrib(a[i], x[i], theta[k, i])
                        def_c[i] = d
                        sup_c[i] = s
                        deficit_sum += d
                        supply_sum += s

    stats[ST_REQ] = req_total
    stats[ST_REJ] = req_rej
    stats[ST_EMPTY] = empty_time
    stats[ST_ELAPSED] = horizon
    stats[ST_FICT] = 0.0
    stats[ST_STEPS] = ctr_dt
    return rec


@njit(cache=True, nogil=True, error_model="numpy")
def simulate_ce_batch(
    n,
    m,
    horizon,
    lam_cum,
    mu0,
    inv_mu0,
    ce_mode,
    gamma,
    arc_cum,
    ctrl_mode,
    theta,
    omega,
    seed,
    stats,
    tr_kind,
    tr_i,
    tr_j,
    tr_time,
    tr_flag,
):
    """Construct one sample path per parameter set from a single shared clock.

    All paths consume the identical counter-indexed (V, U) draw sequence;
    uniformization makes every draw meaningful in every path, with draws
    that select infeasible events becoming fictitious self-loops.  Dispatch
    and timeout events are zero-duration consequences and consume no draws.
    Chunks of draws are materialized once and shared across paths, so the
    exponential-draw cost is amortized over the whole batch.

    Trace records (path 0 only, when buffers are non-empty) include
    fictitious self-loops.  Returns the record count, or -1 on overflow.
    """
    record = tr_kind.shape[0] > 0
    cap = tr_kind.shape[0]
    rec = 0
    n_paths = ctrl_mode.shape[0]
    n2 = n * n
    lam_tot = lam_cum[n2 - 1]

    x = np.empty((n_paths, n), np.int64)
    base_fill = m // n
    extra = m % n
    for p in range(n_paths):
        for i in range(n):
            x[p, i] = base_fill + (1 if i < extra else 0)
    trips_full = np.zeros((n_paths, n, n), np.int64)
    trips_empty = np.zeros((n_paths, n, n), np.int64)
    yrow_w = np.zeros((n_paths, n), np.float64)
    zrow_w = np.zeros((n_paths, n), np.float64)
    busy_tot = np.zeros(n_paths, np.float64)
    z_count = np.zeros(n_paths, np.int64)
    a = x.copy()
    def_c = np.zeros((n_paths, n), np.int64)
    sup_c = np.zeros((n_paths, n), np.int64)
    deficit_sum = np.zeros(n_paths, np.int64)
    supply_sum = np.zeros(n_paths, np.int64)
    t = np.zeros(n_paths, np.float64)
    next_sigma = np.full(n_paths, np.inf)
    active = np.ones(n_paths, np.bool_)
    req = np.zeros(n_paths, np.int64)
    rej = np.zeros(n_paths, np.int64)
    empty = np.zeros(n_paths, np.float64)
    fict = np.zeros(n_paths, np.int64)
    steps = np.zeros(n_paths, np.int64)

    for p in range(n_paths):
        if ctrl_mode[p] == CTRL_TIME:
            next_sigma[p] = omega[p]
        elif ctrl_mode[p] == CTRL_EVENT:
            ds = np.int64(0)
            ss = np.int64(0)
            for i in range(n):
                d, s = _event_contrib(a[p, i], x[p, i], theta[p, i])
                def_c[p, i] = d
                sup_c[p, i] = s
                ds += d
                ss += s
            deficit_sum[p] = ds
            supply_sum[p] = ss

    vkey = split_seed(seed, TAG_CLOCK_V)
    ukey = split_seed(seed, TAG_CLOCK_U)

    chunk = 16384
    v_scaled = np.empty(chunk, np.float64)
    r_draw = np.empty(chunk, np.float64)
    delta_idx = np.empty(chunk, np.int64)
    sc_arc = np.empty(chunk, np.int64)
    sc_slot = np.empty(chunk, np.int64)

    base = np.int64(0)
    n_active = n_paths
    while n_active > 0:
        for c in range(chunk):
            v_scaled[c] = _exp01(vkey, base + c) / gamma
            r = _u01(ukey, base + c) * gamma
            r_draw[c] = r
            if r < lam_tot:
                idx = _bisect_right(lam_cum, r, n2)
                if idx >= n2:
                    idx = n2 - 1
                delta_idx[c] = idx
            else:
                delta_idx[c] = -1
                if ce_mode == CE_SC:
                    rr = r - lam_tot
                    arc = _bisect_right(arc_cum, rr, n2)
                    if arc >= n2:
                        arc = n2 - 1
                    prev = arc_cum[arc - 1] if arc > 0 else 0.0
                    mu_arc = mu0[arc // n, arc - (arc // n) * n]
                    sc_arc[c] = arc
                    sc_slot[c] = np.int64((rr - prev) / mu_arc)

        for p in range(n_paths):
            if not active[p]:
                continue
            xv = x[p]
            yv = trips_full[p]
            zv = trips_empty[p]
            yw = yrow_w[p]
            zw = zrow_w[p]
            av = a[p]
            dcv = def_c[p]
            scv = sup_c[p]
            mode_p = ctrl_mode[p]
            theta_p = theta[p]
            omega_p = omega[p]
            tp = t[p]
            zc = z_count[p]
            bt = busy_tot[p]
            dsum = deficit_sum[p]
            ssum = supply_sum[p]
            nsig = next_sigma[p]
            trace_p = record and p == 0

            for c in range(chunk):
                t_new = tp + v_scaled[c]
                # zero-duration timeout ticks strictly precede the draw event
                while nsig <= t_new and nsig <= horizon:
                    empty[p] += zc * (nsig - tp)
                    tp = nsig
                    for i in range(n):
                        s = xv[i]
                        for j in range(n):
                            s += yv[j, i] + zv[j, i]
                        av[i] = s
                    if trace_p:
                        if rec >= cap:
                            return -1
                        tr_kind[rec] = EV_TIMEOUT
                        tr_i[rec] = -1
                        tr_j[rec] = -1
                        tr_time[rec] = tp
                        tr_flag[rec] = 0
                        rec += 1
                    flows = _compute_dispatch(xv, av, theta_p, inv_mu0, True)
                    added = np.int64(0)
                    for i in range(n):
                        out_i = np.int64(0)
                        for j in range(n):
                            u = flows[i, j]
                            if u > 0:
                                out_i += u
                                zv[i, j] += u
                                added += u
                                if trace_p:
                                    for _rep in range(u):
                                        if rec >= cap:
                                            return -1
                                        tr_kind[rec] = EV_EMPTY_DEPARTURE
                                        tr_i[rec] = i
                                        tr_j[rec] = j
                                        tr_time[rec] = tp
                                        tr_flag[rec] = 0
                                        rec += 1
                        if out_i > 0:
                            xv[i] -= out_i
                            zw[i] = _row_weight(zv, mu0, i, n)
                    if added > 0:
                        zc += added
                        bt = _busy_total(yw, zw, n)
                    nsig += omega_p
                if t_new >= horizon:
                    empty[p] += zc * (horizon - tp)
                    tp = horizon
                    active[p] = False
                    n_active -= 1
                    break
                empty[p] += zc * (t_new - tp)
                tp = t_new
                steps[p] += 1

                touched_i = np.int64(-1)
                touched_j = np.int64(-1)
                di = delta_idx[c]
                if di >= 0:
                    i = di // n
                    j = di - i * n
                    req[p] += 1
                    accepted = xv[i] > 0
                    if accepted:
                        xv[i] -= 1
                        yv[i, j] += 1
                        yw[i] = _row_weight(yv, mu0, i, n)
                        bt = _busy_total(yw, zw, n)
                        av[i] -= 1
                        av[j] += 1
                        touched_i = i
                        touched_j = j
                    else:
                        rej[p] += 1
                    if trace_p:
                        if rec >= cap:
                            return -1
                        tr_kind[rec] = EV_REQUEST
                        tr_i[rec] = i
                        tr_j[rec] = j
                        tr_time[rec] = tp
                        tr_flag[rec] = 0 if accepted else 1
                        rec += 1
                else:
                    sel_i = np.int64(-1)
                    sel_j = np.int64(-1)
                    sel_full = True
                    if ce_mode == CE_SC:
                        arc = sc_arc[c]
                        i = arc // n
                        j = arc - i * n
                        slot = sc_slot[c]
                        if slot < yv[i, j]:
                            sel_i = i
                            sel_j = j
                        elif slot < yv[i, j] + zv[i, j]:
                            sel_i = i
                            sel_j = j
                            sel_full = False
                    else:
                        rr = r_draw[c] - lam_tot
                        if rr < bt:
                            acc = 0.0
                            for i in range(n):
                                w = yw[i]
                                if rr < acc + w:
                                    for j in range(n):
                                        wij = yv[i, j] * mu0[i, j]
                                        if rr < acc + wij:
                                            sel_i = i
                                            sel_j = j
                                            break
                                        acc += wij
                                    break
                                acc += w
                            if sel_i < 0:
                                for i in range(n):
                                    w = zw[i]
                                    if rr < acc + w:
                                        for j in range(n):
                                            wij = zv[i, j] * mu0[i, j]
                                            if rr < acc + wij:
                                                sel_i = i
                                                sel_j = j
                                                sel_full = False
                                                break
                                            acc += wij
                                        break
                                    acc += w
                    if sel_i >= 0:
                        i = sel_i
                        j = sel_j
                        if sel_full:
                            yv[i, j] -= 1
                            xv[j] += 1
                            yw[i] = _row_weight(yv, mu0, i, n)
                            if trace_p:
                                if rec >= cap:
                                    return -1
                                tr_kind[rec] = EV_FULL_ARRIVAL
                                tr_i[rec] = i
                                tr_j[rec] = j
                                tr_time[rec] = tp
                                tr_flag[rec] = 0
                                rec += 1
                        else:
                            zv[i, j] -= 1
                            xv[j] += 1
                            zc -= 1
                            zw[i] = _row_weight(zv, mu0, i, n)
                            if trace_p:
                                if rec >= cap:
                                    return -1
                                tr_kind[rec] = EV_EMPTY_ARRIVAL
                                tr_i[rec] = i
                                tr_j[rec] = j
                                tr_time[rec] = tp
                                tr_flag[rec] = 0
                                rec += 1
                        bt = _busy_total(yw, zw, n)
                        touched_i = j
                        touched_j = j
                    else:
                        fict[p] += 1
                        if trace_p:
                            if rec >= cap:
                                return -1
                            tr_kind[rec] = EV_FICTITIOUS
                            tr_i[rec] = -1
                            tr_j[rec] = -1
                            tr_time[rec] = tp
                            tr_flag[rec] = 0
                            rec += 1

                if mode_p == CTRL_EVENT and touched_i >= 0:
                    d, s = _event_contrib(av[touched_i], xv[touched_i], theta_p[touched_i])
                    dsum += d - dcv[touched_i]
                    ssum += s - scv[touched_i]
                    dcv[touched_i] = d
                    scv[touched_i] = s
                    if touched_j != touched_i:
                        d, s = _event_contrib(av[touched_j], xv[touched_j], theta_p[touched_j])
                        dsum += d - dcv[touched_j]
                        ssum += s - scv[touched_j]
                        dcv[touched_j] = d
                        scv[touched_j] = s
                    if dsum > omega_p and ssum >= dsum:
                        flows = _compute_dispatch(xv, av, theta_p, inv_mu0, False)
                        added = np.int64(0)
                        for i in range(n):
                            out_i = np.int64(0)
                            for j in range(n):
                                u = flows[i, j]
                                if u > 0:
                                    out_i += u
                                    zv[i, j] += u
                                    av[j] += u
                                    added += u
                                    if trace_p:
                                        for _rep in range(u):
                                            if rec >= cap:
                                                return -1
                                            tr_kind[rec] = EV_EMPTY_DEPARTURE
                                            tr_i[rec] = i
                                            tr_j[rec] = j
                                            tr_time[rec] = tp
                                            tr_flag[rec] = 0
                                            rec += 1
                            if out_i > 0:
                                xv[i] -= out_i
                                av[i] -= out_i
                                zw[i] = _row_weight(zv, mu0, i, n)
                        if added > 0:
                            zc += added
                            bt = _busy_total(yw, zw, n)
                            dsum = np.int64(0)
                            ssum = np.int64(0)
                            for i in range(n):
                                d, s = _event_contrib(av[i], xv[i], theta_p[i])
                                dcv[i] = d
                                scv[i] = s
                                dsum += d
                                ssum += s

            t[p] = tp
            z_count[p] = zc
            busy_tot[p] = bt
            deficit_sum[p] = dsum
            supply_sum[p] = ssum
            next_sigma[p] = nsig
        base += chunk

    for p in range(n_paths):
        stats[p, ST_REQ] = req[p]
        stats[p, ST_REJ] = rej[p]
        stats[p, ST_EMPTY] = empty[p]
        stats[p, ST_ELAPSED] = horizon
        stats[p, ST_FICT] = fict[p]
        stats[p, ST_STEPS] = steps[p]
    return rec
