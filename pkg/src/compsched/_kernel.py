"""Event loop for the single-server queue.

Between events the server splits capacity ``c`` according to the discipline
code; each iteration advances to the earliest of the next arrival and the
next internal event (a departure, or an FBPS cohort catching up with the
next attained-service level).  An internal event within ``TIME_TOL`` of the
next arrival is processed first, at the arrival instant.
"""

import numpy as np
from numba import njit

FIFO = 0
PS = 1
FBPS = 2
SRPT = 3
SP = 4
SP_LIFO = 5

TIME_TOL = 1e-12


@njit(cache=True)
def run_queue(arrival, size, cls, n_classes, capacity, disc, drain, record):
    n = arrival.shape[0]
    rem = size.copy()
    att = np.zeros(n)
    dep = np.full(n, np.nan)
    wpre = np.zeros((n, n_classes))
    present = np.empty(n, dtype=np.int64)
    coh = np.empty(n, dtype=np.int64)
    npres = 0

    nlog = 2 * n + 1 if record else 1
    log_t = np.empty(nlog)
    log_w = np.zeros((nlog, n_classes))
    log_n = np.empty(nlog, dtype=np.int64)
    nev = 0

    t = 0.0
    busy = 0.0
    a = 0
    inf = np.inf
    while True:
        if a >= n and (npres == 0 or not drain):
            break
        if npres == 0:
            t = arrival[a]

        # ---- served set and time to the next internal event
        served = -1
        ncoh = 0
        lmin = 0.0
        lnext = inf
        catch_up = False
        dt_int = inf
        if npres > 0:
            if disc == PS:
                rmin = inf
                for q in range(npres):
                    j = present[q]
                    if rem[j] < rmin:
                        rmin = rem[j]
                        served = j
                dt_int = rmin * npres / capacity
            elif disc == FBPS:
                lmin = inf
                for q in range(npres):
                    if att[present[q]] < lmin:
                        lmin = att[present[q]]
                rmin = inf
                for q in range(npres):
                    j = present[q]
                    if att[j] == lmin:
                        coh[ncoh] = j
                        ncoh += 1
                        if rem[j] < rmin:
                            rmin = rem[j]
                            served = j
                    elif att[j] < lnext:
                        lnext = att[j]
                if lnext - lmin < rmin:
                    catch_up = True
                    dt_int = (lnext - lmin) * ncoh / capacity
                else:
                    dt_int = rmin * ncoh / capacity
            else:
                served = present[0]
                for q in range(1, npres):
                    j = present[q]
                    b = served
                    if disc == FIFO:
                        better = j < b
                    elif disc == SRPT:
                        better = rem[j] < rem[b] or (rem[j] == rem[b] and j < b)
                    elif disc == SP:
                        better = cls[j] > cls[b] or (cls[j] == cls[b] and j < b)
                    else:
                        better = cls[j] > cls[b] or (cls[j] == cls[b] and j > b)
                    if better:
                        served = j
                dt_int = rem[served] / capacity

        dt_arr = inf
        t_arr = inf
        if a < n:
            t_arr = arrival[a]
            dt_arr = t_arr - t
            if dt_arr < 0.0:
                dt_arr = 0.0
        internal = npres > 0 and dt_int <= dt_arr + TIME_TOL
        if internal and dt_int > dt_arr:
            dt = dt_arr
            t_new = t_arr
        elif internal:
            dt = dt_int
            t_new = t + dt
        else:
            dt = dt_arr
            t_new = t_arr

        # ---- serve for dt
        if npres > 0 and dt > 0.0:
            busy += dt
            work = capacity * dt
            if disc == PS:
                share = work / npres
                for q in range(npres):
                    j = present[q]
                    rem[j] -= share
                    att[j] += share
            elif disc == FBPS:
                newlev = lmin + work / ncoh
                for q in range(ncoh):
                    j = coh[q]
                    att[j] = newlev
                    rem[j] = size[j] - newlev
            else:
                rem[served] -= work
                att[served] += work
        t = t_new

        if internal:
            # ---- settle: finish jobs, keep FBPS ties exact
            if disc == FBPS:
                if catch_up:
                    for q in range(ncoh):
                        j = coh[q]
                        att[j] = lnext
                        rem[j] = size[j] - lnext
                else:
                    rem[served] = 0.0
                    att[served] = size[served]
                    for q in range(ncoh):
                        j = coh[q]
                        if rem[j] <= TIME_TOL * (1.0 + size[j]):
                            rem[j] = 0.0
                            att[j] = size[j]
                        elif lnext < inf and lnext - att[j] <= TIME_TOL * (1.0 + lnext):
                            att[j] = lnext
                            rem[j] = size[j] - lnext
            else:
                rem[served] = 0.0
                att[served] = size[served]
                if disc == PS:
                    for q in range(npres):
                        j = present[q]
                        if rem[j] <= TIME_TOL * (1.0 + size[j]):
                            rem[j] = 0.0
                            att[j] = size[j]
            q = 0
            while q < npres:
                j = present[q]
                if rem[j] <= 0.0:
                    dep[j] = t
                    npres -= 1
                    present[q] = present[npres]
                else:
                    q += 1
        else:
            # ---- arrival: sample the pre-arrival workload, then admit
            for q in range(npres):
                j = present[q]
                wpre[a, cls[j]] += rem[j]
            if size[a] > 0.0:
                present[npres] = a
                npres += 1
            else:
                dep[a] = t
            a += 1

        if record:
            if nev == log_t.shape[0]:
                log_t, log_w, log_n = _grow(log_t, log_w, log_n)
            log_t[nev] = t
            for q in range(npres):
                j = present[q]
                log_w[nev, cls[j]] += rem[j]
            log_n[nev] = npres
        nev += 1
    if record:
        return dep, wpre, busy, nev, log_t[:nev], log_w[:nev], log_n[:nev]
    return dep, wpre, busy, nev, log_t[:0], log_w[:0], log_n[:0]


@njit(cache=True)
def _grow(log_t, log_w, log_n):
    size = 2 * log_t.shape[0]
    t2 = np.empty(size)
    w2 = np.zeros((size, log_w.shape[1]))
    n2 = np.empty(size, dtype=np.int64)
    k = log_t.shape[0]
    t2[:k] = log_t
    w2[:k] = log_w
    n2[:k] = log_n
    return t2, w2, n2


@njit(cache=True)
def lindley_workload(arrival, size, capacity):
    """FIFO workload seen just before each arrival (independent of run_queue)."""
    n = arrival.shape[0]
    out = np.empty(n)
    w = 0.0
    for i in range(n):
        if i > 0:
            w = w + size[i - 1] - capacity * (arrival[i] - arrival[i - 1])
            if w < 0.0:
                w = 0.0
        out[i] = w
    return out
