"""numba kernels for the exclusion-process simulator.

State layout shared by all kernels:

* ``occ``     uint8 array of length ``n - 1``; entry ``i`` is the occupation
  of lattice site ``x = i + 1``.
* ``active``  int64 scratch array listing the currently active bonds (bonds
  whose endpoints differ); ``pos[b]`` is the index of bond ``b`` inside
  ``active`` or ``-1``.  Bond ``b`` joins ``occ[b]`` and ``occ[b + 1]``.
* ``st``      xoshiro256++ state from :mod:`bdssep._rng`.

Every event consumes two uniforms: one for the exponential waiting time,
one for the event selection.  An event whose waiting time would overshoot
the requested horizon is discarded without consuming the selection draw;
by memorylessness the continued process is statistically exact.
"""

import numpy as np
import numba
from numba import njit, prange

from ._rng import next_unit, stream_init

# The portable threading backend; replica streams are seed-keyed, so the
# backend (and thread count) never changes any output.
numba.config.THREADING_LAYER = "workqueue"

# event codes returned by single_step: 0..nb-1 swap at that bond,
# nb left-boundary flip, nb+1 right-boundary flip, -2 absorbing state
ABSORBED = -2


@njit(cache=True)
def sample_product_kernel(p, st):
    """Draw a configuration with independent site occupations p[i]."""
    ns = p.shape[0]
    occ = np.empty(ns, np.uint8)
    for i in range(ns):
        occ[i] = np.uint8(1) if next_unit(st) < p[i] else np.uint8(0)
    return occ


@njit(cache=True)
def build_active(occ, active, pos):
    nb = occ.shape[0] - 1
    n_act = 0
    for b in range(nb):
        if occ[b] != occ[b + 1]:
            active[n_act] = b
            pos[b] = n_act
            n_act += 1
        else:
            pos[b] = -1
    return n_act


@njit(cache=True, inline="always")
def _refresh_bond(occ, active, pos, n_act, b):
    act = occ[b] != occ[b + 1]
    p = pos[b]
    if act and p < 0:
        active[n_act] = b
        pos[b] = n_act
        n_act += 1
    elif (not act) and p >= 0:
        last = active[n_act - 1]
        active[p] = last
        pos[last] = p
        pos[b] = -1
        n_act -= 1
    return n_act


@njit(cache=True)
def single_step(occ, active, pos, n_act, alpha, beta, st):
    """One exact Gillespie step.  Returns (dt, event_code, n_act)."""
    ns = occ.shape[0]
    nb = ns - 1
    rl = alpha if occ[0] == 0 else 1.0 - alpha
    rr = beta if occ[ns - 1] == 0 else 1.0 - beta
    total = n_act + rl + rr
    if total <= 0.0:
        return 0.0, ABSORBED, n_act
    dt = -np.log1p(-next_unit(st)) / total
    v = next_unit(st) * total
    if v < n_act:
        k = int(v)
        if k >= n_act:
            k = n_act - 1
        b = active[k]
        occ[b] ^= np.uint8(1)
        occ[b + 1] ^= np.uint8(1)
        if b > 0:
            n_act = _refresh_bond(occ, active, pos, n_act, b - 1)
        if b < nb - 1:
            n_act = _refresh_bond(occ, active, pos, n_act, b + 1)
        return dt, b, n_act
    elif v < n_act + rl:
        occ[0] ^= np.uint8(1)
        if nb > 0:
            n_act = _refresh_bond(occ, active, pos, n_act, 0)
        return dt, nb, n_act
    else:
        occ[ns - 1] ^= np.uint8(1)
        if nb > 0:
            n_act = _refresh_bond(occ, active, pos, n_act, nb - 1)
        return dt, nb + 1, n_act


@njit(cache=True)
def evolve_span(occ, active, pos, n_act, alpha, beta, st, t0, t1):
    """Run the chain from micro time t0 to t1.  Returns (n_act, status).

    status is 0 normally, 1 if an absorbing state was reached (the state
    is then frozen for the rest of the span, which is the exact dynamics).
    Bit-identical to iterating :func:`single_step` with the same stream.
    """
    ns = occ.shape[0]
    nb = ns - 1
    t = t0
    rl = alpha if occ[0] == 0 else 1.0 - alpha
    rr = beta if occ[ns - 1] == 0 else 1.0 - beta
    while True:
        total = n_act + rl + rr
        if total <= 0.0:
            return n_act, 1
        dt = -np.log1p(-next_unit(st)) / total
        if t + dt > t1:
            return n_act, 0
        t += dt
        v = next_unit(st) * total
        if v < n_act:
            k = int(v)
            if k >= n_act:
                k = n_act - 1
            b = active[k]
            occ[b] ^= np.uint8(1)
            occ[b + 1] ^= np.uint8(1)
            if b > 0:
                n_act = _refresh_bond(occ, active, pos, n_act, b - 1)
            else:
                rl = alpha if occ[0] == 0 else 1.0 - alpha
            if b < nb - 1:
                n_act = _refresh_bond(occ, active, pos, n_act, b + 1)
            else:
                rr = beta if occ[ns - 1] == 0 else 1.0 - beta
        elif v < n_act + rl:
            occ[0] ^= np.uint8(1)
            rl = alpha if occ[0] == 0 else 1.0 - alpha
            if ns == 1:
                rr = beta if occ[ns - 1] == 0 else 1.0 - beta
            if nb > 0:
                n_act = _refresh_bond(occ, active, pos, n_act, 0)
        else:
            occ[ns - 1] ^= np.uint8(1)
            rr = beta if occ[ns - 1] == 0 else 1.0 - beta
            if ns == 1:
                rl = alpha if occ[0] == 0 else 1.0 - alpha
            if nb > 0:
                n_act = _refresh_bond(occ, active, pos, n_act, nb - 1)


@njit(cache=True, parallel=True)
def ensemble_snapshots(alpha, beta, p_init, obs_micro, seed, out_occ, status):
    """Independent replicas, occupation snapshots at absolute micro times.

    out_occ has shape (replicas, len(obs_micro), n - 1); replica r uses the
    stream keyed by (seed, r), so results do not depend on thread count.
    """
    n_rep = out_occ.shape[0]
    n_obs = obs_micro.shape[0]
    ns = p_init.shape[0]
    for r in prange(n_rep):
        st = stream_init(seed, r)
        occ = sample_product_kernel(p_init, st)
        active = np.empty(max(ns - 1, 1), np.int64)
        pos = np.empty(max(ns - 1, 1), np.int64)
        n_act = build_active(occ, active, pos)
        t = 0.0
        flag = 0
        for k in range(n_obs):
            n_act, s = evolve_span(occ, active, pos, n_act, alpha, beta, st, t, obs_micro[k])
            t = obs_micro[k]
            if s != 0:
                flag = 1
            for i in range(ns):
                out_occ[r, k, i] = occ[i]
        status[r] = flag


@njit(cache=True, parallel=True)
def ensemble_martingale(alpha, beta, p_init, burn_micro, grid_micro, seed,
                        centering, w_y, w_s, w_bond, w_left, w_right,
                        out_y, out_si, out_gi, out_gb, status):
    """Replica trajectories with exact pathwise integrals on a record grid.

    For each replica and each mode j the kernel tracks the projected field
    y_j, the drift integrand Y(lap e_j), the carre-du-champ Gamma(e_j)
    (bulk bond sum plus boundary flip terms weighted by the actual flip
    rates), and accumulates the exact diffusive-time integrals of the
    integrand and of Gamma between events.  Records land on grid_micro
    (absolute micro times, first entry = burn_micro).
    """
    n_rep = out_y.shape[0]
    n_grid = grid_micro.shape[0]
    n_modes = w_y.shape[0]
    ns = p_init.shape[0]
    nb = ns - 1
    nsq = float((ns + 1) * (ns + 1))
    for r in prange(n_rep):
        st = stream_init(seed, r)
        occ = sample_product_kernel(p_init, st)
        active = np.empty(max(nb, 1), np.int64)
        pos = np.empty(max(nb, 1), np.int64)
        n_act = build_active(occ, active, pos)
        n_act, s0 = evolve_span(occ, active, pos, n_act, alpha, beta, st, 0.0, burn_micro)
        flag = s0

        y = np.zeros(n_modes, np.float64)
        sv = np.zeros(n_modes, np.float64)
        gbulk = np.zeros(n_modes, np.float64)
        si = np.zeros(n_modes, np.float64)
        gi = np.zeros(n_modes, np.float64)
        gbi = np.zeros(n_modes, np.float64)
        for j in range(n_modes):
            acc_y = 0.0
            acc_s = 0.0
            for i in range(ns):
                d = occ[i] - centering[i]
                acc_y += w_y[j, i] * d
                acc_s += w_s[j, i] * d
            y[j] = acc_y
            sv[j] = acc_s
        for k in range(n_act):
            b = active[k]
            for j in range(n_modes):
                gbulk[j] += w_bond[j, b]
        rl = alpha if occ[0] == 0 else 1.0 - alpha
        rr = beta if occ[ns - 1] == 0 else 1.0 - beta

        t_acc = burn_micro
        k_rec = 0
        for j in range(n_modes):
            out_y[r, 0, j] = y[j]
            out_si[r, 0, j] = 0.0
            out_gi[r, 0, j] = 0.0
            out_gb[r, 0, j] = 0.0
        absorbed = False
        total = 0.0
        while k_rec < n_grid - 1:
            if not absorbed:
                total = n_act + rl + rr
                if total <= 0.0:
                    absorbed = True
                    flag = 1
            if absorbed:
                t_next = grid_micro[n_grid - 1] + 1.0
            else:
                dt = -np.log1p(-next_unit(st)) / total
                t_next = t_acc + dt
            # emit any grid records passed by this waiting interval
            while k_rec < n_grid - 1 and grid_micro[k_rec + 1] <= t_next:
                tg = grid_micro[k_rec + 1]
                dsp = (tg - t_acc) / nsq
                for j in range(n_modes):
                    gb = w_left[j] * rl + w_right[j] * rr
                    si[j] += sv[j] * dsp
                    gi[j] += (gbulk[j] + gb) * dsp
                    gbi[j] += gb * dsp
                t_acc = tg
                k_rec += 1
                for j in range(n_modes):
                    out_y[r, k_rec, j] = y[j]
                    out_si[r, k_rec, j] = si[j]
                    out_gi[r, k_rec, j] = gi[j]
                    out_gb[r, k_rec, j] = gbi[j]
            if k_rec >= n_grid - 1:
                break
            # advance the integrals to the event time and apply the event
            dsp = (t_next - t_acc) / nsq
            for j in range(n_modes):
                gb = w_left[j] * rl + w_right[j] * rr
                si[j] += sv[j] * dsp
                gi[j] += (gbulk[j] + gb) * dsp
                gbi[j] += gb * dsp
            t_acc = t_next
            v = next_unit(st) * total
            if v < n_act:
                k = int(v)
                if k >= n_act:
                    k = n_act - 1
                b = active[k]
                d = float(occ[b + 1]) - float(occ[b])
                occ[b] ^= np.uint8(1)
                occ[b + 1] ^= np.uint8(1)
                for j in range(n_modes):
                    y[j] += (w_y[j, b] - w_y[j, b + 1]) * d
                    sv[j] += (w_s[j, b] - w_s[j, b + 1]) * d
                if b > 0:
                    bb = b - 1
                    was = pos[bb] >= 0
                    n_act = _refresh_bond(occ, active, pos, n_act, bb)
                    if (pos[bb] >= 0) != was:
                        sgn = 1.0 if pos[bb] >= 0 else -1.0
                        for j in range(n_modes):
                            gbulk[j] += sgn * w_bond[j, bb]
                else:
                    rl = alpha if occ[0] == 0 else 1.0 - alpha
                if b < nb - 1:
                    bb = b + 1
                    was = pos[bb] >= 0
                    n_act = _refresh_bond(occ, active, pos, n_act, bb)
                    if (pos[bb] >= 0) != was:
                        sgn = 1.0 if pos[bb] >= 0 else -1.0
                        for j in range(n_modes):
                            gbulk[j] += sgn * w_bond[j, bb]
                else:
                    rr = beta if occ[ns - 1] == 0 else 1.0 - beta
            elif v < n_act + rl:
                d = 1.0 - 2.0 * float(occ[0])
                occ[0] ^= np.uint8(1)
                for j in range(n_modes):
                    y[j] += w_y[j, 0] * d
                    sv[j] += w_s[j, 0] * d
                rl = alpha if occ[0] == 0 else 1.0 - alpha
                if ns == 1:
                    rr = beta if occ[ns - 1] == 0 else 1.0 - beta
                if nb > 0:
                    was = pos[0] >= 0
                    n_act = _refresh_bond(occ, active, pos, n_act, 0)
                    if (pos[0] >= 0) != was:
                        sgn = 1.0 if pos[0] >= 0 else -1.0
                        for j in range(n_modes):
                            gbulk[j] += sgn * w_bond[j, 0]
            else:
                d = 1.0 - 2.0 * float(occ[ns - 1])
                occ[ns - 1] ^= np.uint8(1)
                for j in range(n_modes):
                    y[j] += w_y[j, ns - 1] * d
                    sv[j] += w_s[j, ns - 1] * d
                rr = beta if occ[ns - 1] == 0 else 1.0 - beta
                if ns == 1:
                    rl = alpha if occ[0] == 0 else 1.0 - alpha
                if nb > 0:
                    was = pos[nb - 1] >= 0
                    n_act = _refresh_bond(occ, active, pos, n_act, nb - 1)
                    if (pos[nb - 1] >= 0) != was:
                        sgn = 1.0 if pos[nb - 1] >= 0 else -1.0
                        for j in range(n_modes):
                            gbulk[j] += sgn * w_bond[j, nb - 1]
        status[r] = flag


@njit(cache=True)
def count_event_frequencies(occ0, alpha, beta, n_steps, seed):
    """Repeated single steps from the same configuration; event counts."""
    ns = occ0.shape[0]
    nb = ns - 1
    counts = np.zeros(nb + 2, np.int64)
    st = stream_init(seed, 0)
    occ = np.empty(ns, np.uint8)
    active = np.empty(max(nb, 1), np.int64)
    pos = np.empty(max(nb, 1), np.int64)
    for _ in range(n_steps):
        for i in range(ns):
            occ[i] = occ0[i]
        n_act = build_active(occ, active, pos)
        _, code, _ = single_step(occ, active, pos, n_act, alpha, beta, st)
        if code == ABSORBED:
            break
        counts[code] += 1
    return counts
