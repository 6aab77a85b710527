"""Compiled inner loops for the ABR selectors and the particle swarm.

Python code in :mod:`satabr.abr` and :mod:`satabr.sara` calls these
functions directly, so there is one implementation of each rule.

RobustMPC enumeration visits sequences in lexicographic order and only
re-simulates the suffix after the last changed position.  A prefix is
skipped when even top quality with no penalties on every remaining step
could not reach the best total found so far; the margin on that bound keeps
the result identical to a plain brute-force loop.
"""

import numpy as np
from numba import njit

BBA, BOLA, RATE, ROBUST_MPC, DYNAMIC = 0, 1, 2, 3, 4
MODE_NONE, MODE_BOLA, MODE_RATE = 0, 1, 2

_PRUNE_MARGIN = 1e-9


@njit(cache=True)
def _floor_index(ladder, target):
    idx = np.searchsorted(ladder, target, side="right") - 1
    return max(idx, 0)


@njit(cache=True)
def bba_index(buf, ladder, reservoir, cushion):
    M = ladder.shape[0]
    if buf <= reservoir:
        return 0
    if buf >= reservoir + cushion:
        return M - 1
    target = ladder[0] + (ladder[M - 1] - ladder[0]) * (buf - reservoir) / cushion
    return _floor_index(ladder, target)


@njit(cache=True)
def bola_index(buf, ladder, util, chunk_s, V, gamma_p):
    q = buf / chunk_s
    best = -np.inf
    best_i = 0
    # scan from the top so ties go to the higher bitrate
    for i in range(ladder.shape[0] - 1, -1, -1):
        obj = (V * (util[i] + gamma_p * chunk_s) - q) / (ladder[i] * chunk_s)
        if obj > best:
            best = obj
            best_i = i
    if best < 0.0:
        return 0
    return best_i


@njit(cache=True)
def rate_index(xi, ladder, safety):
    return _floor_index(ladder, safety * xi)


@njit(cache=True)
def dynamic_uses_bola(buf, switch, prev_mode):
    if prev_mode == MODE_BOLA:
        return buf >= 0.9 * switch
    if prev_mode == MODE_RATE:
        return buf >= 1.1 * switch
    return buf >= switch


@njit(cache=True)
def mpc_first_choice(buffers, xis, sizes, qs, svals, prev_s, alpha, horizon, omega, rho):
    n = buffers.shape[0]
    M = sizes.shape[0]
    qmax = qs.max()
    out = np.zeros(n, dtype=np.int64)
    seq = np.zeros(horizon, dtype=np.int64)
    buf = np.empty(horizon + 1)
    rew = np.empty(horizon + 1)
    last = np.empty(horizon + 1)
    for p in range(n):
        xi = xis[p]
        if xi <= 0.0:
            # nothing can be downloaded: every sequence stalls forever
            out[p] = 0
            continue
        buf[0] = buffers[p]
        rew[0] = 0.0
        last[0] = prev_s
        for j in range(horizon):
            seq[j] = 0
        best = -np.inf
        best_first = 0
        d = 0
        while True:
            pruned = -1
            for j in range(d, horizon):
                m = seq[j]
                dt = sizes[m] / xi
                rb = dt - buf[j]
                if rb < 0.0:
                    rb = 0.0
                nb = buf[j] - dt
                if nb < 0.0:
                    nb = 0.0
                buf[j + 1] = nb + alpha
                rew[j + 1] = rew[j] + (qs[m] - omega * rb - rho * abs(svals[m] - last[j]))
                last[j + 1] = svals[m]
                left = horizon - j - 1
                if left > 0 and rew[j + 1] + left * qmax + _PRUNE_MARGIN * (1.0 + abs(best)) < best:
                    pruned = j
                    break
            if pruned >= 0:
                # jump past every completion of this prefix
                for i in range(pruned + 1, horizon):
                    seq[i] = M - 1
            elif rew[horizon] > best:
                best = rew[horizon]
                best_first = seq[0]
            j = horizon - 1
            while j >= 0 and seq[j] == M - 1:
                seq[j] = 0
                j -= 1
            if j < 0:
                break
            seq[j] += 1
            d = j
        out[p] = best_first
    return out


@njit(cache=True)
def select_batch(kind, bufs, xis, mpc_xis, ladder, util, qs, svals, prev_s, chunk_s, abr_cfg, dyn_prev, omega, rho):
    """Ladder index per row.  ``abr_cfg`` packs
    (reservoir, cushion, V, gamma_p, safety, switch, mpc_horizon)."""
    n = bufs.shape[0]
    if kind == ROBUST_MPC:
        return mpc_first_choice(bufs, mpc_xis, ladder * chunk_s, qs, svals, prev_s, chunk_s, int(abr_cfg[6]), omega, rho)
    out = np.empty(n, dtype=np.int64)
    for p in range(n):
        if kind == BBA:
            out[p] = bba_index(bufs[p], ladder, abr_cfg[0], abr_cfg[1])
        elif kind == BOLA:
            out[p] = bola_index(bufs[p], ladder, util, chunk_s, abr_cfg[2], abr_cfg[3])
        elif kind == RATE:
            out[p] = rate_index(xis[p], ladder, abr_cfg[4])
        elif dynamic_uses_bola(bufs[p], abr_cfg[5], dyn_prev):
            out[p] = bola_index(bufs[p], ladder, util, chunk_s, abr_cfg[2], abr_cfg[3])
        else:
            out[p] = rate_index(xis[p], ladder, abr_cfg[4])
    return out


@njit(cache=True)
def score_batch(pos, kind, uses_buffer, uses_throughput, C, xi, rate_scale, mpc_est, ladder, util, qs, svals,
                prev_s, base_tab, chunk_s, abr_cfg, dyn_prev, ctx):
    """Candidate chunk QoE for each row (s_b, s_r, beta) of ``pos``.

    ``ctx`` packs (omega, rho, eta, iota, gamma, ltb, ltb0, lookahead_s,
    prev_speed, o_present, o_t, o_d, edge_cap, scaled_theta).
    """
    omega, rho, eta, iota, gamma = ctx[0], ctx[1], ctx[2], ctx[3], ctx[4]
    ltb, ltb0, lookahead, prev_speed = ctx[5], ctx[6], ctx[7], ctx[8]
    present, o_t, o_d, edge_cap, scaled_theta = ctx[9] > 0.0, ctx[10], ctx[11], ctx[12], ctx[13] > 0.0
    n = pos.shape[0]
    bufs = np.empty(n)
    xis = np.empty(n)
    mpc_xis = np.empty(n)
    for p in range(n):
        bufs[p] = C * pos[p, 0] if uses_buffer else C
        if uses_throughput:
            xis[p] = xi * pos[p, 1]
            mpc_xis[p] = mpc_est * (rate_scale * pos[p, 1])
        else:
            xis[p] = xi
            mpc_xis[p] = mpc_est * rate_scale
    idx = select_batch(kind, bufs, xis, mpc_xis, ladder, util, qs, svals, prev_s, chunk_s, abr_cfg, dyn_prev,
                       omega, rho)
    out = np.empty(n)
    for p in range(n):
        beta = pos[p, 2]
        m = idx[p]
        s = base_tab[m] - eta * abs(beta - prev_speed)
        if present:
            theta = 0.0
            if edge_cap > 0.0:
                xi_theta = xis[p] if scaled_theta else xi
                theta = min(np.floor(xi_theta * o_t / (ladder[m] * chunk_s)), edge_cap)
                if theta < 0.0:
                    theta = 0.0
            slack = (C + theta * chunk_s) / beta - o_t - o_d - gamma
            if slack < 0.0:
                s -= omega * -slack
        lat = ltb + (1.0 - beta) * lookahead - ltb0
        if lat > 0.0:
            s -= iota * lat
        out[p] = s
    return out


@njit(cache=True)
def pso_run(init, draws, lower, upper, aggressiveness, w1, w2, w3, offset,
            kind, uses_buffer, uses_throughput, C, xi, rate_scale, mpc_est, ladder, util, qs, svals,
            prev_s, base_tab, chunk_s, abr_cfg, dyn_prev, ctx):
    """Particle swarm over the decision box using pre-drawn uniforms.

    ``init`` is (R, 6): three position then three velocity uniforms per
    particle.  ``draws`` is (N, R, 2): the r1, r2 pair per particle and
    iteration.  Returns (global best position, its score, best-so-far score
    after initialisation and after each iteration).
    """
    R = init.shape[0]
    N = draws.shape[0]
    pos = np.empty((R, 3))
    vel = np.empty((R, 3))
    for i in range(R):
        for d in range(3):
            pos[i, d] = lower[d] + init[i, d] * (upper[d] - lower[d])
            vel[i, d] = init[i, 3 + d] * aggressiveness
    best_pos = pos.copy()
    best_score = score_batch(pos, kind, uses_buffer, uses_throughput, C, xi, rate_scale, mpc_est, ladder, util,
                             qs, svals, prev_s, base_tab, chunk_s, abr_cfg, dyn_prev, ctx)
    g = np.argmax(best_score)
    history = np.empty(N + 1)
    history[0] = best_score[g]
    G = np.empty(3)
    for it in range(N):
        for d in range(3):
            G[d] = best_pos[g, d]
        for i in range(R):
            r1 = draws[it, i, 0]
            r2 = draws[it, i, 1]
            for d in range(3):
                v = w1 * vel[i, d] + w2 * r1 * (best_pos[i, d] - pos[i, d]) + w3 * r2 * (G[d] - pos[i, d])
                vel[i, d] = v
                x = pos[i, d] + v + offset[d]
                pos[i, d] = min(max(x, lower[d]), upper[d])
        s = score_batch(pos, kind, uses_buffer, uses_throughput, C, xi, rate_scale, mpc_est, ladder, util,
                        qs, svals, prev_s, base_tab, chunk_s, abr_cfg, dyn_prev, ctx)
        for i in range(R):
            if s[i] > best_score[i]:
                best_score[i] = s[i]
                for d in range(3):
                    best_pos[i, d] = pos[i, d]
        g = np.argmax(best_score)
        history[it + 1] = best_score[g]
    return best_pos[g].copy(), best_score[g], history
