# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled epsilon-greedy Q-learning loop on a switching tabular suite.

Must stay step-for-step identical to ``_pykernel.simulate``.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def simulate(double[:, :, :, ::1] cum, cnp.int64_t[:, :, :, ::1] nxt, double[:, :, :, ::1] rew,
             cnp.uint8_t[:, ::1] term, cnp.int64_t start, double p_switch,
             double[:, ::1] env_u, double[:, ::1] agent_u,
             double epsilon, double alpha0, bint annealed, double kappa, double gamma, double q_init,
             cnp.int64_t bin_width, cnp.int64_t episode_cap,
             double[::1] bin_sum, cnp.int64_t[::1] bin_cnt, cnp.uint8_t[::1] switched):
    cdef Py_ssize_t n = cum.shape[0]
    cdef Py_ssize_t S = cum.shape[1]
    cdef Py_ssize_t A = cum.shape[2]
    cdef Py_ssize_t K = cum.shape[3]
    cdef Py_ssize_t steps = env_u.shape[1]
    cdef double[:, ::1] Q = np.full((S, A), q_init, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] visits = np.zeros((S, A), dtype=np.int64)
    cdef Py_ssize_t t, i = 0, j, s = start, s2, a, b, k, ties, pick
    cdef double best, v, r, target, alpha, ep_ret = 0.0, max_abs = abs(q_init)
    cdef cnp.int64_t ep_len = 0
    cdef bint done

    for t in range(steps):
        # action
        if agent_u[0, t] < epsilon:
            a = <Py_ssize_t>(agent_u[1, t] * A)
            if a >= A:
                a = A - 1
        else:
            best = Q[s, 0]
            ties = 1
            for b in range(1, A):
                v = Q[s, b]
                if v > best:
                    best = v
                    ties = 1
                elif v == best:
                    ties += 1
            pick = <Py_ssize_t>(agent_u[1, t] * ties)
            if pick >= ties:
                pick = ties - 1
            a = 0
            for b in range(A):
                if Q[s, b] == best:
                    if pick == 0:
                        a = b
                        break
                    pick -= 1
        # hidden switch happens before the move
        if n > 1 and env_u[0, t] < p_switch:
            j = <Py_ssize_t>(env_u[1, t] * (n - 1))
            if j >= n - 1:
                j = n - 2
            if j >= i:
                j += 1
            i = j
            switched[t] = 1
        # move
        k = 0
        while k < K - 1 and env_u[2, t] >= cum[i, s, a, k]:
            k += 1
        s2 = nxt[i, s, a, k]
        r = rew[i, s, a, k]
        # learn
        if term[i, s2]:
            target = r
        else:
            best = Q[s2, 0]
            for b in range(1, A):
                if Q[s2, b] > best:
                    best = Q[s2, b]
            target = r + gamma * best
        if annealed:
            alpha = alpha0 * kappa / (kappa + visits[s, a])
        else:
            alpha = alpha0
        visits[s, a] += 1
        Q[s, a] = Q[s, a] + alpha * (target - Q[s, a])
        if abs(Q[s, a]) > max_abs:
            max_abs = abs(Q[s, a])
        # bookkeeping
        ep_ret += r
        ep_len += 1
        done = term[i, s2] or ep_len >= episode_cap
        if done:
            b = t // bin_width
            bin_sum[b] += ep_ret
            bin_cnt[b] += 1
            ep_ret = 0.0
            ep_len = 0
            s = start
        else:
            s = s2
    return max_abs
