"""Pure-Python twin of the compiled Q-learning loop (same arithmetic, same order)."""
from __future__ import annotations


def simulate(cum, nxt, rew, term, start, p_switch, env_u, agent_u, epsilon, alpha0, annealed, kappa,
             gamma, q_init, bin_width, episode_cap, bin_sum, bin_cnt, switched):
    n, S, A, K = cum.shape
    cum, nxt, rew, term = cum.tolist(), nxt.tolist(), rew.tolist(), term.tolist()
    eu0, eu1, eu2 = (row.tolist() for row in env_u)
    au0, au1 = (row.tolist() for row in agent_u)
    steps = len(eu0)
    Q = [[float(q_init)] * A for _ in range(S)]
    visits = [[0] * A for _ in range(S)]
    i, s = 0, int(start)
    ep_ret, ep_len, max_abs = 0.0, 0, abs(float(q_init))
    sums = [0.0] * len(bin_sum)
    cnts = [0] * len(bin_cnt)
    for t in range(steps):
        row = Q[s]
        if au0[t] < epsilon:
            a = min(int(au1[t] * A), A - 1)
        else:
            best = max(row)
            tied = [b for b in range(A) if row[b] == best]
            a = tied[min(int(au1[t] * len(tied)), len(tied) - 1)]
        if n > 1 and eu0[t] < p_switch:
            j = min(int(eu1[t] * (n - 1)), n - 2)
            if j >= i:
                j += 1
            i = j
            switched[t] = 1
        c = cum[i][s][a]
        k = 0
        u = eu2[t]
        while k < K - 1 and u >= c[k]:
            k += 1
        s2 = nxt[i][s][a][k]
        r = rew[i][s][a][k]
        if term[i][s2]:
            target = r
        else:
            target = r + gamma * max(Q[s2])
        alpha = alpha0 * kappa / (kappa + visits[s][a]) if annealed else alpha0
        visits[s][a] += 1
        row[a] = row[a] + alpha * (target - row[a])
        if abs(row[a]) > max_abs:
            max_abs = abs(row[a])
        ep_ret += r
        ep_len += 1
        if term[i][s2] or ep_len >= episode_cap:
            b = t // bin_width
            sums[b] += ep_ret
            cnts[b] += 1
            ep_ret, ep_len = 0.0, 0
            s = int(start)
        else:
            s = s2
    for b in range(len(sums)):
        bin_sum[b] += sums[b]
        bin_cnt[b] += cnts[b]
    return max_abs
