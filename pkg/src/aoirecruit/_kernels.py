"""Compiled inner loops for the value-iteration engines and the simulator.

Both loops are inherently sequential (per-state shortcut decisions inside a
sweep, AoI recursion along a sample path) so they are written as plain loops
and compiled with numba.
"""
import numpy as np
from numba import njit

B = 3


@njit(cache=True)
def relative_value_iteration(u, q, allowed, priority, structural, theta, max_iters):
    """Jacobi-style relative value iteration on the truncated AoI chain.

    Parameters
    ----------
    u : (m, 4) float array
        Stage costs u(delta, a) for delta = 1..m.
    q : (4,) float array
        Reset (success) probability per action.
    allowed : (m, 4) bool array
        Candidate actions per state.
    priority : (4,) int array
        Order in which candidates are scanned; the first strict minimum wins.
    structural : bool
        Assign B without minimizing to every state after the first B of a sweep.

    Returns
    -------
    policy, J, iterations, argmin_evals, shortcuts, converged, monotone_ok, absorbing_ok
    """
    m = u.shape[0]
    J = np.zeros(m)
    J_new = np.zeros(m)
    policy = np.zeros(m, dtype=np.int64)
    evals = 0
    shortcuts = 0
    iterations = 0
    converged = False
    monotone_ok = True
    absorbing_ok = True
    while iterations < max_iters:
        seen_b = False
        j1 = J[0]
        for d in range(m):
            nxt = d + 1 if d + 1 < m else m - 1
            if structural and seen_b:
                a = B
                shortcuts += 1
                best = u[d, B] + q[B] * j1 + (1.0 - q[B]) * J[nxt]
            else:
                best = np.inf
                a = -1
                for k in range(4):
                    c = priority[k]
                    if allowed[d, c]:
                        evals += 1
                        v = u[d, c] + q[c] * j1 + (1.0 - q[c]) * J[nxt]
                        if v < best:
                            best = v
                            a = c
            policy[d] = a
            if a == B:
                seen_b = True
            elif seen_b:
                absorbing_ok = False
            J_new[d] = best - j1
        iterations += 1
        diff = 0.0
        for d in range(m):
            if d > 0 and J_new[d] < J_new[d - 1]:
                monotone_ok = False
            r = abs(J_new[d] - J[d]) / max(abs(J_new[d]), 1.0)
            if r > diff:
                diff = r
            J[d] = J_new[d]
        if diff <= theta:
            converged = True
            break
    return policy, J, iterations, evals, shortcuts, converged, monotone_ok, absorbing_ok


@njit(cache=True)
def simulate_chunk(actions, tail_action, delta, u_arr_l, u_arr_h, u_qual_l, u_qual_h,
                   p_l, p_h, r_l, r_h, c_l, c_h, beta,
                   out_delta, out_action, out_flags):
    """Advance the AoI sample path over one chunk of pre-drawn uniforms.

    ``out_flags`` bits: 1 arrived_L, 2 arrived_H, 4 qualified, 8 update.
    Returns (final delta, realized cost sum, recruitment spend sum, updates).
    """
    n = u_arr_l.shape[0]
    n_act = actions.shape[0]
    cost = 0.0
    spend = 0.0
    updates = 0
    for t in range(n):
        a = actions[delta] if delta < n_act else tail_action
        arr_l = u_arr_l[t] < p_l
        arr_h = u_arr_h[t] < p_h
        rec_l = arr_l and (a == 1 or a == 3)
        rec_h = arr_h and (a == 2 or a == 3)
        ok = (rec_l and u_qual_l[t] < r_l) or (rec_h and u_qual_h[t] < r_h)
        pay = 0.0
        if rec_l:
            pay += c_l
        if rec_h:
            pay += c_h
        spend += pay
        c = (1.0 - beta) * pay
        if not ok:
            c += beta * float(delta) * float(delta)
        cost += c
        out_delta[t] = delta
        out_action[t] = a
        flags = 0
        if arr_l:
            flags |= 1
        if arr_h:
            flags |= 2
        if ok:
            flags |= 12
            updates += 1
            delta = 1
        else:
            delta += 1
        out_flags[t] = flags
    return delta, cost, spend, updates
