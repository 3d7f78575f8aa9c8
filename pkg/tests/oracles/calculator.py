"""Stand-alone calculator for the hand-evaluated reference values.

Deliberately self-contained: nothing here imports the package under test, and
each formula is written out from its textual definition rather than shared
with the implementation.
"""

import math

# Table of default constants used by the reference cases.
R_SUCCESS = 100.0
R_COLLISION = -100.0
K_SPEED = 1.0
K_TARGET, K_TARGET_PEN = 5.0, 6.0
K_FOV, K_FOV_PEN = 3.0, 5.0
K_DANGER = -10.0
THETA_FOV = 2.0 * math.pi / 3.0
RHO_DANGER = 0.7
LOOKAHEAD, K_X = 0.5, 2.0
THETA_ALIGN, THETA_TURN = math.pi / 6.0, math.pi / 2.0
V_MAX_X, V_MAX_W = 1.0, 1.0


def clip(v, lo, hi):
    return lo if v < lo else hi if v > hi else v


def arc_step(x, y, th, v, w, dt):
    if abs(w) < 1e-9:
        return x + v * dt * math.cos(th), y + v * dt * math.sin(th), th
    th1 = th + w * dt
    return x + v / w * (math.sin(th1) - math.sin(th)), y - v / w * (math.cos(th1) - math.cos(th)), th1


def pcl_point(rho, beam, rho_max):
    return rho / rho_max * math.cos(beam), rho / rho_max * math.sin(beam)


def target_feature(rho, theta, rho_max_target):
    return min(rho, rho_max_target) / rho_max_target, theta / math.pi


def dense_reward(v_norm, theta_t, closer, min_range):
    speed = K_SPEED * v_norm * math.cos(theta_t)
    target = (K_TARGET if closer else 0.0) - K_TARGET_PEN
    fov = K_FOV * math.cos(theta_t) - K_FOV_PEN if abs(theta_t) > THETA_FOV else 0.0
    danger = K_DANGER if min_range < RHO_DANGER else 0.0
    return speed + target + fov + danger


def tracker(x_wp, y_wp):
    th = math.atan2(y_wp, x_wp)
    gate = 1.0 if abs(th) < THETA_ALIGN else 0.0
    vx = clip(gate * K_X * x_wp, 0.0, V_MAX_X)
    if abs(th) < THETA_TURN:
        w = clip(2.0 * y_wp / LOOKAHEAD**2, -V_MAX_W, V_MAX_W)
    else:
        w = V_MAX_W if th >= 0 else -V_MAX_W
    return vx, w


def feedback(expert, agent, thresh=(0.1, 0.1)):
    out = []
    for e, a, t in zip(expert, agent, thresh):
        d = e - a
        out.append(0.0 if abs(d) <= t else math.copysign(1.0, d))
    return tuple(out)


def corrected_label(a, h, e):
    lo, hi = (0.0, -V_MAX_W), (V_MAX_X, V_MAX_W)
    return tuple(clip(ai + e * hi_, l, u) for ai, hi_, l, u in zip(a, h, lo, hi))


def td_target(r, terminal, q_next, gamma):
    return r if terminal else r + gamma * q_next


def ring_mean(outcomes, k):
    slots = [0] * k
    for i, o in enumerate(outcomes):
        slots[i % k] = 1 if o else 0
    return sum(slots) / k


def lambda_next(lam, g_rl, g_il, lr=0.025, lam_min=1.0):
    d = lam * g_il - g_rl
    s = (d > 0) - (d < 0)
    return max(lam - lr * s * g_il, lam_min)


def mixed(z, lam, j_rl, j_il):
    return z * j_rl + lam * (1.0 - z) * j_il


def cases():
    """Reference cases: name -> (calculator value, value stated alongside the case)."""
    s2 = math.sqrt(2.0) / 4.0  # 0.3536 in the stated case
    return {
        "arc_step": (arc_step(0.0, 0.0, 0.0, 1.0, 1.0, 0.2), (0.19867, 0.01993, 0.2)),
        "pcl_point": (pcl_point(9.0, 0.0, 18.0), (0.5, 0.0)),
        "target_feature": (target_feature(36.0, math.pi / 2, 18.0), (1.0, 0.5)),
        "reward_aligned": (dense_reward(1.0, 0.0, True, 5.0), 0.0),
        "reward_behind": (dense_reward(0.0, math.pi, False, 5.0), -14.0),
        "tracker_ahead": (tracker(0.5, 0.0), (1.0, 0.0)),
        "tracker_diag": (tracker(s2, s2), (0.0, 1.0)),
        "tracker_behind": (tracker(-0.5, 0.0), (0.0, 1.0)),
        "feedback": (feedback((1.0, 0.0), (0.5, 0.3)), (1.0, -1.0)),
        "label_clip_x": (corrected_label((0.9, 0.0), (1.0, 0.0), 0.5), (1.0, 0.0)),
        "label_clip_w": (corrected_label((0.0, -0.8), (0.0, -1.0), 0.5), (0.0, -1.0)),
        "td_target": (td_target(1.0, False, 10.0, 0.99), 10.9),
        "z_first": (ring_mean([1], 100), 0.01),
        "lambda_step": (lambda_next(1.0, 6.0, 2.0), 1.05),
        "mixed_loss": (mixed(0.5, 2.0, -3.0, 0.4), -1.1),
    }
