"""Pure-Python tick kernel, used when the compiled extension is unavailable.

Must stay bit-for-bit equivalent to ``_kernel.pyx``: same operations, same
association order, no fused multiply-add.
"""

import numpy as np


def advance(k0, k1, dt,
            q_l, qd_l, q_f, qd_f,
            held_q, held_qd, held_tau,
            q_ref, qd_ref, contact,
            p_gain, d_gain, k_scale,
            inertia_l, damping_l, inertia_f, damping_f,
            limit,
            out_q_l, out_qd_l, out_q_f, out_qd_f, out_tau_l, out_tau_f):
    """Run control ticks ``k0 .. k1-1`` in place.

    State arrays are updated in place; the pre-step state and the torques of
    each tick are written to row ``k`` of the output arrays. Returns -1, or the
    index of the first tick that produced a non-finite value.
    """
    # held values are constant over the span
    tau_l = k_scale * held_tau
    finite = np.isfinite
    for k in range(k0, k1):
        out_q_l[k] = q_l
        out_qd_l[k] = qd_l
        out_q_f[k] = q_f
        out_qd_f[k] = qd_f

        tau_f = p_gain * (held_q - q_f) + d_gain * (held_qd - qd_f)
        out_tau_f[k] = tau_f
        out_tau_l[k] = tau_l
        if not finite(tau_f).all():
            return k

        applied_f = tau_f + contact[k]
        acc = (applied_f - damping_f * qd_f) / inertia_f
        qd_new = qd_f + dt * acc
        q_new = q_f + dt * qd_new
        _clamp(q_new, qd_new, limit)
        q_f[:] = q_new
        qd_f[:] = qd_new

        applied_l = p_gain * (q_ref[k] - q_l) + d_gain * (qd_ref[k] - qd_l) + tau_l
        acc = (applied_l - damping_l * qd_l) / inertia_l
        qd_new = qd_l + dt * acc
        q_new = q_l + dt * qd_new
        _clamp(q_new, qd_new, limit)
        q_l[:] = q_new
        qd_l[:] = qd_new

        if not (finite(q_f).all() and finite(qd_f).all() and finite(q_l).all() and finite(qd_l).all()):
            return k
    return -1


def _clamp(q, qd, limit):
    hi = q > limit
    lo = q < -limit
    if hi.any() or lo.any():
        q[hi] = limit
        q[lo] = -limit
        qd[hi | lo] = 0.0
