# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled tick kernel. Mirrors ``_kernel_py.advance`` operation for operation."""

from libc.math cimport isfinite

cdef enum:
    NJ = 7


cdef inline void _step(double* q, double* qd, const double* tau,
                       const double[::1] inertia, const double[::1] damping,
                       double dt, double limit) noexcept nogil:
    cdef int i
    cdef double acc, qd_new, q_new
    for i in range(NJ):
        acc = (tau[i] - damping[i] * qd[i]) / inertia[i]
        qd_new = qd[i] + dt * acc
        q_new = q[i] + dt * qd_new
        if q_new > limit:
            q_new = limit
            qd_new = 0.0
        elif q_new < -limit:
            q_new = -limit
            qd_new = 0.0
        q[i] = q_new
        qd[i] = qd_new


def advance(int k0, int k1, double dt,
            double[::1] q_l, double[::1] qd_l, double[::1] q_f, double[::1] qd_f,
            const double[::1] held_q, const double[::1] held_qd, const double[::1] held_tau,
            const double[:, ::1] q_ref, const double[:, ::1] qd_ref, const double[:, ::1] contact,
            const double[::1] p_gain, const double[::1] d_gain, double k_scale,
            const double[::1] inertia_l, const double[::1] damping_l,
            const double[::1] inertia_f, const double[::1] damping_f,
            double limit,
            double[:, ::1] out_q_l, double[:, ::1] out_qd_l,
            double[:, ::1] out_q_f, double[:, ::1] out_qd_f,
            double[:, ::1] out_tau_l, double[:, ::1] out_tau_f):
    cdef int k, i
    cdef double tau_l[NJ]
    cdef double tau_f[NJ]
    cdef double applied[NJ]
    cdef bint ok
    cdef int failed = -1
    cdef double* ql = &q_l[0]
    cdef double* qdl = &qd_l[0]
    cdef double* qf = &q_f[0]
    cdef double* qdf = &qd_f[0]

    for i in range(NJ):
        tau_l[i] = k_scale * held_tau[i]

    with nogil:
        for k in range(k0, k1):
            ok = True
            for i in range(NJ):
                out_q_l[k, i] = ql[i]
                out_qd_l[k, i] = qdl[i]
                out_q_f[k, i] = qf[i]
                out_qd_f[k, i] = qdf[i]
                tau_f[i] = p_gain[i] * (held_q[i] - qf[i]) + d_gain[i] * (held_qd[i] - qdf[i])
                out_tau_f[k, i] = tau_f[i]
                out_tau_l[k, i] = tau_l[i]
                if not isfinite(tau_f[i]):
                    ok = False
            if not ok:
                failed = k
                break

            for i in range(NJ):
                applied[i] = tau_f[i] + contact[k, i]
            _step(qf, qdf, applied, inertia_f, damping_f, dt, limit)

            for i in range(NJ):
                applied[i] = p_gain[i] * (q_ref[k, i] - ql[i]) + d_gain[i] * (qd_ref[k, i] - qdl[i]) + tau_l[i]
            _step(ql, qdl, applied, inertia_l, damping_l, dt, limit)

            for i in range(NJ):
                if not (isfinite(qf[i]) and isfinite(qdf[i]) and isfinite(ql[i]) and isfinite(qdl[i])):
                    ok = False
            if not ok:
                failed = k
                break
    return failed
