# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: batched chain dynamics, rotation-history encoding,
the hysteresis play operator, and LSTM forward/backward passes.

Mirrors lidym._kernels_np (same signatures, same math); see that module
for the conventions.  Matrix products inside the LSTM passes go through
BLAS dgemm, everything else is plain C loops.
"""

import numpy as np

from libc.math cimport cos, exp, fabs, sin, tanh
from scipy.linalg.cython_blas cimport dgemm

cdef char _CHAR_N = 78  # 'N'
cdef char _CHAR_T = 84  # 'T'


# ---------------------------------------------------------------------------
# small dense helpers (row-major 3x3 blocks)

cdef inline void _mm33(const double* A, const double* B, double* C) noexcept nogil:
    cdef int r, c
    for r in range(3):
        for c in range(3):
            C[3 * r + c] = A[3 * r] * B[c] + A[3 * r + 1] * B[3 + c] + A[3 * r + 2] * B[6 + c]


cdef inline void _mv3(const double* A, const double* v, double* out) noexcept nogil:
    cdef int r
    for r in range(3):
        out[r] = A[3 * r] * v[0] + A[3 * r + 1] * v[1] + A[3 * r + 2] * v[2]


cdef inline void _mtv3(const double* A, const double* v, double* out) noexcept nogil:
    # out = A^T v
    cdef int c
    for c in range(3):
        out[c] = A[c] * v[0] + A[3 + c] * v[1] + A[6 + c] * v[2]


cdef inline void _cross(const double* a, const double* b, double* out) noexcept nogil:
    out[0] = a[1] * b[2] - a[2] * b[1]
    out[1] = a[2] * b[0] - a[0] * b[2]
    out[2] = a[0] * b[1] - a[1] * b[0]


cdef inline double _dot3(const double* a, const double* b) noexcept nogil:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


cdef inline void _rodrigues(const double* u, double q, double* R) noexcept nogil:
    cdef double c = cos(q)
    cdef double s = sin(q)
    cdef double v = 1.0 - c
    R[0] = c + v * u[0] * u[0]
    R[1] = -s * u[2] + v * u[0] * u[1]
    R[2] = s * u[1] + v * u[0] * u[2]
    R[3] = s * u[2] + v * u[1] * u[0]
    R[4] = c + v * u[1] * u[1]
    R[5] = -s * u[0] + v * u[1] * u[2]
    R[6] = -s * u[1] + v * u[2] * u[0]
    R[7] = s * u[0] + v * u[2] * u[1]
    R[8] = c + v * u[2] * u[2]


cdef inline double _sign(double x) noexcept nogil:
    if x > 0.0:
        return 1.0
    if x < 0.0:
        return -1.0
    return 0.0


cdef inline double _sigm(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


cdef inline void _inertia_mv(const double* I6, const double* v, double* out) noexcept nogil:
    # I6 = [Ixx, Ixy, Ixz, Iyy, Iyz, Izz]
    out[0] = I6[0] * v[0] + I6[1] * v[1] + I6[2] * v[2]
    out[1] = I6[1] * v[0] + I6[3] * v[1] + I6[4] * v[2]
    out[2] = I6[2] * v[0] + I6[4] * v[1] + I6[5] * v[2]


cdef void _outward_state(const double* rot, const double* trans, const double* axes,
                         const double* gravity, const double* q, const double* qd,
                         const double* qdd, Py_ssize_t n,
                         double* R, double* O, double* Z,
                         double* W, double* Wd, double* A) noexcept nogil:
    """One-state outward recursion; outputs are (n,3x3)/(n,3) work arrays."""
    cdef double Rb[9]
    cdef double Rpre[9]
    cdef double Rloc[9]
    cdef double ob[3]
    cdef double w[3]
    cdef double wd[3]
    cdef double a[3]
    cdef double do_[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef Py_ssize_t i, k
    for k in range(9):
        Rb[k] = 0.0
    Rb[0] = Rb[4] = Rb[8] = 1.0
    for k in range(3):
        ob[k] = 0.0
        w[k] = 0.0
        wd[k] = 0.0
        a[k] = -gravity[k]
    for i in range(n):
        _mm33(Rb, rot + 9 * i, Rpre)
        _mv3(Rb, trans + 3 * i, t1)
        for k in range(3):
            O[3 * i + k] = ob[k] + t1[k]
            do_[k] = t1[k]
        _mv3(Rpre, axes + 3 * i, Z + 3 * i)
        _rodrigues(axes + 3 * i, q[i], Rloc)
        _mm33(Rpre, Rloc, R + 9 * i)
        # a += wd x do + w x (w x do)
        _cross(wd, do_, t1)
        _cross(w, do_, t2)
        for k in range(3):
            a[k] += t1[k]
        _cross(w, t2, t1)
        for k in range(3):
            a[k] += t1[k]
        # wd += z*qdd + (w x z)*qd ; then w += z*qd
        _cross(w, Z + 3 * i, t1)
        for k in range(3):
            wd[k] += Z[3 * i + k] * qdd[i] + t1[k] * qd[i]
        for k in range(3):
            w[k] += Z[3 * i + k] * qd[i]
        for k in range(3):
            W[3 * i + k] = w[k]
            Wd[3 * i + k] = wd[k]
            A[3 * i + k] = a[k]
        for k in range(9):
            Rb[k] = R[9 * i + k]
        for k in range(3):
            ob[k] = O[3 * i + k]


def regressor_batch(const double[:, :, ::1] rot, const double[:, ::1] trans, const double[:, ::1] axes,
                    const double[::1] gravity, const double[:, ::1] Q, const double[:, ::1] Qd,
                    const double[:, ::1] Qdd):
    """Torque regressor K for a batch of states, shape (N, n, 12n)."""
    cdef Py_ssize_t N = Q.shape[0], n = Q.shape[1]
    K_arr = np.zeros((N, n, 12 * n))
    cdef double[:, :, ::1] K = K_arr
    work = np.empty((6, n, 9))
    cdef double[:, :, ::1] wk = work
    blocks = np.empty((2, n, 30))
    cdef double[:, :, ::1] bk = blocks
    cdef double* Rw = &wk[0, 0, 0]
    cdef double* Ow = &wk[1, 0, 0]
    cdef double* Zw = &wk[2, 0, 0]
    cdef double* Ww = &wk[3, 0, 0]
    cdef double* Wdw = &wk[4, 0, 0]
    cdef double* Aw = &wk[5, 0, 0]
    cdef double* FB = &bk[0, 0, 0]
    cdef double* NB = &bk[1, 0, 0]
    cdef Py_ssize_t s, i, j, k, r, c
    cdef double Sw[9]
    cdef double T1[9]
    cdef double T2[9]
    cdef double Sd[9]
    cdef double wl[3]
    cdef double wdl[3]
    cdef double t1[3]
    cdef double d[3]
    cdef double mc, acc
    cdef const double* Ri
    cdef const double* zj
    cdef double* Fi
    cdef double* Ni
    with nogil:
        for s in range(N):
            _outward_state(&rot[0, 0, 0], &trans[0, 0], &axes[0, 0], &gravity[0],
                           &Q[s, 0], &Qd[s, 0], &Qdd[s, 0], n,
                           Rw, Ow, Zw, Ww, Wdw, Aw)
            for i in range(n):
                Ri = Rw + 9 * i
                Fi = FB + 30 * i
                Ni = NB + 30 * i
                for k in range(30):
                    Fi[k] = 0.0
                    Ni[k] = 0.0
                # skew(w)
                Sw[0] = 0.0; Sw[1] = -Ww[3 * i + 2]; Sw[2] = Ww[3 * i + 1]
                Sw[3] = Ww[3 * i + 2]; Sw[4] = 0.0; Sw[5] = -Ww[3 * i]
                Sw[6] = -Ww[3 * i + 1]; Sw[7] = Ww[3 * i]; Sw[8] = 0.0
                # T1 = skew(wd) + skew(w) skew(w)
                _mm33(Sw, Sw, T1)
                T1[1] += -Wdw[3 * i + 2]; T1[2] += Wdw[3 * i + 1]
                T1[3] += Wdw[3 * i + 2]; T1[5] += -Wdw[3 * i]
                T1[6] += -Wdw[3 * i + 1]; T1[7] += Wdw[3 * i]
                _mm33(T1, Ri, T2)
                for r in range(3):
                    Fi[10 * r] = Aw[3 * i + r]
                    for c in range(3):
                        Fi[10 * r + 1 + c] = T2[3 * r + c]
                # N block: columns 1..3 = -skew(a) R
                T1[0] = 0.0; T1[1] = Aw[3 * i + 2]; T1[2] = -Aw[3 * i + 1]
                T1[3] = -Aw[3 * i + 2]; T1[4] = 0.0; T1[5] = Aw[3 * i]
                T1[6] = Aw[3 * i + 1]; T1[7] = -Aw[3 * i]; T1[8] = 0.0
                _mm33(T1, Ri, T2)
                for r in range(3):
                    for c in range(3):
                        Ni[10 * r + 1 + c] = T2[3 * r + c]
                # N block: columns 4..9 = R L(R^T wd) + skew(w) R L(R^T w)
                _mtv3(Ri, Wdw + 3 * i, wdl)
                _mtv3(Ri, Ww + 3 * i, wl)
                _mm33(Sw, Ri, T2)
                for r in range(3):
                    # row r of R @ L(wdl): L rows depend on wdl pattern
                    Ni[10 * r + 4] += Ri[3 * r] * wdl[0] + T2[3 * r] * wl[0]
                    Ni[10 * r + 5] += (Ri[3 * r] * wdl[1] + Ri[3 * r + 1] * wdl[0]
                                       + T2[3 * r] * wl[1] + T2[3 * r + 1] * wl[0])
                    Ni[10 * r + 6] += (Ri[3 * r] * wdl[2] + Ri[3 * r + 2] * wdl[0]
                                       + T2[3 * r] * wl[2] + T2[3 * r + 2] * wl[0])
                    Ni[10 * r + 7] += Ri[3 * r + 1] * wdl[1] + T2[3 * r + 1] * wl[1]
                    Ni[10 * r + 8] += (Ri[3 * r + 1] * wdl[2] + Ri[3 * r + 2] * wdl[1]
                                       + T2[3 * r + 1] * wl[2] + T2[3 * r + 2] * wl[1])
                    Ni[10 * r + 9] += Ri[3 * r + 2] * wdl[2] + T2[3 * r + 2] * wl[2]
            for i in range(n):
                Fi = FB + 30 * i
                Ni = NB + 30 * i
                for j in range(i + 1):
                    for k in range(3):
                        d[k] = Ow[3 * i + k] - Ow[3 * j + k]
                    Sd[0] = 0.0; Sd[1] = -d[2]; Sd[2] = d[1]
                    Sd[3] = d[2]; Sd[4] = 0.0; Sd[5] = -d[0]
                    Sd[6] = -d[1]; Sd[7] = d[0]; Sd[8] = 0.0
                    zj = Zw + 3 * j
                    for c in range(10):
                        acc = 0.0
                        for r in range(3):
                            mc = (Ni[10 * r + c] + Sd[3 * r] * Fi[c]
                                  + Sd[3 * r + 1] * Fi[10 + c] + Sd[3 * r + 2] * Fi[20 + c])
                            acc += zj[r] * mc
                        K[s, j, 12 * i + c] = acc
                K[s, i, 12 * i + 10] = Qd[s, i]
                K[s, i, 12 * i + 11] = _sign(Qd[s, i])
    return K_arr


def rnea_batch(const double[:, :, ::1] rot, const double[:, ::1] trans, const double[:, ::1] axes,
               const double[::1] gravity, const double[:, ::1] phi, const double[:, ::1] Q,
               const double[:, ::1] Qd, const double[:, ::1] Qdd):
    """Inverse dynamics torques for a batch of states, shape (N, n)."""
    cdef Py_ssize_t N = Q.shape[0], n = Q.shape[1]
    tau_arr = np.empty((N, n))
    cdef double[:, ::1] tau = tau_arr
    work = np.empty((8, n, 9))
    cdef double[:, :, ::1] wk = work
    cdef double* Rw = &wk[0, 0, 0]
    cdef double* Ow = &wk[1, 0, 0]
    cdef double* Zw = &wk[2, 0, 0]
    cdef double* Ww = &wk[3, 0, 0]
    cdef double* Wdw = &wk[4, 0, 0]
    cdef double* Aw = &wk[5, 0, 0]
    cdef double* Fn = &wk[6, 0, 0]
    cdef double* Nn = &wk[7, 0, 0]
    cdef Py_ssize_t s, i, k
    cdef double hb[3]
    cdef double wl[3]
    cdef double wdl[3]
    cdef double t1[3]
    cdef double t2[3]
    cdef double fi[3]
    cdef double ni[3]
    cdef double fnext[3]
    cdef double nnext[3]
    cdef const double* Ri
    with nogil:
        for s in range(N):
            _outward_state(&rot[0, 0, 0], &trans[0, 0], &axes[0, 0], &gravity[0],
                           &Q[s, 0], &Qd[s, 0], &Qdd[s, 0], n,
                           Rw, Ow, Zw, Ww, Wdw, Aw)
            for i in range(n):
                Ri = Rw + 9 * i
                _mv3(Ri, &phi[i, 1], hb)
                # F = m a + wd x hb + w x (w x hb)
                _cross(Wdw + 3 * i, hb, t1)
                _cross(Ww + 3 * i, hb, t2)
                for k in range(3):
                    Fn[3 * i + k] = phi[i, 0] * Aw[3 * i + k] + t1[k]
                _cross(Ww + 3 * i, t2, t1)
                for k in range(3):
                    Fn[3 * i + k] += t1[k]
                # N = R I (R^T wd) + w x (R I (R^T w)) + hb x a
                _mtv3(Ri, Wdw + 3 * i, wdl)
                _inertia_mv(&phi[i, 4], wdl, t1)
                _mv3(Ri, t1, t2)
                for k in range(3):
                    Nn[3 * i + k] = t2[k]
                _mtv3(Ri, Ww + 3 * i, wl)
                _inertia_mv(&phi[i, 4], wl, t1)
                _mv3(Ri, t1, t2)
                _cross(Ww + 3 * i, t2, t1)
                for k in range(3):
                    Nn[3 * i + k] += t1[k]
                _cross(hb, Aw + 3 * i, t1)
                for k in range(3):
                    Nn[3 * i + k] += t1[k]
            for k in range(3):
                fnext[k] = 0.0
                nnext[k] = 0.0
            for i in range(n - 1, -1, -1):
                for k in range(3):
                    fi[k] = Fn[3 * i + k] + fnext[k]
                    ni[k] = Nn[3 * i + k] + nnext[k]
                if i < n - 1:
                    for k in range(3):
                        t1[k] = Ow[3 * (i + 1) + k] - Ow[3 * i + k]
                    _cross(t1, fnext, t2)
                    for k in range(3):
                        ni[k] += t2[k]
                tau[s, i] = (_dot3(Zw + 3 * i, ni)
                             + phi[i, 10] * Qd[s, i] + phi[i, 11] * _sign(Qd[s, i]))
                for k in range(3):
                    fnext[k] = fi[k]
                    nnext[k] = ni[k]
    return tau_arr


def rotation_encode(const double[:, ::1] Q, double deadband, double clamp):
    """Rotation-history channel r for a position series Q (T, n)."""
    cdef Py_ssize_t T = Q.shape[0], n = Q.shape[1]
    out_arr = np.zeros((T, n))
    cdef double[:, ::1] out = out_arr
    state = np.empty((3, n))
    cdef double[:, ::1] st = state
    cdef double* anchor = &st[0, 0]
    cdef double* prev = &st[1, 0]
    cdef double* direc = &st[2, 0]
    cdef Py_ssize_t t, j
    cdef double delta, sd, r
    if T == 0:
        return out_arr
    with nogil:
        for j in range(n):
            anchor[j] = Q[0, j]
            prev[j] = Q[0, j]
            direc[j] = 0.0
        for t in range(1, T):
            for j in range(n):
                delta = Q[t, j] - prev[j]
                if fabs(delta) > deadband:
                    sd = 1.0 if delta > 0.0 else -1.0
                    if direc[j] != 0.0 and sd != direc[j]:
                        anchor[j] = prev[j]
                    direc[j] = sd
                    prev[j] = Q[t, j]
                r = prev[j] - anchor[j]
                if r > clamp:
                    r = clamp
                elif r < -clamp:
                    r = -clamp
                out[t, j] = r
    return out_arr


def play_hysteresis(const double[:, ::1] Q, const double[::1] width):
    """Play operator state z for a position series Q (T, n)."""
    cdef Py_ssize_t T = Q.shape[0], n = Q.shape[1]
    Z_arr = np.empty((T, n))
    cdef double[:, ::1] Z = Z_arr
    cdef Py_ssize_t t, j
    cdef double z, lo, hi
    if T == 0:
        return Z_arr
    with nogil:
        for j in range(n):
            Z[0, j] = Q[0, j]
        for t in range(1, T):
            for j in range(n):
                z = Z[t - 1, j]
                lo = Q[t, j] - width[j]
                hi = Q[t, j] + width[j]
                if z < lo:
                    z = lo
                if z > hi:
                    z = hi
                Z[t, j] = z
    return Z_arr


# ---------------------------------------------------------------------------
# LSTM passes; row-major GEMM wrappers over column-major BLAS

cdef inline void _gemm_nn(const double* A, int lda, const double* B, int ldb,
                          double* C, int ldc, int m, int k, int n, double beta) noexcept nogil:
    # row-major C(m,n) = A(m,k) @ B(k,n) + beta C; ld* = row strides
    cdef double one = 1.0
    dgemm(&_CHAR_N, &_CHAR_N, &n, &m, &k, &one, <double*>B, &ldb, <double*>A, &lda, &beta, C, &ldc)


cdef inline void _gemm_tn(const double* A, int lda, const double* B, int ldb,
                          double* C, int ldc, int m, int k, int n, double beta) noexcept nogil:
    # row-major C(m,n) = A(k,m)^T @ B(k,n) + beta C
    cdef double one = 1.0
    dgemm(&_CHAR_N, &_CHAR_T, &n, &m, &k, &one, <double*>B, &ldb, <double*>A, &lda, &beta, C, &ldc)


cdef inline void _gemm_nt(const double* A, int lda, const double* B, int ldb,
                          double* C, int ldc, int m, int k, int n, double beta) noexcept nogil:
    # row-major C(m,n) = A(m,k) @ B(n,k)^T + beta C
    cdef double one = 1.0
    dgemm(&_CHAR_T, &_CHAR_N, &n, &m, &k, &one, <double*>B, &ldb, <double*>A, &lda, &beta, C, &ldc)


def lstm_forward(const double[:, :, ::1] X, const double[:, ::1] Wx, const double[:, ::1] Wh,
                 const double[::1] b):
    """Single-layer LSTM forward pass; see the numpy twin for semantics."""
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], I = X.shape[2]
    cdef Py_ssize_t H = Wh.shape[0]
    Hs_arr = np.zeros((B, T, H))
    Cs_arr = np.zeros((B, T, H))
    G_arr = np.empty((B, T, 4 * H))
    A_arr = np.empty((B, 4 * H))
    cdef double[:, :, ::1] Hs = Hs_arr
    cdef double[:, :, ::1] Cs = Cs_arr
    cdef double[:, :, ::1] G = G_arr
    cdef double[:, ::1] A = A_arr
    cdef Py_ssize_t t, bb, hh
    cdef double gi, gf, gg, go, c, cprev
    cdef int mB = <int>B, kI = <int>I, kH = <int>H, n4H = <int>(4 * H)
    cdef int ldX = <int>(T * I), ldH = <int>(T * H)
    with nogil:
        for t in range(T):
            _gemm_nn(&X[0, t, 0], ldX, &Wx[0, 0], n4H, &A[0, 0], n4H, mB, kI, n4H, 0.0)
            if t > 0:
                _gemm_nn(&Hs[0, t - 1, 0], ldH, &Wh[0, 0], n4H, &A[0, 0], n4H, mB, kH, n4H, 1.0)
            for bb in range(B):
                for hh in range(H):
                    gi = _sigm(A[bb, hh] + b[hh])
                    gf = _sigm(A[bb, H + hh] + b[H + hh])
                    gg = tanh(A[bb, 2 * H + hh] + b[2 * H + hh])
                    go = _sigm(A[bb, 3 * H + hh] + b[3 * H + hh])
                    cprev = Cs[bb, t - 1, hh] if t > 0 else 0.0
                    c = gf * cprev + gi * gg
                    Cs[bb, t, hh] = c
                    Hs[bb, t, hh] = go * tanh(c)
                    G[bb, t, hh] = gi
                    G[bb, t, H + hh] = gf
                    G[bb, t, 2 * H + hh] = gg
                    G[bb, t, 3 * H + hh] = go
    return Hs_arr, Cs_arr, G_arr


def lstm_backward(const double[:, :, ::1] X, const double[:, ::1] Wx, const double[:, ::1] Wh,
                  const double[:, :, ::1] Hs, const double[:, :, ::1] Cs, const double[:, :, ::1] G,
                  const double[:, :, ::1] dH):
    """Backward pass matching :func:`lstm_forward`; returns dX, dWx, dWh, db."""
    cdef Py_ssize_t B = X.shape[0], T = X.shape[1], I = X.shape[2]
    cdef Py_ssize_t H = Wh.shape[0]
    dX_arr = np.empty((B, T, I))
    dWx_arr = np.zeros((I, 4 * H))
    dWh_arr = np.zeros((H, 4 * H))
    db_arr = np.zeros(4 * H)
    dA_arr = np.empty((B, 4 * H))
    dh_arr = np.zeros((B, H))
    cdef double[:, :, ::1] dX = dX_arr
    cdef double[:, ::1] dWx = dWx_arr
    cdef double[:, ::1] dWh = dWh_arr
    cdef double[::1] db = db_arr
    cdef double[:, ::1] dA = dA_arr
    cdef double[:, ::1] dhc = dh_arr
    dc_arr = np.zeros((B, H))
    cdef double[:, ::1] dcc = dc_arr
    cdef Py_ssize_t t, bb, hh, kk
    cdef double gi, gf, gg, go, tc, dht, dct, cprev
    cdef int mB = <int>B, kI = <int>I, kH = <int>H, n4H = <int>(4 * H)
    cdef int ldX = <int>(T * I), ldH = <int>(T * H)
    with nogil:
        for t in range(T - 1, -1, -1):
            for bb in range(B):
                for hh in range(H):
                    gi = G[bb, t, hh]
                    gf = G[bb, t, H + hh]
                    gg = G[bb, t, 2 * H + hh]
                    go = G[bb, t, 3 * H + hh]
                    tc = tanh(Cs[bb, t, hh])
                    dht = dH[bb, t, hh] + dhc[bb, hh]
                    dct = dcc[bb, hh] + dht * go * (1.0 - tc * tc)
                    cprev = Cs[bb, t - 1, hh] if t > 0 else 0.0
                    dA[bb, hh] = dct * gg * gi * (1.0 - gi)
                    dA[bb, H + hh] = dct * cprev * gf * (1.0 - gf)
                    dA[bb, 2 * H + hh] = dct * gi * (1.0 - gg * gg)
                    dA[bb, 3 * H + hh] = dht * tc * go * (1.0 - go)
                    dcc[bb, hh] = dct * gf
                    db[hh] += dA[bb, hh]
                    db[H + hh] += dA[bb, H + hh]
                    db[2 * H + hh] += dA[bb, 2 * H + hh]
                    db[3 * H + hh] += dA[bb, 3 * H + hh]
            # dWx += X[:,t,:]^T dA ; dWh += Hs[:,t-1,:]^T dA
            _gemm_tn(&X[0, t, 0], ldX, &dA[0, 0], n4H, &dWx[0, 0], n4H, kI, mB, n4H, 1.0)
            if t > 0:
                _gemm_tn(&Hs[0, t - 1, 0], ldH, &dA[0, 0], n4H, &dWh[0, 0], n4H, kH, mB, n4H, 1.0)
            # dX[:,t,:] = dA @ Wx^T ; dh = dA @ Wh^T
            _gemm_nt(&dA[0, 0], n4H, &Wx[0, 0], n4H, &dX[0, t, 0], ldX, mB, n4H, kI, 0.0)
            _gemm_nt(&dA[0, 0], n4H, &Wh[0, 0], n4H, &dhc[0, 0], kH, mB, n4H, kH, 0.0)
    return dX_arr, dWx_arr, dWh_arr, db_arr
