"""Pure-numpy implementations of the hot kernels.

Same call signatures as the compiled module ``lidym._kernels``; selected as
a fallback when the extension is unavailable (see ``lidym.kernels``).  All
arrays are float64 and C-contiguous.

Conventions for the dynamics kernels: quantities live in the base frame,
per-link inertial parameters are taken about the link frame *origin* (not
the center of mass), and the parameter layout per link is

    [m, m*cx, m*cy, m*cz, Ixx, Ixy, Ixz, Iyy, Iyz, Izz, Fv, Fc]

Gravity enters through the classic trick of accelerating the base at -g.
Joint friction is ``Fv*qd + Fc*sign(qd)`` with ``sign(0) = 0``.
"""

from __future__ import annotations

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _skew(v):
    out = np.zeros(v.shape[:-1] + (3, 3))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 1] = -z
    out[..., 0, 2] = y
    out[..., 1, 0] = z
    out[..., 1, 2] = -x
    out[..., 2, 0] = -y
    out[..., 2, 1] = x
    return out


def _inertia_map(v):
    """Rows of L(v) such that L(v) @ [Ixx,Ixy,Ixz,Iyy,Iyz,Izz] = I @ v."""
    out = np.zeros(v.shape[:-1] + (3, 6))
    x, y, z = v[..., 0], v[..., 1], v[..., 2]
    out[..., 0, 0] = x
    out[..., 0, 1] = y
    out[..., 0, 2] = z
    out[..., 1, 1] = x
    out[..., 1, 3] = y
    out[..., 1, 4] = z
    out[..., 2, 2] = x
    out[..., 2, 4] = y
    out[..., 2, 5] = z
    return out


def _rodrigues_batch(axis, angle):
    c = np.cos(angle)[:, None, None]
    s = np.sin(angle)[:, None, None]
    ux, uy, uz = axis
    skew = np.array([[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]])
    return c * np.eye(3) + s * skew + (1.0 - c) * np.outer(axis, axis)


def _outward(rot, trans, axes, gravity, Q, Qd, Qdd):
    """Outward recursion: frames, axes, velocities, accelerations.

    Returns R (N,n,3,3), O (N,n,3), Z (N,n,3), W, Wd, A (N,n,3) where A is
    the linear acceleration of the link-frame origin with -g folded in.
    """
    N, n = Q.shape
    R = np.empty((N, n, 3, 3))
    O = np.empty((N, n, 3))
    Z = np.empty((N, n, 3))
    W = np.empty((N, n, 3))
    Wd = np.empty((N, n, 3))
    A = np.empty((N, n, 3))
    Rb = np.broadcast_to(np.eye(3), (N, 3, 3))
    ob = np.zeros((N, 3))
    w = np.zeros((N, 3))
    wd = np.zeros((N, 3))
    a = np.tile(-gravity, (N, 1))
    for i in range(n):
        Rpre = Rb @ rot[i]
        o = ob + np.einsum("skj,j->sk", Rb, trans[i])
        z = np.einsum("skj,j->sk", Rpre, axes[i])
        Ri = Rpre @ _rodrigues_batch(axes[i], Q[:, i])
        do = o - ob
        a = a + np.cross(wd, do) + np.cross(w, np.cross(w, do))
        wd = wd + z * Qdd[:, i, None] + np.cross(w, z) * Qd[:, i, None]
        w = w + z * Qd[:, i, None]
        R[:, i] = Ri
        O[:, i] = o
        Z[:, i] = z
        W[:, i] = w
        Wd[:, i] = wd
        A[:, i] = a
        Rb, ob = Ri, o
    return R, O, Z, W, Wd, A


def regressor_batch(rot, trans, axes, gravity, Q, Qd, Qdd):
    """Torque regressor K for a batch of states, shape (N, n, 12n).

    tau = K(q, qd, qdd) @ phi for every parameter vector phi, by linearity
    of the Newton-Euler equations in the link parameters.
    """
    N, n = Q.shape
    R, O, Z, W, Wd, A = _outward(rot, trans, axes, gravity, Q, Qd, Qdd)
    Sw = _skew(W)
    FB = np.zeros((N, n, 3, 10))
    FB[..., 0] = A
    FB[..., 1:4] = (_skew(Wd) + Sw @ Sw) @ R
    NB = np.zeros((N, n, 3, 10))
    NB[..., 1:4] = -_skew(A) @ R
    wl = np.einsum("snkj,snk->snj", R, W)
    wdl = np.einsum("snkj,snk->snj", R, Wd)
    NB[..., 4:10] = R @ _inertia_map(wdl) + Sw @ (R @ _inertia_map(wl))

    K = np.zeros((N, n, 12 * n))
    for i in range(n):
        col = 12 * i
        for j in range(i + 1):
            M = NB[:, i] + _skew(O[:, i] - O[:, j]) @ FB[:, i]
            K[:, j, col:col + 10] = np.einsum("sd,sdc->sc", Z[:, j], M)
        K[:, i, col + 10] = Qd[:, i]
        K[:, i, col + 11] = np.sign(Qd[:, i])
    return K


def rnea_batch(rot, trans, axes, gravity, phi, Q, Qd, Qdd):
    """Inverse dynamics torques for a batch of states, shape (N, n).

    Direct recursive Newton-Euler evaluation; independent of the regressor
    assembly so the two act as mutual checks.
    """
    N, n = Q.shape
    R, O, Z, W, Wd, A = _outward(rot, trans, axes, gravity, Q, Qd, Qdd)
    m = phi[:, 0]
    h = phi[:, 1:4]
    Iv = phi[:, 4:10]
    Fv = phi[:, 10]
    Fc = phi[:, 11]

    hb = np.einsum("snij,nj->sni", R, h)
    wl = np.einsum("snkj,snk->snj", R, W)
    wdl = np.einsum("snkj,snk->snj", R, Wd)
    Iwl = np.einsum("snij,snj->sni", _inertia_map(wl), np.broadcast_to(Iv, (N, n, 6)))
    Iwdl = np.einsum("snij,snj->sni", _inertia_map(wdl), np.broadcast_to(Iv, (N, n, 6)))
    Fn = m[None, :, None] * A + np.cross(Wd, hb) + np.cross(W, np.cross(W, hb))
    Nn = (np.einsum("snij,snj->sni", R, Iwdl)
          + np.cross(W, np.einsum("snij,snj->sni", R, Iwl))
          + np.cross(hb, A))

    tau = np.empty((N, n))
    f_next = np.zeros((N, 3))
    n_next = np.zeros((N, 3))
    for i in range(n - 1, -1, -1):
        if i == n - 1:
            fi = Fn[:, i].copy()
            ni = Nn[:, i].copy()
        else:
            fi = Fn[:, i] + f_next
            ni = Nn[:, i] + n_next + np.cross(O[:, i + 1] - O[:, i], f_next)
        tau[:, i] = (np.einsum("sk,sk->s", Z[:, i], ni)
                     + Fv[i] * Qd[:, i] + Fc[i] * np.sign(Qd[:, i]))
        f_next, n_next = fi, ni
    return tau


def rotation_encode(Q, deadband, clamp):
    """Rotation-history channel r for a position series Q (T, n).

    Per joint: signed rotation since the last direction reversal, clamped
    to [-clamp, clamp].  Steps of magnitude <= deadband neither move the
    reference position nor change r.  The anchor starts at Q[0] (so
    r[0] = 0) and resets to the pre-reversal position on each reversal.
    """
    Q = np.asarray(Q, dtype=np.float64)
    T, n = Q.shape
    out = np.zeros((T, n))
    anchor = Q[0].copy()
    prev = Q[0].copy()
    direc = np.zeros(n)
    for t in range(1, T):
        q = Q[t]
        delta = q - prev
        acc = np.abs(delta) > deadband
        sd = np.where(delta > 0.0, 1.0, -1.0)
        rev = acc & (direc != 0.0) & (sd != direc)
        anchor = np.where(rev, prev, anchor)
        direc = np.where(acc, sd, direc)
        prev = np.where(acc, q, prev)
        r = prev - anchor
        out[t] = np.minimum(np.maximum(r, -clamp), clamp)
    return out


def play_hysteresis(Q, width):
    """Play (backlash) operator state z for a position series Q (T, n).

    z starts at Q[0] and tracks q through a dead zone of half-width
    ``width``: z <- min(q + w, max(q - w, z)), updated at every sample.
    """
    Q = np.asarray(Q, dtype=np.float64)
    T = Q.shape[0]
    Zs = np.empty_like(Q)
    z = Q[0].copy()
    Zs[0] = z
    for t in range(1, T):
        z = np.minimum(Q[t] + width, np.maximum(Q[t] - width, z))
        Zs[t] = z
    return Zs


def lstm_forward(X, Wx, Wh, b):
    """Single-layer LSTM forward pass over a window batch.

    X (B,T,I), Wx (I,4H), Wh (H,4H), b (4H); gate order i, f, g, o.
    Returns hidden states Hs (B,T,H), cell states Cs (B,T,H) and the
    post-activation gates G (B,T,4H) needed by the backward pass.
    Initial hidden and cell states are zero.
    """
    B, T, I = X.shape
    H = Wh.shape[0]
    Hs = np.empty((B, T, H))
    Cs = np.empty((B, T, H))
    G = np.empty((B, T, 4 * H))
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    XW = (X.reshape(-1, I) @ Wx).reshape(B, T, 4 * H)
    for t in range(T):
        a = XW[:, t] + h @ Wh + b
        i = _sigmoid(a[:, :H])
        f = _sigmoid(a[:, H:2 * H])
        g = np.tanh(a[:, 2 * H:3 * H])
        o = _sigmoid(a[:, 3 * H:])
        c = f * c + i * g
        h = o * np.tanh(c)
        G[:, t, :H] = i
        G[:, t, H:2 * H] = f
        G[:, t, 2 * H:3 * H] = g
        G[:, t, 3 * H:] = o
        Cs[:, t] = c
        Hs[:, t] = h
    return Hs, Cs, G


def lstm_backward(X, Wx, Wh, Hs, Cs, G, dH):
    """Backward pass matching :func:`lstm_forward`.

    dH (B,T,H) is the loss gradient w.r.t. every hidden state (zero rows
    for timesteps that do not feed the loss).  Returns dX, dWx, dWh, db.
    """
    B, T, I = X.shape
    H = Wh.shape[0]
    dX = np.empty_like(X)
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dh = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = G[:, t, :H]
        f = G[:, t, H:2 * H]
        g = G[:, t, 2 * H:3 * H]
        o = G[:, t, 3 * H:]
        dht = dH[:, t] + dh
        tc = np.tanh(Cs[:, t])
        dct = dc + dht * o * (1.0 - tc * tc)
        cprev = Cs[:, t - 1] if t > 0 else np.zeros((B, H))
        da = np.empty((B, 4 * H))
        da[:, :H] = dct * g * i * (1.0 - i)
        da[:, H:2 * H] = dct * cprev * f * (1.0 - f)
        da[:, 2 * H:3 * H] = dct * i * (1.0 - g * g)
        da[:, 3 * H:] = dht * tc * o * (1.0 - o)
        hprev = Hs[:, t - 1] if t > 0 else np.zeros((B, H))
        dWx += X[:, t].T @ da
        dWh += hprev.T @ da
        db += da.sum(axis=0)
        dX[:, t] = da @ Wx.T
        dh = da @ Wh.T
        dc = dct * f
    return dX, dWx, dWh, db
