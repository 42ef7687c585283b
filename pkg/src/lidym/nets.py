"""Torque-residual networks, built directly on numpy.

Four topologies share one contract: the input is a normalized feature
window of shape (B, T, D) and the output is a normalized 7-vector per
window.  Forward passes cache whatever the hand-written backward pass
needs; ``backward(dY)`` returns a gradient per parameter, verified
against central finite differences in the test suite.

Feature vector layout (D = 35 with everything enabled):
    [q(7), qd(7), qdd(7), r(7), tau_rbd(7)]
Dropping tau_rbd removes the last group (D = 28); dropping r as well
removes the fourth (D = 21).  The ordering never changes.

All weights start Xavier-uniform, all biases zero, from a seeded
generator, so a spec plus its seed pins every initial parameter bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractError, TrainingFault

N_JOINTS = 7
FEATURE_GROUPS = ("q", "qd", "qdd", "r", "tau_rbd")
VARIANTS = ("MLP-7", "LSTM-2", "LSTM-FCL", "TransformerEnc")

DEFAULT_WIDTHS = {
    "MLP-7": {"hidden": 100},
    "LSTM-2": {"hidden": 35},
    "LSTM-FCL": {"hidden": 35},
    "TransformerEnc": {"d_model": 64, "heads": 4, "layers": 2, "ffn": 128},
}


def input_dim(use_r, use_tau_rbd):
    """Feature dimension for the given ablation flags."""
    return N_JOINTS * (3 + int(use_r) + int(use_tau_rbd))


def feature_columns(use_r=True, use_tau_rbd=True):
    """Column labels of the feature matrix, in storage order."""
    groups = ["q", "qd", "qdd"]
    if use_r:
        groups.append("r")
    if use_tau_rbd:
        groups.append("tau_rbd")
    return [f"{g}{j + 1}" for g in groups for j in range(N_JOINTS)]


@dataclass
class NetworkSpec:
    """Architecture choice plus the ablation flags of the input space."""

    variant: str
    T: int
    use_r: bool = True
    use_tau_rbd: bool = True
    hybrid_output_add: bool = True
    widths: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"unknown variant {self.variant!r}")
        self.T = int(self.T)
        if self.variant == "MLP-7" and self.T != 1:
            raise ContractError("MLP-7 is a per-state model and requires T=1")
        if self.variant != "MLP-7" and self.T < 2:
            raise ContractError(f"{self.variant} requires a window length T >= 2")
        merged = dict(DEFAULT_WIDTHS[self.variant])
        merged.update(self.widths or {})
        self.widths = merged

    @property
    def input_dim(self):
        return input_dim(self.use_r, self.use_tau_rbd)


class Normalizer:
    """Per-feature standardization for inputs and outputs.

    Constant features keep their mean but get sigma := 1 so the
    transform stays invertible.  Fitted on training data only.
    """

    _EPS = 1e-12

    def __init__(self, x_mean, x_std, y_mean, y_std):
        self.x_mean = np.asarray(x_mean, dtype=np.float64)
        self.x_std = np.asarray(x_std, dtype=np.float64)
        self.y_mean = np.asarray(y_mean, dtype=np.float64)
        self.y_std = np.asarray(y_std, dtype=np.float64)
        if np.any(self.x_std <= 0.0) or np.any(self.y_std <= 0.0):
            raise ContractError("normalizer stds must be positive")

    @classmethod
    def fit(cls, X, Y):
        X = np.asarray(X, dtype=np.float64).reshape(-1, np.shape(X)[-1])
        Y = np.asarray(Y, dtype=np.float64)
        xs = X.std(axis=0)
        ys = Y.std(axis=0)
        return cls(X.mean(axis=0), np.where(xs < cls._EPS, 1.0, xs),
                   Y.mean(axis=0), np.where(ys < cls._EPS, 1.0, ys))

    def norm_x(self, X):
        return (X - self.x_mean) / self.x_std

    def denorm_x(self, Xn):
        return Xn * self.x_std + self.x_mean

    def norm_y(self, Y):
        return (Y - self.y_mean) / self.y_std

    def denorm_y(self, Yn):
        return Yn * self.y_std + self.y_mean

    def state(self):
        return {"x_mean": self.x_mean, "x_std": self.x_std,
                "y_mean": self.y_mean, "y_std": self.y_std}


def _xavier(rng, shape):
    fan_in, fan_out = shape[-2], shape[-1]
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Network:
    """Common parameter bookkeeping for the four topologies."""

    def __init__(self, spec):
        self.spec = spec
        self.params = {}

    def n_params(self):
        return sum(p.size for p in self.params.values())

    def param_vector(self):
        return np.concatenate([self.params[k].ravel() for k in sorted(self.params)])

    def set_param_vector(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        pos = 0
        for k in sorted(self.params):
            p = self.params[k]
            p[...] = vec[pos:pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != vec.size:
            raise ContractError("parameter vector length mismatch")

    def zero_params(self):
        for p in self.params.values():
            p[...] = 0.0

    def _check_window(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 3 or X.shape[1] != self.spec.T or X.shape[2] != self.spec.input_dim:
            raise ContractError(
                f"window batch must be (B, {self.spec.T}, {self.spec.input_dim}), "
                f"got {X.shape}")
        return X


class MLP7(Network):
    """Seven independent one-hidden-layer perceptrons, one per joint.

    Each joint sees the full feature vector: D -> hidden (ReLU) -> 1.
    The joint axes live in a leading parameter dimension so the whole
    bank evaluates as one einsum.
    """

    def __init__(self, spec):
        super().__init__(spec)
        D = spec.input_dim
        H = spec.widths["hidden"]
        rng = np.random.default_rng(spec.seed)
        self.params = {
            "W1": _xavier(rng, (N_JOINTS, D, H)),
            "b1": np.zeros((N_JOINTS, H)),
            "W2": _xavier(rng, (N_JOINTS, H, 1))[:, :, 0],
            "b2": np.zeros(N_JOINTS),
        }

    def forward(self, X):
        X = self._check_window(X)[:, 0, :]
        pre = np.einsum("bi,jih->bjh", X, self.params["W1"]) + self.params["b1"]
        h = np.maximum(pre, 0.0)
        y = np.einsum("bjh,jh->bj", h, self.params["W2"]) + self.params["b2"]
        self._cache = (X, pre, h)
        return y

    def backward(self, dY):
        X, pre, h = self._cache
        grads = {
            "W2": np.einsum("bjh,bj->jh", h, dY),
            "b2": dY.sum(axis=0),
        }
        dh = dY[:, :, None] * self.params["W2"][None, :, :]
        dh *= (pre > 0.0)
        grads["W1"] = np.einsum("bi,bjh->jih", X, dh)
        grads["b1"] = dh.sum(axis=0)
        return grads


class LSTM2(Network):
    """Two stacked LSTM cells; the second cell's hidden state is the output.

    Cell widths D -> hidden and hidden -> 7, gate order (i, f, g, o).
    The 7-unit hidden state of the last step is read out directly, so
    outputs pass through the cell's tanh/sigmoid squashing.
    """

    def __init__(self, spec):
        super().__init__(spec)
        D = spec.input_dim
        H1 = spec.widths["hidden"]
        H2 = N_JOINTS
        rng = np.random.default_rng(spec.seed)
        self.params = {
            "Wx1": _xavier(rng, (D, 4 * H1)),
            "Wh1": _xavier(rng, (H1, 4 * H1)),
            "b1": np.zeros(4 * H1),
            "Wx2": _xavier(rng, (H1, 4 * H2)),
            "Wh2": _xavier(rng, (H2, 4 * H2)),
            "b2": np.zeros(4 * H2),
        }

    def forward(self, X):
        X = np.ascontiguousarray(self._check_window(X))
        p = self.params
        Hs1, Cs1, G1 = kernels.lstm_forward(X, p["Wx1"], p["Wh1"], p["b1"])
        Hs1 = np.asarray(Hs1)
        Hs2, Cs2, G2 = kernels.lstm_forward(Hs1, p["Wx2"], p["Wh2"], p["b2"])
        self._cache = (X, Hs1, Cs1, G1, np.asarray(Hs2), Cs2, G2)
        return np.asarray(Hs2)[:, -1, :].copy()

    def backward(self, dY):
        X, Hs1, Cs1, G1, Hs2, Cs2, G2 = self._cache
        p = self.params
        dH2 = np.zeros_like(Hs2)
        dH2[:, -1, :] = dY
        dHs1, dWx2, dWh2, db2 = (np.asarray(a) for a in kernels.lstm_backward(
            Hs1, p["Wx2"], p["Wh2"], Hs2, np.asarray(Cs2), np.asarray(G2), dH2))
        _, dWx1, dWh1, db1 = (np.asarray(a) for a in kernels.lstm_backward(
            X, p["Wx1"], p["Wh1"], Hs1, np.asarray(Cs1), np.asarray(G1), dHs1))
        return {"Wx1": dWx1, "Wh1": dWh1, "b1": db1,
                "Wx2": dWx2, "Wh2": dWh2, "b2": db2}


class LSTMFCL(Network):
    """Single LSTM cell with a linear readout at the final step.

    The fully connected layer frees the torque prediction from the
    cell's output squashing.
    """

    def __init__(self, spec):
        super().__init__(spec)
        D = spec.input_dim
        H = spec.widths["hidden"]
        rng = np.random.default_rng(spec.seed)
        self.params = {
            "Wx": _xavier(rng, (D, 4 * H)),
            "Wh": _xavier(rng, (H, 4 * H)),
            "b": np.zeros(4 * H),
            "Wo": _xavier(rng, (H, N_JOINTS)),
            "bo": np.zeros(N_JOINTS),
        }

    def forward(self, X):
        X = np.ascontiguousarray(self._check_window(X))
        p = self.params
        Hs, Cs, G = kernels.lstm_forward(X, p["Wx"], p["Wh"], p["b"])
        Hs = np.asarray(Hs)
        self._cache = (X, Hs, Cs, G)
        return Hs[:, -1, :] @ p["Wo"] + p["bo"]

    def backward(self, dY):
        X, Hs, Cs, G = self._cache
        p = self.params
        h_last = Hs[:, -1, :]
        grads = {"Wo": h_last.T @ dY, "bo": dY.sum(axis=0)}
        dH = np.zeros_like(Hs)
        dH[:, -1, :] = dY @ p["Wo"].T
        _, dWx, dWh, db = (np.asarray(a) for a in kernels.lstm_backward(
            X, p["Wx"], p["Wh"], Hs, np.asarray(Cs), np.asarray(G), dH))
        grads.update({"Wx": dWx, "Wh": dWh, "b": db})
        return grads


def _softmax(z):
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def sinusoidal_encoding(T, d_model):
    """Fixed sin/cos position table, shape (T, d_model)."""
    pos = np.arange(T)[:, None]
    i = np.arange(d_model // 2)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / d_model)
    pe = np.zeros((T, d_model))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)
    return pe


class TransformerEnc(Network):
    """Encoder-only transformer with a final-timestep linear readout.

    Post-norm layers: x = LN(x + MHA(x)); x = LN(x + FFN(x)).  The
    positional table ``self.pe`` is a fixed buffer, not a parameter;
    zeroing it makes the model permutation-agnostic over timesteps.
    """

    LN_EPS = 1e-5

    def __init__(self, spec):
        super().__init__(spec)
        D = spec.input_dim
        dm = spec.widths["d_model"]
        heads = spec.widths["heads"]
        if dm % heads != 0:
            raise ContractError("d_model must be divisible by the head count")
        self.d_model = dm
        self.heads = heads
        self.layers = spec.widths["layers"]
        self.d_ff = spec.widths["ffn"]
        rng = np.random.default_rng(spec.seed)
        P = {"Win": _xavier(rng, (D, dm)), "bin": np.zeros(dm),
             "Wout": _xavier(rng, (dm, N_JOINTS)), "bout": np.zeros(N_JOINTS)}
        for l in range(self.layers):
            for nm in ("Wq", "Wk", "Wv", "Wo"):
                P[f"L{l}.{nm}"] = _xavier(rng, (dm, dm))
                P[f"L{l}.{nm.replace('W', 'b')}"] = np.zeros(dm)
            P[f"L{l}.Wf1"] = _xavier(rng, (dm, self.d_ff))
            P[f"L{l}.bf1"] = np.zeros(self.d_ff)
            P[f"L{l}.Wf2"] = _xavier(rng, (self.d_ff, dm))
            P[f"L{l}.bf2"] = np.zeros(dm)
            for s in ("1", "2"):
                P[f"L{l}.g{s}"] = np.ones(dm)
                P[f"L{l}.be{s}"] = np.zeros(dm)
        self.params = P
        self.pe = sinusoidal_encoding(spec.T, dm)

    def _layernorm(self, x, gamma, beta):
        mu = x.mean(axis=-1, keepdims=True)
        xc = x - mu
        var = (xc * xc).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + self.LN_EPS)
        xhat = xc * inv
        return xhat * gamma + beta, (xhat, inv)

    def _layernorm_back(self, dy, gamma, cache):
        xhat, inv = cache
        dg = (dy * xhat).sum(axis=(0, 1))
        db = dy.sum(axis=(0, 1))
        dxhat = dy * gamma
        m = dxhat.mean(axis=-1, keepdims=True)
        mx = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m - xhat * mx)
        return dx, dg, db

    def _split(self, x):
        B, T, _ = x.shape
        return x.reshape(B, T, self.heads, -1).transpose(0, 2, 1, 3)

    def _merge(self, x):
        B, h, T, dk = x.shape
        return x.transpose(0, 2, 1, 3).reshape(B, T, h * dk)

    def forward(self, X):
        X = self._check_window(X)
        P = self.params
        cache = {"X": X}
        x = X @ P["Win"] + P["bin"] + self.pe[None, :, :]
        for l in range(self.layers):
            cache[f"{l}.x_in"] = x
            Q = self._split(x @ P[f"L{l}.Wq"] + P[f"L{l}.bq"])
            K = self._split(x @ P[f"L{l}.Wk"] + P[f"L{l}.bk"])
            V = self._split(x @ P[f"L{l}.Wv"] + P[f"L{l}.bv"])
            scale = 1.0 / np.sqrt(Q.shape[-1])
            A = _softmax((Q @ K.transpose(0, 1, 3, 2)) * scale)
            ctx = self._merge(A @ V)
            attn = ctx @ P[f"L{l}.Wo"] + P[f"L{l}.bo"]
            x1, ln1 = self._layernorm(x + attn, P[f"L{l}.g1"], P[f"L{l}.be1"])
            pre = x1 @ P[f"L{l}.Wf1"] + P[f"L{l}.bf1"]
            hidden = np.maximum(pre, 0.0)
            ffn = hidden @ P[f"L{l}.Wf2"] + P[f"L{l}.bf2"]
            x, ln2 = self._layernorm(x1 + ffn, P[f"L{l}.g2"], P[f"L{l}.be2"])
            cache[f"{l}.mha"] = (Q, K, V, A, ctx, scale)
            cache[f"{l}.ln1"] = ln1
            cache[f"{l}.x1"] = x1
            cache[f"{l}.pre"] = pre
            cache[f"{l}.hidden"] = hidden
            cache[f"{l}.ln2"] = ln2
        cache["x_final"] = x
        self._cache = cache
        return x[:, -1, :] @ P["Wout"] + P["bout"]

    def backward(self, dY):
        P = self.params
        c = self._cache
        grads = {}
        x = c["x_final"]
        grads["Wout"] = x[:, -1, :].T @ dY
        grads["bout"] = dY.sum(axis=0)
        dx = np.zeros_like(x)
        dx[:, -1, :] = dY @ P["Wout"].T
        for l in range(self.layers - 1, -1, -1):
            d1, grads[f"L{l}.g2"], grads[f"L{l}.be2"] = self._layernorm_back(
                dx, P[f"L{l}.g2"], c[f"{l}.ln2"])
            # d1 flows into both x1 and the FFN branch
            hidden = c[f"{l}.hidden"]
            grads[f"L{l}.Wf2"] = hidden.reshape(-1, self.d_ff).T @ d1.reshape(-1, self.d_model)
            grads[f"L{l}.bf2"] = d1.sum(axis=(0, 1))
            dh = d1 @ P[f"L{l}.Wf2"].T
            dh *= (c[f"{l}.pre"] > 0.0)
            x1 = c[f"{l}.x1"]
            grads[f"L{l}.Wf1"] = x1.reshape(-1, self.d_model).T @ dh.reshape(-1, self.d_ff)
            grads[f"L{l}.bf1"] = dh.sum(axis=(0, 1))
            dx1 = d1 + dh @ P[f"L{l}.Wf1"].T
            d2, grads[f"L{l}.g1"], grads[f"L{l}.be1"] = self._layernorm_back(
                dx1, P[f"L{l}.g1"], c[f"{l}.ln1"])
            # d2 flows into both the layer input and the attention branch
            Q, K, V, A, ctx, scale = c[f"{l}.mha"]
            grads[f"L{l}.Wo"] = ctx.reshape(-1, self.d_model).T @ d2.reshape(-1, self.d_model)
            grads[f"L{l}.bo"] = d2.sum(axis=(0, 1))
            dctx = self._split(d2 @ P[f"L{l}.Wo"].T)
            dA = dctx @ V.transpose(0, 1, 3, 2)
            dV = A.transpose(0, 1, 3, 2) @ dctx
            dS = A * (dA - (dA * A).sum(axis=-1, keepdims=True))
            dQ = (dS @ K) * scale
            dK = dS.transpose(0, 1, 3, 2) @ Q * scale
            x_in = c[f"{l}.x_in"]
            flat_in = x_in.reshape(-1, self.d_model)
            dx = d2.copy()
            for nm, dmat in (("Wq", dQ), ("Wk", dK), ("Wv", dV)):
                dflat = self._merge(dmat).reshape(-1, self.d_model)
                grads[f"L{l}.{nm}"] = flat_in.T @ dflat
                grads[f"L{l}.{nm.replace('W', 'b')}"] = dflat.sum(axis=0)
                dx += (dflat @ P[f"L{l}.{nm}"].T).reshape(x_in.shape)
        X = c["X"]
        grads["Win"] = X.reshape(-1, X.shape[-1]).T @ dx.reshape(-1, self.d_model)
        grads["bin"] = dx.sum(axis=(0, 1))
        return grads


_BUILDERS = {"MLP-7": MLP7, "LSTM-2": LSTM2, "LSTM-FCL": LSTMFCL,
             "TransformerEnc": TransformerEnc}


def build_network(spec):
    """Instantiate the topology named by the spec, seeded and ready."""
    return _BUILDERS[spec.variant](spec)


def loss_and_grad(network, normalizer, X_norm, tau_meas, tau_rbd_last=None):
    """Mean squared torque error in Nm and its parameter gradients.

    X_norm (B, T, D) is the normalized window batch, tau_meas (B, 7) the
    filtered measured torques.  For hybrid variants pass tau_rbd_last
    (B, 7), the rigid-body prediction at the window's final step; the
    network output then models the residual.  The denormalization sits
    inside the differentiated path, so gradients are exact for the
    Nm-space loss.
    """
    Yn = network.forward(X_norm)
    pred = normalizer.denorm_y(Yn)
    if tau_rbd_last is not None:
        pred = pred + tau_rbd_last
    err = pred - tau_meas
    loss = float(np.mean(err ** 2))
    if not np.isfinite(loss):
        raise TrainingFault("non-finite training loss")
    dY = (2.0 / err.size) * err * normalizer.y_std
    return loss, network.backward(dY), pred


class AdamW:
    """Adam with decoupled weight decay.

    The decay multiplies parameters by (1 - lr*lambda) each step before
    the moment update is applied; it never enters the moments.
    """

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8,
                 weight_decay=0.0):
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            if self.weight_decay:
                p *= 1.0 - self.lr * self.weight_decay
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
