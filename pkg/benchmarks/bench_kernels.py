"""Compare the compiled kernel extension against the numpy fallback.

Runs each hot kernel on representative workloads under both backends and
prints per-call timings plus the speedup.  The two implementations share
signatures and must agree numerically; this script asserts agreement
before timing so a silent divergence can never masquerade as a speedup.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import importlib
import time

import numpy as np

from lidym import _kernels_np
from lidym.reference import reference_chain, reference_params


def _load_compiled():
    try:
        return importlib.import_module("lidym._kernels")
    except ImportError:
        return None


def _time(fn, args, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _workloads():
    chain = reference_chain()
    phi = reference_params().per_link
    rng = np.random.default_rng(0)
    N = 2000
    Q = rng.uniform(-1.5, 1.5, size=(N, 7))
    Qd = rng.uniform(-1.0, 1.0, size=(N, 7))
    Qdd = rng.uniform(-2.0, 2.0, size=(N, 7))
    geo = (chain.rot, chain.trans, chain.axes, np.asarray(chain.gravity))

    walk = np.cumsum(rng.normal(0.0, 2e-4, size=(200_000, 7)), axis=0)
    width = np.full(7, np.deg2rad(0.5))

    B, T, H = 64, 50, 30
    D = 35
    X = rng.standard_normal((B, T, D))
    Wx = rng.standard_normal((D, 4 * H)) * 0.1
    Wh = rng.standard_normal((H, 4 * H)) * 0.1
    b = np.zeros(4 * H)

    cases = [
        ("regressor_batch (N=2000)", "regressor_batch", geo + (Q, Qd, Qdd)),
        ("rnea_batch (N=2000)", "rnea_batch", geo + (phi, Q, Qd, Qdd)),
        ("rotation_encode (N=200k)", "rotation_encode",
         (walk, 1e-5, np.deg2rad(10.0))),
        ("play_hysteresis (N=200k)", "play_hysteresis", (walk, width)),
        ("lstm_forward (B=64,T=50,H=30)", "lstm_forward", (X, Wx, Wh, b)),
    ]

    Hs, Cs, G = _kernels_np.lstm_forward(X, Wx, Wh, b)
    dH = rng.standard_normal(Hs.shape)
    cases.append(("lstm_backward (B=64,T=50,H=30)", "lstm_backward",
                  (X, Wx, Wh, Hs, Cs, G, dH)))
    return cases


def _first_array(result):
    if isinstance(result, tuple):
        return np.asarray(result[0])
    return np.asarray(result)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5,
                    help="timing repeats per kernel (best-of)")
    args = ap.parse_args()

    compiled = _load_compiled()
    if compiled is None:
        print("compiled extension not importable; build it first "
              "(pip install -e . --no-build-isolation)")
        return 1

    print(f"{'kernel':38s} {'python':>10s} {'compiled':>10s} {'speedup':>8s}")
    for label, name, call_args in _workloads():
        py_fn = getattr(_kernels_np, name)
        c_fn = getattr(compiled, name)
        a = _first_array(py_fn(*call_args))
        b = _first_array(c_fn(*call_args))
        err = np.max(np.abs(a - b))
        assert err < 1e-10, f"{name}: backends disagree by {err:.3e}"
        t_py = _time(py_fn, call_args, args.repeat)
        t_c = _time(c_fn, call_args, args.repeat)
        print(f"{label:38s} {t_py * 1e3:9.2f}ms {t_c * 1e3:9.2f}ms "
              f"{t_py / t_c:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
