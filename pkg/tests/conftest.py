import numpy as np
import pytest

from lidym.reference import reference_chain, reference_params


@pytest.fixture(scope="session")
def ref_chain():
    return reference_chain()


@pytest.fixture(scope="session")
def ref_params():
    return reference_params()


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_states(chain, n_states, rng, vel_scale=1.0, acc_scale=2.0):
    """Random joint states inside the limits, shared by several suites."""
    n = chain.n
    span = chain.pos_upper - chain.pos_lower
    Q = chain.pos_lower + span * rng.uniform(0.05, 0.95, size=(n_states, n))
    Qd = vel_scale * chain.vel_limit * rng.uniform(-1.0, 1.0, size=(n_states, n))
    Qdd = acc_scale * rng.standard_normal((n_states, n))
    return Q, Qd, Qdd


def fd_gradient_check(net, X, R, h=1e-6, sample=None, rng=None):
    """Max relative error of backward() against central differences.

    The loss is sum(forward(X) * R) so dY = R exactly.  The error floor
    scales with the largest gradient: parameters the loss provably does
    not depend on (both sides near zero) then compare at the numerical
    noise level rather than 0/0.
    """
    def loss():
        return float(np.sum(net.forward(X) * R))

    net.forward(X)
    grads = net.backward(R)
    gmax = max(np.max(np.abs(np.asarray(g))) for g in grads.values())
    floor = 1e-5 * (1.0 + gmax)
    worst = 0.0
    for name in sorted(net.params):
        flat = net.params[name].ravel()
        gflat = np.asarray(grads[name]).ravel()
        if sample is None or flat.size <= sample:
            idx = range(flat.size)
        else:
            idx = rng.choice(flat.size, size=sample, replace=False)
        for i in idx:
            keep = flat[i]
            flat[i] = keep + h
            lp = loss()
            flat[i] = keep - h
            lm = loss()
            flat[i] = keep
            fd = (lp - lm) / (2.0 * h)
            err = abs(fd - gflat[i]) / max(abs(fd), abs(gflat[i]), floor)
            worst = max(worst, err)
    return worst
