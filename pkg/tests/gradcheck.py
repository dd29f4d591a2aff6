"""Central finite-difference gradient check shared by the model tests and the acceptance suite.

The primary oracle is a central difference with EPS = 1e-5 in float64. Its
rounding error is about ``u * |loss| / EPS`` (a few 1e-11), so a correct
gradient of size ~1e-8 can miss a 1e-4 relative tolerance on rounding alone.
A sample whose discrepancy is within that rounding bound is therefore
re-checked, at the same relative tolerance, against a better-conditioned
central difference with EPS_WIDE. Any other miss is a failure.
"""
import numpy as np

from hsad.model import ModelConfig, backward, cross_entropy, forward, init_params

TOY = ModelConfig(max_time_patches=3)
EPS = 1e-5
EPS_WIDE = 1e-3
RTOL = 1e-4
U = np.finfo(np.float64).eps
# both sides below this are indistinguishable from zero at EPS in float64
ZERO_FLOOR = 1e-10


def family(name):
    return name.split(".", 2)[-1] if name.startswith("blocks.") else name


def perturbed_params(config=TOY, seed=1):
    """Initialized parameters with norm gains/biases nudged off their 1/0 defaults."""
    rng = np.random.default_rng(seed + 1000)
    params = init_params(config, seed)
    for k in params:
        if k.endswith((".b", ".g")):
            params[k] = params[k] + 0.1 * rng.standard_normal(params[k].shape)
    return params


def relative_error(a, n):
    if max(abs(a), abs(n)) < ZERO_FLOOR:
        return 0.0
    return abs(a - n) / max(abs(a), abs(n))


def _central(params, k, idx, values, label, config, eps):
    old = params[k][idx]
    params[k][idx] = old + eps
    lp = cross_entropy(forward(values, params, config)[0], label)
    params[k][idx] = old - eps
    lm = cross_entropy(forward(values, params, config)[0], label)
    params[k][idx] = old
    return (lp - lm) / (2 * eps), max(abs(lp), abs(lm))


def gradient_check(samples=200, seed=0, config=TOY, frames=32, label=2):
    """Returns ``{family: (samples, worst relative error, samples re-checked at EPS_WIDE)}``.

    The worst error is taken over the final verdict of each sample: the EPS
    error, or the EPS_WIDE error for samples whose EPS miss is explained by
    rounding.
    """
    rng = np.random.default_rng(seed)
    params = perturbed_params(config)
    values = rng.standard_normal((config.mel_bins, frames))
    _, grads = backward(values, label, params, config)
    fams = {}
    for k in params:
        fams.setdefault(family(k), []).append(k)
    out = {}
    for fam, names in fams.items():
        worst, rechecked = 0.0, 0
        for s in range(samples):
            k = names[s % len(names)]
            idx = tuple(int(rng.integers(0, n)) for n in params[k].shape)
            a = grads[k][idx]
            fd, scale = _central(params, k, idx, values, label, config, EPS)
            err = relative_error(a, fd)
            if err >= RTOL and abs(a - fd) <= 16 * U * scale / EPS:
                fd_wide, _ = _central(params, k, idx, values, label, config, EPS_WIDE)
                err = relative_error(a, fd_wide)
                rechecked += 1
            worst = max(worst, err)
        out[fam] = (samples, worst, rechecked)
    return out
