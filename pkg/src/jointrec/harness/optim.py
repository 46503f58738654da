"""Adam optimizer over named Parameter lists."""

import numpy as np

from ..errors import ConfigError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-7


def adam_update(param, grad, state, lr, beta1=ADAM_BETA1, beta2=ADAM_BETA2,
                eps=ADAM_EPS, t=1):
    """One bias-corrected Adam step on a raw array.

    ``state`` is a dict holding first/second moment arrays under "m" and
    "v" (created zeroed when missing). Returns the updated parameter;
    moments are updated in place in ``state``. ``t`` counts steps from 1.
    """
    if t < 1:
        raise ConfigError(f"adam step count starts at 1, got {t}")
    if "m" not in state:
        state["m"] = np.zeros_like(param)
        state["v"] = np.zeros_like(param)
    m, v = state["m"], state["v"]
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    return param - lr * mhat / (np.sqrt(vhat) + eps)


class Adam:
    """Holds per-parameter moment state and applies steps to trainables."""

    def __init__(self, params, lr=0.001, beta1=ADAM_BETA1, beta2=ADAM_BETA2,
                 eps=ADAM_EPS):
        if lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {lr}")
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.state = {p.name: {} for p in self.params}

    def step(self):
        """Apply one update using the gradients accumulated on the tape."""
        self.t += 1
        for p in self.params:
            g = p.tensor.grad
            if g is None:
                continue
            p.tensor.data = adam_update(
                p.tensor.data, g, self.state[p.name],
                self.lr, self.beta1, self.beta2, self.eps, self.t,
            )

    def zero_grad(self):
        for p in self.params:
            p.tensor.grad = None
