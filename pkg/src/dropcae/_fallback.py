"""Pure numpy implementations of the hot kernels.

Mirrors the compiled `_core` extension function-for-function; selected by
`backend` when the extension is unavailable (or forced via DROPCAE_BACKEND).
"""

from __future__ import annotations

import numpy as np

from .numerics import AdamState, adam_step, sigmoid


def train_step(x, u, theta, m, v, t, lr, beta1, beta2, eps, tau, lam, d, h,
               full_bce):
    """One fused training step on the flat parameter vector.

    x: (B, d) batch; u: (B, d) uniform draws for the gate noise; theta/m/v:
    flat parameters and ADAM moments (mutated in place); t: the 1-based ADAM
    step count. Returns (total, recon_term, reg_term).
    """
    b = x.shape[0]
    hd = h * d
    w1 = theta[:hd].reshape(h, d)
    b1 = theta[hd:hd + h]
    w2 = theta[hd + h:hd + h + d * h].reshape(d, h)
    b2 = theta[hd + h + d * h:hd + h + d * h + d]
    log_alpha = theta[hd + h + d * h + d:]

    noise = np.log(u) - np.log1p(-u)
    masks = sigmoid((log_alpha + noise) / tau)
    gated = x * masks
    a1 = np.maximum(gated @ w1.T + b1, 0.0)
    xhat = sigmoid(a1 @ w2.T + b2)

    with np.errstate(divide="ignore", invalid="ignore"):
        recon = -float(np.sum(np.where(x > 0, x * np.log(xhat), 0.0))) / b
        if full_bce:
            comp = np.where(x < 1, (1.0 - x) * np.log1p(-xhat), 0.0)
            recon -= float(np.sum(comp)) / b
    reg = lam * float(np.sum(masks)) / b

    if full_bce:
        delta2 = (xhat - x) / b
    else:
        delta2 = -x * (1.0 - xhat) / b
    grad_w2 = delta2.T @ a1
    grad_b2 = delta2.sum(axis=0)
    delta1 = (delta2 @ w2) * (a1 > 0)
    grad_w1 = delta1.T @ gated
    grad_b1 = delta1.sum(axis=0)
    dgated = delta1 @ w1
    dmask = dgated * x + lam / b
    grad_la = (dmask * masks * (1.0 - masks)).sum(axis=0) / tau

    grad = np.concatenate([grad_w1.ravel(), grad_b1, grad_w2.ravel(), grad_b2,
                           grad_la])
    state = AdamState(m, v, step=t - 1, lr=lr, beta1=beta1, beta2=beta2,
                      epsilon=eps)
    adam_step(theta, grad, state)
    return recon + reg, recon, reg


def svm_fit_binary(x, y, orders, lr, reg):
    """Averaged-SGD hinge fit of one binary classifier.

    x: (n, f); y: (n,) in {-1, +1}; orders: (epochs, n) visit order per epoch.
    Returns the averaged (weights, bias) over all update steps.
    """
    n, f = x.shape
    w = np.zeros(f)
    bias = 0.0
    w_sum = np.zeros(f)
    bias_sum = 0.0
    steps = 0
    decay = 1.0 - lr * reg
    for epoch in range(orders.shape[0]):
        for i in orders[epoch]:
            xi = x[i]
            margin = y[i] * (w @ xi + bias)
            w *= decay
            if margin < 1.0:
                w += lr * y[i] * xi
                bias += lr * y[i]
            w_sum += w
            bias_sum += bias
            steps += 1
    return w_sum / steps, bias_sum / steps
