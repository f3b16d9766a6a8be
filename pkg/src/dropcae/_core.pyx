# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused training step and SVM SGD epochs.

Function signatures mirror dropcae._fallback exactly.
"""

from libc.math cimport exp, log, log1p, pow, sqrt

import numpy as np

cimport numpy as cnp


cdef inline double _sigmoid(double z) nogil:
    cdef double e
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    e = exp(z)
    return e / (1.0 + e)


def train_step(double[:, ::1] x, double[:, ::1] u, double[::1] theta,
               double[::1] m, double[::1] v, long t,
               double lr, double beta1, double beta2, double eps,
               double tau, double lam, long d, long h, bint full_bce):
    """One fused training step on the flat parameter vector.

    Layout of theta/m/v: [w1 (h*d), b1 (h), w2 (d*h), b2 (d), log_alpha (d)].
    Mutates theta, m, v in place; returns (total, recon_term, reg_term).
    """
    cdef long B = x.shape[0]
    cdef long ow1 = 0
    cdef long ob1 = h * d
    cdef long ow2 = ob1 + h
    cdef long ob2 = ow2 + d * h
    cdef long ola = ob2 + d
    cdef long L = ola + d

    masks_arr = np.empty((B, d), dtype=np.float64)
    gated_arr = np.empty((B, d), dtype=np.float64)
    a1_arr = np.empty((B, h), dtype=np.float64)
    xhat_arr = np.empty((B, d), dtype=np.float64)
    delta2_arr = np.empty((B, d), dtype=np.float64)
    delta1_arr = np.zeros((B, h), dtype=np.float64)
    dgated_arr = np.zeros((B, d), dtype=np.float64)
    grad_arr = np.zeros(L, dtype=np.float64)

    cdef double[:, ::1] masks = masks_arr
    cdef double[:, ::1] gated = gated_arr
    cdef double[:, ::1] a1 = a1_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[:, ::1] delta2 = delta2_arr
    cdef double[:, ::1] delta1 = delta1_arr
    cdef double[:, ::1] dgated = dgated_arr
    cdef double[::1] grad = grad_arr

    cdef double recon = 0.0
    cdef double reg = 0.0
    cdef double noise, mm, s, dq, dp, xv, xh, dm
    cdef long i, j, p, q, idx

    with nogil:
        # gate sampling and input gating
        for i in range(B):
            for j in range(d):
                noise = log(u[i, j]) - log1p(-u[i, j])
                mm = _sigmoid((theta[ola + j] + noise) / tau)
                masks[i, j] = mm
                gated[i, j] = x[i, j] * mm
                reg += mm

        # hidden layer: relu(gated @ w1.T + b1)
        for i in range(B):
            for p in range(h):
                s = theta[ob1 + p]
                for j in range(d):
                    s += gated[i, j] * theta[ow1 + p * d + j]
                a1[i, p] = s if s > 0.0 else 0.0

        # output layer: sigmoid(a1 @ w2.T + b2), loss and output delta
        for i in range(B):
            for q in range(d):
                s = theta[ob2 + q]
                for p in range(h):
                    s += a1[i, p] * theta[ow2 + q * h + p]
                xh = _sigmoid(s)
                xhat[i, q] = xh
                xv = x[i, q]
                if xv > 0.0:
                    recon -= xv * log(xh)
                if full_bce:
                    if xv < 1.0:
                        recon -= (1.0 - xv) * log1p(-xh)
                    delta2[i, q] = (xh - xv) / B
                else:
                    delta2[i, q] = -xv * (1.0 - xh) / B

        recon /= B
        reg *= lam / B

        # grads for w2, b2 and backprop into the hidden activations
        for i in range(B):
            for q in range(d):
                dq = delta2[i, q]
                grad[ob2 + q] += dq
                if dq != 0.0:
                    for p in range(h):
                        grad[ow2 + q * h + p] += dq * a1[i, p]
                        delta1[i, p] += dq * theta[ow2 + q * h + p]

        # relu gate, grads for w1, b1 and backprop into the gated input
        for i in range(B):
            for p in range(h):
                if a1[i, p] <= 0.0:
                    delta1[i, p] = 0.0
                dp = delta1[i, p]
                if dp != 0.0:
                    grad[ob1 + p] += dp
                    for j in range(d):
                        grad[ow1 + p * d + j] += dp * gated[i, j]
                        dgated[i, j] += dp * theta[ow1 + p * d + j]

        # selector gradient: reconstruction path plus regularizer path
        for i in range(B):
            for j in range(d):
                mm = masks[i, j]
                dm = dgated[i, j] * x[i, j] + lam / B
                grad[ola + j] += dm * mm * (1.0 - mm) / tau

        # bias-corrected ADAM update
        _adam_inplace(theta, grad, m, v, t, lr, beta1, beta2, eps, L)

    return recon + reg, recon, reg


cdef void _adam_inplace(double[::1] theta, double[::1] grad, double[::1] m,
                        double[::1] v, long t, double lr, double beta1,
                        double beta2, double eps, long L) nogil:
    cdef double bc1 = 1.0 - pow(beta1, t)
    cdef double bc2 = 1.0 - pow(beta2, t)
    cdef double g, mh, vh
    cdef long idx
    for idx in range(L):
        g = grad[idx]
        m[idx] = beta1 * m[idx] + (1.0 - beta1) * g
        v[idx] = beta2 * v[idx] + (1.0 - beta2) * g * g
        # exact-zero gradients decay the moments into denormal range, which
        # stalls the fpu; flush far below any meaningful magnitude
        if -1e-290 < m[idx] < 1e-290:
            m[idx] = 0.0
        if v[idx] < 1e-290:
            v[idx] = 0.0
        mh = m[idx] / bc1
        vh = v[idx] / bc2
        theta[idx] -= lr * mh / (sqrt(vh) + eps)


def svm_fit_binary(double[:, ::1] x, double[::1] y, cnp.int64_t[:, ::1] orders,
                   double lr, double reg):
    """Averaged-SGD hinge fit of one binary classifier; mirrors the fallback."""
    cdef long n = x.shape[0]
    cdef long f = x.shape[1]
    cdef long epochs = orders.shape[0]

    w_arr = np.zeros(f, dtype=np.float64)
    wsum_arr = np.zeros(f, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double[::1] wsum = wsum_arr

    cdef double bias = 0.0
    cdef double bias_sum = 0.0
    cdef double decay = 1.0 - lr * reg
    cdef double margin, yi
    cdef long e, k, i, j, steps = 0

    with nogil:
        for e in range(epochs):
            for k in range(n):
                i = orders[e, k]
                yi = y[i]
                margin = bias
                for j in range(f):
                    margin += w[j] * x[i, j]
                margin *= yi
                for j in range(f):
                    w[j] *= decay
                if margin < 1.0:
                    for j in range(f):
                        w[j] += lr * yi * x[i, j]
                    bias += lr * yi
                for j in range(f):
                    wsum[j] += w[j]
                bias_sum += bias
                steps += 1

    return wsum_arr / steps, bias_sum / steps
