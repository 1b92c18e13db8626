"""Pure-numpy versions of the compiled kernels in ``_ckernels.pyx``.

Signatures and accumulation order match the compiled module, so forward
results agree bit for bit.
"""

import numpy as np


def conv2d_forward(padded, weights, bias):
    n_out, n_in, k, _ = weights.shape
    h = padded.shape[1] - k + 1
    w = padded.shape[2] - k + 1
    out = np.empty((n_out, h, w))
    out[...] = bias[:, None, None]
    for c in range(n_in):
        for dy in range(k):
            for dx in range(k):
                # product rounded first, then added: same op sequence as the C loop
                out += weights[:, c, dy, dx, None, None] * padded[c, dy:dy + h, dx:dx + w]
    return out


def conv2d_backward_input(grad_out, weights):
    n_out, n_in, k, _ = weights.shape
    h, w = grad_out.shape[1:]
    gp = np.zeros((n_in, h + k - 1, w + k - 1))
    for o in range(n_out):
        for dy in range(k):
            for dx in range(k):
                gp[:, dy:dy + h, dx:dx + w] += weights[o, :, dy, dx, None, None] * grad_out[o]
    return gp


def maxpool_forward(inp):
    n_ch, h, w = inp.shape
    # [C, H/2, W/2, 4] with window members in row-major scan order
    win = inp.reshape(n_ch, h // 2, 2, w // 2, 2).transpose(0, 1, 3, 2, 4)
    win = win.reshape(n_ch, h // 2, w // 2, 4)
    pick = np.argmax(win, axis=-1)  # first occurrence on ties
    out = np.take_along_axis(win, pick[..., None], axis=-1)[..., 0]
    cc, yy, xx = np.indices(pick.shape)
    rows = 2 * yy + pick // 2
    cols = 2 * xx + pick % 2
    idx = (cc * h + rows) * w + cols
    return np.ascontiguousarray(out), idx.astype(np.int64)


def maxpool_backward(idx, grad_out, size):
    grad = np.zeros(size)
    np.add.at(grad, idx.ravel(), grad_out.ravel())
    return grad


def dense_forward(inp, weights, bias):
    terms = np.empty((weights.shape[0], weights.shape[1] + 1))
    terms[:, 0] = bias
    np.multiply(weights, inp[None, :], out=terms[:, 1:])
    # add.accumulate is strictly sequential along the row
    return np.add.accumulate(terms, axis=1)[:, -1].copy()
