"""Slow, direct reference implementations used as independent test oracles.

None of these share code with the package: loops and textbook formulas only.
"""

import math

import numpy as np


def conv2d_loop(x, w, b=None, stride=1, padding=0):
    n, c, h, wd = x.shape
    co, ci, kh, kw = w.shape
    assert ci == c
    xp = np.zeros((n, c, h + 2 * padding, wd + 2 * padding))
    xp[:, :, padding : padding + h, padding : padding + wd] = x
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((n, co, ho, wo))
    for i in range(n):
        for o in range(co):
            for r in range(ho):
                for s in range(wo):
                    acc = 0.0
                    for ch in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                acc += xp[i, ch, r * stride + u, s * stride + v] * w[o, ch, u, v]
                    out[i, o, r, s] = acc + (0.0 if b is None else b[o])
    return out


def conv_transpose2d_loop(x, w, b=None, stride=1):
    """Scatter form: every input pixel stamps ``x * w`` into the output."""
    n, ci, h, wd = x.shape
    _, co, kh, kw = w.shape
    out = np.zeros((n, co, (h - 1) * stride + kh, (wd - 1) * stride + kw))
    for i in range(n):
        for c in range(ci):
            for r in range(h):
                for s in range(wd):
                    out[i, :, r * stride : r * stride + kh, s * stride : s * stride + kw] += x[i, c, r, s] * w[c]
    if b is not None:
        out += np.asarray(b)[None, :, None, None]
    return out


def mse_loop(a, b):
    a, b = np.ravel(a), np.ravel(b)
    return sum((float(p) - float(q)) ** 2 for p, q in zip(a, b)) / len(a)


def cross_entropy_loop(logits, target):
    """``logits[N, K, ...]``; mean over all non-class positions."""
    k = logits.shape[1]
    z = np.moveaxis(logits, 1, -1).reshape(-1, k)
    t = np.ravel(target)
    total = 0.0
    for row, cls in zip(z, t):
        m = max(row)
        lse = m + math.log(sum(math.exp(v - m) for v in row))
        total += lse - row[cls]
    return total / len(t)


def gaussian_2d(size=11, sigma=1.5):
    c = (size - 1) / 2
    g = np.array([[math.exp(-((i - c) ** 2 + (j - c) ** 2) / (2 * sigma**2)) for j in range(size)]
                  for i in range(size)])
    return g / g.sum()


def ssim_direct(a, b, data_range=1.0, size=11, sigma=1.5):
    """SSIM of ``(C, H, W)`` images: a full 2-D window evaluated at every valid position."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    win = gaussian_2d(size, sigma)
    c1, c2 = (0.01 * data_range) ** 2, (0.03 * data_range) ** 2
    vals = []
    for ch in range(a.shape[0]):
        for r in range(a.shape[1] - size + 1):
            for s in range(a.shape[2] - size + 1):
                pa = a[ch, r : r + size, s : s + size]
                pb = b[ch, r : r + size, s : s + size]
                ma, mb = (win * pa).sum(), (win * pb).sum()
                va = (win * (pa - ma) ** 2).sum()
                vb = (win * (pb - mb) ** 2).sum()
                cov = (win * (pa - ma) * (pb - mb)).sum()
                vals.append(((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma**2 + mb**2 + c1) * (va + vb + c2)))
    return float(np.mean(vals))


def perplexity_loop(counts):
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c:
            p = c / total
            h -= p * math.log(p)
    return math.exp(h)


def adam_scalar(grad_fn, w0, lr, steps, b1=0.9, b2=0.999, eps=1e-8):
    """The Adam recurrence on a single float, written out by hand."""
    w, m, v = w0, 0.0, 0.0
    for t in range(1, steps + 1):
        g = grad_fn(w)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        w -= lr * mhat / (math.sqrt(vhat) + eps)
    return w


def nearest_loop(z, codebook):
    out = []
    for row in z:
        best, best_d = 0, None
        for k, e in enumerate(codebook):
            d = sum((float(p) - float(q)) ** 2 for p, q in zip(row, e))
            if best_d is None or d < best_d:
                best, best_d = k, d
        out.append(best)
    return np.array(out)
