"""Independent numpy evaluation of the constants frozen into the C++ tests.

Run: python3 tests/oracles/derive.py
"""
import math

import numpy as np

DEG = math.pi / 180.0
SHEPP_LOGAN = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0 * DEG, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0 * DEG, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
]


def raster(ellipses, w):
    ps = 2.0 / w
    x = -1.0 + (np.arange(w) + 0.5) * ps
    y = 1.0 - (np.arange(w) + 0.5) * ps
    xx, yy = np.meshgrid(x, y)
    img = np.zeros((w, w))
    for cx, cy, a, b, ang, rho in ellipses:
        c, s = math.cos(ang), math.sin(ang)
        u = (c * (xx - cx) + s * (yy - cy)) / a
        v = (-s * (xx - cx) + c * (yy - cy)) / b
        img[u * u + v * v <= 1.0] += rho
    return img


def noise_sigma(pa, a, n0=1e5, ne=10.0):
    t = math.exp(pa) / n0
    return math.sqrt((1 - a) / a * t * (1 + (1 + a) / a * ne * t))


def local_loss(s_hat, s_nd, eps=1e-12):
    d = s_hat - s_nd
    p, q = d.shape
    total = 0.0
    for i in range(p):
        for j in range(q):
            if 0 < i < p - 1 and 0 < j < q - 1:
                dii = d[i + 1, j] - 2 * d[i, j] + d[i - 1, j]
                djj = d[i, j + 1] - 2 * d[i, j] + d[i, j - 1]
                dij = 0.25 * (d[i + 1, j + 1] - d[i + 1, j - 1] - d[i - 1, j + 1] + d[i - 1, j - 1])
                total += math.sqrt(dii**2 + djj**2 + 2 * dij**2 + eps)
            else:
                total += math.sqrt(eps)
    return total / (p * q)


if __name__ == "__main__":
    sl = raster(SHEPP_LOGAN, 128)
    print(f"shepp_logan_128 sum={sl.sum():.12f} nonzero={(np.abs(sl) > 1e-12).sum()}"
          f" distinct={len(np.unique(np.round(sl, 9)))}")
    print(f"sigma(0, 0.1)={noise_sigma(0, 0.1):.10e} sigma(0, 0.05)={noise_sigma(0, 0.05):.10e}")
    c1, c2 = 0.01**2, 0.03**2
    print(f"ssim const 0.5 vs 0.6 = {(2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1):.15f}")
    s_nd = np.zeros((7, 9))
    s_hat = s_nd.copy()
    s_hat[3, 4] = 1.0
    print(f"local loss impulse 7x9 = {local_loss(s_hat, s_nd):.15e}")
