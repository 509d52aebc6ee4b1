"""Pure-NumPy twins of the compiled kernels in ``_accel``.

Vectorized with checkerboard masks and array-wide AGM iterations; slower than
the extension but dependency-free. Signatures match ``_accel`` exactly so
``backend`` can swap them in transparently.
"""

import numpy as np


def _color_mask(shape, color):
    i, j = np.indices(shape)
    return (i + j) % 2 == color


def sor_color_sweep(psi, rhs, cw, ce, cs, cn, diag, interior, color, omega):
    m = _color_mask(psi.shape, color) & (interior != 0)
    acc = rhs.copy()
    acc[1:, :] += cw[1:, :] * psi[:-1, :]
    acc[:-1, :] += ce[:-1, :] * psi[1:, :]
    acc[:, 1:] += cs[:, 1:] * psi[:, :-1]
    acc[:, :-1] += cn[:, :-1] * psi[:, 1:]
    psi[m] = (1.0 - omega) * psi[m] + omega * acc[m] / diag[m]


def operator_apply(psi, cw, ce, cs, cn, diag, interior, out):
    acc = diag * psi
    acc[1:, :] -= cw[1:, :] * psi[:-1, :]
    acc[:-1, :] -= ce[:-1, :] * psi[1:, :]
    acc[:, 1:] -= cs[:, 1:] * psi[:, :-1]
    acc[:, :-1] -= cn[:, :-1] * psi[:, 1:]
    out[...] = np.where(interior != 0, acc, 0.0)


def agm_ke(k, k_out, e_out, kprime=None):
    a = np.ones_like(k)
    b = np.sqrt((1.0 - k) * (1.0 + k)) if kprime is None else kprime
    c = k.copy()
    csum = 0.5 * k * k
    pow2 = 0.5
    for _ in range(24):
        if np.max(np.abs(c)) <= 1e-15:
            break
        an = 0.5 * (a + b)
        c = 0.5 * (a - b)
        b = np.sqrt(a * b)
        a = an
        pow2 *= 2.0
        csum += pow2 * c * c
    k_out[...] = np.pi / (2.0 * a)
    e_out[...] = k_out * (1.0 - csum)


def green_block(rt, zt, rs, zs, out):
    r = rt[:, None]
    z = zt[:, None]
    rp = rs[None, :]
    zp = zs[None, :]
    dz = z - zp
    den = (r + rp) ** 2 + dz * dz
    k = np.sqrt(4.0 * r * rp / den)
    kprime = np.sqrt(((r - rp) ** 2 + dz * dz) / den)
    kv = np.empty_like(k)
    ev = np.empty_like(k)
    agm_ke(np.ascontiguousarray(k.ravel()), kv.reshape(-1), ev.reshape(-1),
           kprime=np.ascontiguousarray(kprime.ravel()))
    with np.errstate(divide="ignore", invalid="ignore"):
        out[...] = np.sqrt(r * rp) / (4.0 * np.pi**2) * (
            (2.0 / k - k) * kv - (2.0 / k) * ev
        )
