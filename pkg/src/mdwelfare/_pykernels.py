"""Pure numpy implementations of the numerical kernels.

This module is the fallback used when the compiled ``_kernels`` extension
is unavailable.  Both modules expose the same three functions with the same
signatures and must agree to rounding error.
"""
import numpy as np
from scipy.special import ndtr, ndtri

TWOPI = 2.0 * np.pi

_GL6_W = np.array([0.1713244923791705, 0.3607615730481384, 0.4679139345726904])
_GL6_X = np.array([0.9324695142031522, 0.6612093864662647, 0.2386191860831970])
_GL12_W = np.array([0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
                    0.2031674267230659, 0.2334925365383547, 0.2491470458134029])
_GL12_X = np.array([0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
                    0.5873179542866171, 0.3678314989981802, 0.1252334085114692])
_GL20_W = np.array([0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
                    0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
                    0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
                    0.1527533871307259])
_GL20_X = np.array([0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
                    0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
                    0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
                    0.07652652113349733])


def _nodes(r):
    ar = abs(r)
    if ar < 0.3:
        w, x = _GL6_W, _GL6_X
    elif ar < 0.75:
        w, x = _GL12_W, _GL12_X
    else:
        w, x = _GL20_W, _GL20_X
    return np.concatenate((w, w)), np.concatenate((1.0 - x, 1.0 + x))


def _bvnu_finite(h, k, r):
    """Upper orthant ``P(X > h, Y > k)`` for finite h, k (Genz's BVNU)."""
    w, x = _nodes(r)
    hk = h * k
    if abs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        asr = 0.5 * np.arcsin(r)
        sn = np.sin(asr * x)
        expo = (sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn)
        bvn = np.exp(expo) @ w
        return bvn * asr / TWOPI + ndtr(-h) * ndtr(-k)
    if r < 0:
        k = -k
        hk = -hk
    bvn = np.zeros_like(h)
    if abs(r) < 1:
        as_ = 1.0 - r * r
        a = np.sqrt(as_)
        bs = (h - k) ** 2
        asr = -0.5 * (bs / as_ + hk)
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        bvn = np.where(asr > -100,
                       a * np.exp(asr) * (1 - c * (bs - as_) * (1 - d * bs) / 3 + c * d * as_ * as_),
                       0.0)
        b = np.sqrt(bs)
        sp = np.sqrt(TWOPI) * ndtr(-b / a)
        bvn = np.where(hk > -100,
                       bvn - np.exp(-0.5 * hk) * sp * b * (1 - c * bs * (1 - d * bs) / 3),
                       bvn)
        a2 = 0.5 * a
        xs = (a2 * x) ** 2
        asr2 = -0.5 * (bs[:, None] / xs + hk[:, None])
        ok = asr2 > -100
        sp2 = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-0.5 * hk[:, None] * xs / (1.0 + rs) ** 2) / rs
        term = np.where(ok, np.exp(np.where(ok, asr2, 0.0)) * (sp2 - ep), 0.0) @ w
        bvn = (a2 * term - bvn) / TWOPI
    if r > 0:
        bvn = bvn + ndtr(-np.maximum(h, k))
    else:
        low = np.where(h < 0, ndtr(k) - ndtr(h), ndtr(-h) - ndtr(-k))
        bvn = np.where(h >= k, -bvn, low - bvn)
    return bvn


def bvn_cdf(h, k, r):
    """``P(X <= h, Y <= k)`` for a standard bivariate normal with correlation r.

    ``h`` and ``k`` are broadcast against each other and may hold +-inf; ``r``
    is a scalar.
    """
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    shape = h.shape
    dh = -h.ravel()
    dk = -k.ravel()
    out = np.empty(dh.shape)
    fin = np.isfinite(dh) & np.isfinite(dk)
    # infinite limits reduce to univariate cases
    zero = (dh == np.inf) | (dk == np.inf)
    out[zero] = 0.0
    m = (dh == -np.inf) & ~zero
    out[m] = ndtr(-np.where(dk[m] == -np.inf, -np.inf, dk[m]))
    m2 = (dk == -np.inf) & ~zero & ~(dh == -np.inf)
    out[m2] = ndtr(-dh[m2])
    if fin.any():
        with np.errstate(over="ignore", under="ignore", invalid="ignore", divide="ignore"):
            if r == 0.0:
                out[fin] = ndtr(-dh[fin]) * ndtr(-dk[fin])
            else:
                out[fin] = _bvnu_finite(dh[fin], dk[fin], float(r))
    np.clip(out, 0.0, 1.0, out=out)
    return out.reshape(shape)


def mvn_qmc(b, chol, n, shifts, alpha):
    """Randomised lattice estimates of ``P(Z <= b)``, ``Z ~ N(0, chol chol')``.

    Uses the separation-of-variables transform with a periodising tent
    transform and antithetic points.  Returns one estimate per shift.
    """
    b = np.asarray(b, dtype=float)
    d = b.size
    if np.any(b == -np.inf):
        return np.zeros(len(shifts))
    i = np.arange(1, n + 1, dtype=float)[:, None]
    base = i * alpha[None, :]
    e1 = ndtr(b[0] / chol[0, 0])
    out = np.empty(len(shifts))
    for r, shift in enumerate(shifts):
        x = np.abs(2.0 * np.mod(base + shift, 1.0) - 1.0)
        total = 0.0
        for w in (x, 1.0 - x):
            f = np.full(n, e1)
            y = np.empty((n, d))
            y[:, 0] = ndtri(np.clip(w[:, 0] * e1, 1e-300, 1.0 - 1e-16))
            for j in range(1, d):
                t = (b[j] - y[:, :j] @ chol[j, :j]) / chol[j, j]
                e = ndtr(t)
                f *= e
                if j < d - 1:
                    y[:, j] = ndtri(np.clip(w[:, j] * e, 1e-300, 1.0 - 1e-16))
            total += f.mean()
        out[r] = 0.5 * total
    return out


def grid_cell_integrals(z1, cell1, z2, cell2, weights, nc1, nc2,
                        c3, c4, s3, s4, rho, t3, t4):
    """Integrate ``phi2(z1, z2) * P(Z3 <= t3, Z4 <= t4 | z1, z2)`` over cells.

    ``z1``/``z2`` are quadrature nodes sorted by cell index ``cell1``/``cell2``;
    ``weights[i, j]`` already includes the node weights and the bivariate
    normal density.  The conditional law of (Z3, Z4) has means
    ``c3 . (z1, z2)`` and ``c4 . (z1, z2)``, standard deviations s3, s4 and
    correlation rho.  Either threshold may be +inf.
    """
    m3 = c3[0] * z1[:, None] + c3[1] * z2[None, :]
    m4 = c4[0] * z1[:, None] + c4[1] * z2[None, :]
    if np.isinf(t3) and np.isinf(t4):
        h = np.ones_like(m3)
    elif np.isinf(t3):
        h = ndtr((t4 - m4) / s4)
    elif np.isinf(t4):
        h = ndtr((t3 - m3) / s3)
    else:
        h = bvn_cdf((t3 - m3) / s3, (t4 - m4) / s4, rho)
    g = h * weights
    starts1 = np.flatnonzero(np.r_[True, np.diff(cell1) != 0])
    starts2 = np.flatnonzero(np.r_[True, np.diff(cell2) != 0])
    red = np.add.reduceat(np.add.reduceat(g, starts1, axis=0), starts2, axis=1)
    out = np.zeros((nc1, nc2))
    out[np.ix_(cell1[starts1], cell2[starts2])] = red
    return out
