# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.  Mirrors ``_pykernels`` function for function."""
import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, exp, log, sqrt, asin, sin, fabs, floor, INFINITY, isinf

cnp.import_array()

cdef double TWOPI = 6.283185307179586
cdef double SQRT1_2 = 0.7071067811865476

cdef double GL6_W[3]
cdef double GL6_X[3]
cdef double GL12_W[6]
cdef double GL12_X[6]
cdef double GL20_W[10]
cdef double GL20_X[10]
GL6_W[:] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904]
GL6_X[:] = [0.9324695142031522, 0.6612093864662647, 0.2386191860831970]
GL12_W[:] = [0.04717533638651177, 0.1069393259953183, 0.1600783285433464,
             0.2031674267230659, 0.2334925365383547, 0.2491470458134029]
GL12_X[:] = [0.9815606342467191, 0.9041172563704750, 0.7699026741943050,
             0.5873179542866171, 0.3678314989981802, 0.1252334085114692]
GL20_W[:] = [0.01761400713915212, 0.04060142980038694, 0.06267204833410906,
             0.08327674157670475, 0.1019301198172404, 0.1181945319615184,
             0.1316886384491766, 0.1420961093183821, 0.1491729864726037,
             0.1527533871307259]
GL20_X[:] = [0.9931285991850949, 0.9639719272779138, 0.9122344282513259,
             0.8391169718222188, 0.7463319064601508, 0.6360536807265150,
             0.5108670019508271, 0.3737060887154196, 0.2277858511416451,
             0.07652652113349733]


cdef inline double phid(double z) nogil:
    return 0.5 * erfc(-z * SQRT1_2)


cdef struct BvnTable:
    int ng
    double r
    double asr
    double w[20]
    double sn[20]
    double inv[20]
    double xs[20]
    double rs[20]


cdef void bvn_table(BvnTable *t, double r) nogil:
    """Precompute the Gauss-Legendre quantities that depend only on r."""
    cdef double *w
    cdef double *xh
    cdef int ng, i, sgn, m
    cdef double xi, a
    if fabs(r) < 0.3:
        ng = 3; w = GL6_W; xh = GL6_X
    elif fabs(r) < 0.75:
        ng = 6; w = GL12_W; xh = GL12_X
    else:
        ng = 10; w = GL20_W; xh = GL20_X
    t.ng = 2 * ng
    t.r = r
    t.asr = 0.5 * asin(r)
    a = 0.5 * sqrt(1.0 - r * r) if fabs(r) < 1.0 else 0.0
    for i in range(ng):
        for sgn in range(2):
            m = 2 * i + sgn
            xi = 1.0 - xh[i] if sgn == 0 else 1.0 + xh[i]
            t.w[m] = w[i]
            t.sn[m] = sin(t.asr * xi)
            t.inv[m] = 1.0 / (1.0 - t.sn[m] * t.sn[m])
            t.xs[m] = (a * xi) * (a * xi)
            t.rs[m] = sqrt(1.0 - t.xs[m])


cdef double bvnu(double dh, double dk, BvnTable *t) nogil:
    """Upper orthant P(X > dh, Y > dk), Genz's BVNU, with r taken from the table."""
    cdef int i
    cdef double r = t.r
    cdef double h, k, hk, bvn, hs, as_, a, bs, c, d, b, sp, xs, asr, ep, L
    if dh == INFINITY or dk == INFINITY:
        return 0.0
    if dh == -INFINITY:
        return 1.0 if dk == -INFINITY else phid(-dk)
    if dk == -INFINITY:
        return phid(-dh)
    if r == 0.0:
        return phid(-dh) * phid(-dk)
    h = dh
    k = dk
    hk = h * k
    bvn = 0.0
    if fabs(r) < 0.925:
        hs = 0.5 * (h * h + k * k)
        for i in range(t.ng):
            bvn += t.w[i] * exp((t.sn[i] * hk - hs) * t.inv[i])
        bvn = bvn * t.asr / TWOPI + phid(-h) * phid(-k)
    else:
        if r < 0:
            k = -k
            hk = -hk
        if fabs(r) < 1.0:
            as_ = 1.0 - r * r
            a = sqrt(as_)
            bs = (h - k) * (h - k)
            asr = -0.5 * (bs / as_ + hk)
            c = (4.0 - hk) / 8.0
            d = (12.0 - hk) / 80.0
            if asr > -100:
                bvn = a * exp(asr) * (1 - c * (bs - as_) * (1 - d * bs) / 3 + c * d * as_ * as_)
            if hk > -100:
                b = sqrt(bs)
                sp = sqrt(TWOPI) * phid(-b / a)
                bvn = bvn - exp(-0.5 * hk) * sp * b * (1 - c * bs * (1 - d * bs) / 3)
            a = 0.5 * a
            sp = 0.0
            for i in range(t.ng):
                xs = t.xs[i]
                asr = -0.5 * (bs / xs + hk)
                if asr > -100:
                    ep = exp(-0.5 * hk * xs / ((1.0 + t.rs[i]) * (1.0 + t.rs[i]))) / t.rs[i]
                    sp += t.w[i] * exp(asr) * ((1.0 + c * xs * (1.0 + 5.0 * d * xs)) - ep)
            bvn = (a * sp - bvn) / TWOPI
        if r > 0:
            bvn = bvn + phid(-(h if h > k else k))
        elif h >= k:
            bvn = -bvn
        else:
            if h < 0:
                L = phid(k) - phid(h)
            else:
                L = phid(-h) - phid(-k)
            bvn = L - bvn
    if bvn < 0.0:
        return 0.0
    if bvn > 1.0:
        return 1.0
    return bvn


def bvn_cdf(h, k, double r):
    """``P(X <= h, Y <= k)`` for a standard bivariate normal with correlation r."""
    hb, kb = np.broadcast_arrays(np.asarray(h, dtype=np.float64), np.asarray(k, dtype=np.float64))
    shape = hb.shape
    cdef const double[::1] hv = np.ascontiguousarray(hb).ravel()
    cdef const double[::1] kv = np.ascontiguousarray(kb).ravel()
    cdef Py_ssize_t n = hv.shape[0], i
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef BvnTable tab
    with nogil:
        bvn_table(&tab, r)
        for i in range(n):
            ov[i] = bvnu(-hv[i], -kv[i], &tab)
    return out.reshape(shape)


cdef double ndtri(double p) nogil:
    """Inverse normal CDF, Wichura's AS241 (about 1e-16 relative accuracy)."""
    cdef double q = p - 0.5, r, v
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                          + 67265.770927008700853) * r + 45921.953931549871457) * r
                        + 13731.693765509461125) * r + 1971.5909503065514427) * r
                      + 133.14166789178437745) * r + 3.387132872796366608) / \
               (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                      + 39307.89580009271061) * r + 21213.794301586595867) * r
                    + 5394.1960214247511077) * r + 687.1870074920579083) * r
                  + 42.313330701600911252) * r + 1.0)
    r = p if q < 0 else 1.0 - p
    r = sqrt(-log(r))
    if r <= 5.0:
        r -= 1.6
        v = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                  + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                + 3.64784832476320460504) * r + 5.7694972214606914055) * r
              + 4.6303378461565452959) * r + 1.42343711074968357734) / \
            (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                  + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                + 0.68976733498510000455) * r + 1.6763848301838038494) * r
              + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        v = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                  + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                + 0.29656057182850489123) * r + 1.7848265399172913358) * r
              + 5.4637849111641143699) * r + 6.6579046435011037772) / \
            (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                  + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
              + 0.59983220655588793769) * r + 1.0)
    return -v if q < 0 else v


cdef inline double clip_u(double u) nogil:
    if u < 1e-300:
        return 1e-300
    if u > 1.0 - 1e-16:
        return 1.0 - 1e-16
    return u


def mvn_qmc(b, chol, long n, shifts, alpha):
    """Randomised lattice estimates of ``P(Z <= b)``; one per shift."""
    cdef double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] Lv = np.ascontiguousarray(chol, dtype=np.float64)
    cdef double[:, ::1] sv = np.ascontiguousarray(shifts, dtype=np.float64)
    cdef double[::1] av = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef int d = bv.shape[0], R = sv.shape[0]
    cdef int r, j, l, anti
    cdef long i
    cdef double e1, f, t, e, x, total, wj
    cdef double y[4]
    out = np.zeros(R)
    cdef double[::1] ov = out
    for j in range(d):
        if bv[j] == -INFINITY:
            return out
    e1 = phid(bv[0] / Lv[0, 0])
    with nogil:
        for r in range(R):
            total = 0.0
            for i in range(1, n + 1):
                for anti in range(2):
                    f = e1
                    for j in range(d):
                        if j > 0:
                            t = bv[j]
                            for l in range(j):
                                t = t - Lv[j, l] * y[l]
                            e = phid(t / Lv[j, j])
                            f = f * e
                        else:
                            e = e1
                        if j < d - 1:
                            x = i * av[j] + sv[r, j]
                            x = x - floor(x)
                            wj = fabs(2.0 * x - 1.0)
                            if anti == 1:
                                wj = 1.0 - wj
                            y[j] = ndtri(clip_u(wj * e))
                    total += f
            ov[r] = 0.5 * total / n
    return out


def grid_cell_integrals(z1, cell1, z2, cell2, weights, int nc1, int nc2,
                        c3, c4, double s3, double s4, double rho, double t3, double t4):
    """Cell integrals of ``phi2 * P(Z3 <= t3, Z4 <= t4 | z1, z2)``; see _pykernels."""
    cdef double[::1] z1v = np.ascontiguousarray(z1, dtype=np.float64)
    cdef double[::1] z2v = np.ascontiguousarray(z2, dtype=np.float64)
    cdef cnp.int64_t[::1] c1v = np.ascontiguousarray(cell1, dtype=np.int64)
    cdef cnp.int64_t[::1] c2v = np.ascontiguousarray(cell2, dtype=np.int64)
    cdef double[:, ::1] W = np.ascontiguousarray(weights, dtype=np.float64)
    cdef double c31 = c3[0], c32 = c3[1], c41 = c4[0], c42 = c4[1]
    cdef Py_ssize_t n1 = z1v.shape[0], n2 = z2v.shape[0], i, j
    cdef double m3, m4, h
    cdef bint inf3 = isinf(t3), inf4 = isinf(t4)
    out = np.zeros((nc1, nc2))
    cdef double[:, ::1] ov = out
    cdef BvnTable tab
    with nogil:
        bvn_table(&tab, rho)
        for i in range(n1):
            for j in range(n2):
                m3 = c31 * z1v[i] + c32 * z2v[j]
                m4 = c41 * z1v[i] + c42 * z2v[j]
                if inf3 and inf4:
                    h = 1.0
                elif inf3:
                    h = phid((t4 - m4) / s4)
                elif inf4:
                    h = phid((t3 - m3) / s3)
                else:
                    h = bvnu(-(t3 - m3) / s3, -(t4 - m4) / s4, &tab)
                ov[c1v[i], c2v[j]] += h * W[i, j]
    return out
