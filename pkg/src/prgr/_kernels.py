"""Compiled hot paths: seeded region growing, seed sampling, score averaging.

Everything here is deliberately scalar, allocation-light numba code.  The
random stream is PCG-XSH-RR operating on a caller-provided ``uint64[2]``
``(state, inc)`` array and produces bit-identical draws to
:class:`prgr.rng.Pcg32`.  Floating-point expressions are written in the same
order as their pure-Python counterparts in :mod:`prgr.clusters` so that the
compiled and interpreted paths agree bit-for-bit; tests enforce this
equivalence against a plain ``heapq`` reference implementation.

The growth queue is a max-priority queue split into a small in-cache 4-ary
heap ("hot", all priorities >= theta) and an unordered append-only buffer
("cold", all priorities < theta).  Every pop takes the hot root; when the hot
heap drains, the cold buffer is compacted (elements whose pixel is already
assigned or out of visits are no-ops and get dropped) and its top slice is
moved into the hot heap under a lower theta.  The pop sequence is identical
to a single monolithic heap because the (priority desc, sequence asc) order
is total and every cold element ranks strictly below every hot element.
"""

import math

import numpy as np
from numba import njit, uint32, uint64

PCG_MULT = uint64(6364136223846793005)

# payload packs (pixel, cluster) into one float64: pixel * 2**26 + cluster.
# Exact while pixel < 2**27 and cluster < 2**26; the wrapper enforces this.
PAY_SHIFT = 67108864.0
PAY_INV = 1.0 / 67108864.0

GAMMA_1P5 = 0.8862269254527580  # Gamma(3/2)
GAMMA_2P5 = 1.3293403881791370  # Gamma(5/2)

HOT_TARGET = 32768


@njit(cache=True, inline="always")
def _pcg32_uniform(st):
    old = st[0]
    st[0] = old * PCG_MULT + st[1]
    xs = uint32(((old >> uint64(18)) ^ old) >> uint64(27))
    rot = uint32(old >> uint64(59))
    return uint32((xs >> rot) | (xs << ((uint32(0) - rot) & uint32(31)))) * 2.3283064365386963e-10


@njit(cache=True, inline="always")
def _chi2_cdf5(x):
    # chi-squared(5) CDF: regularized lower incomplete gamma P(5/2, x/2),
    # closed form for half-integer order via erf.
    if x <= 0.0:
        return 0.0
    y = 0.5 * x
    sy = math.sqrt(y)
    v = math.erf(sy) - math.exp(-y) * sy * (1.0 / GAMMA_1P5 + y / GAMMA_2P5)
    if v < 0.0:
        v = 0.0
    elif v >= 1.0:
        v = 1.0 - 1e-16
    return v


@njit(cache=True, inline="always")
def _pow_int(b, e):
    r = 1.0
    while e > 0:
        if e & 1:
            r *= b
        b *= b
        e >>= 1
    return r


@njit(cache=True, inline="always")
def _hot_push(h, hn, prio, seq, pay):
    i = hn
    h[i, 0] = prio
    h[i, 1] = seq
    h[i, 2] = pay
    while i > 0:
        par = (i - 1) >> 2
        if h[par, 0] < h[i, 0] or (h[par, 0] == h[i, 0] and h[par, 1] > h[i, 1]):
            t0 = h[par, 0]; t1 = h[par, 1]; t2 = h[par, 2]
            h[par, 0] = h[i, 0]; h[par, 1] = h[i, 1]; h[par, 2] = h[i, 2]
            h[i, 0] = t0; h[i, 1] = t1; h[i, 2] = t2
            i = par
        else:
            break
    return hn + 1


@njit(cache=True, inline="always")
def _hot_sift_down(h, hn, i):
    while True:
        c0 = 4 * i + 1
        if c0 >= hn:
            break
        best = c0
        last = c0 + 4
        if last > hn:
            last = hn
        for c in range(c0 + 1, last):
            if h[c, 0] > h[best, 0] or (h[c, 0] == h[best, 0] and h[c, 1] < h[best, 1]):
                best = c
        if h[best, 0] > h[i, 0] or (h[best, 0] == h[i, 0] and h[best, 1] < h[i, 1]):
            t0 = h[best, 0]; t1 = h[best, 1]; t2 = h[best, 2]
            h[best, 0] = h[i, 0]; h[best, 1] = h[i, 1]; h[best, 2] = h[i, 2]
            h[i, 0] = t0; h[i, 1] = t1; h[i, 2] = t2
            i = best
        else:
            break


@njit(cache=True, nogil=True)
def grow_kernel(feat, width, height, seed_pix, seed_conf, gamma, sign,
                lam, rho, alpha_spatial, alpha_color, kappa0,
                sigma0_l, sigma0_ab, p_ih_floor, eta, visit_cap, rng):
    """Grow seeds into clusters; returns the label map plus cluster state.

    ``feat`` is (N, 5) float32 [x, y, L, a, b]; arithmetic is float64.
    ``state[j]`` packs the per-pixel bookkeeping: ``-1 - T[j]`` while
    unassigned (T = failed/successful visits so far), or the cluster index
    once assigned.
    """
    N = width * height
    K = seed_pix.shape[0]

    mu0 = np.empty((K, 5))
    sig0 = np.empty((K, 5))
    v0 = np.empty((K, 5))
    mu = np.empty((K, 5))
    var = np.empty((K, 5))
    acc = np.zeros((K, 5))
    acc2 = np.zeros((K, 5))
    nk = np.zeros(K, np.int64)
    gate = np.empty(K, np.int64)
    conf_used = np.empty(K)

    sxy = (lam * gamma) ** 2
    c_l = sigma0_l * (1.0 + sign * rho)
    c_ab = sigma0_ab * (1.0 + sign * rho)
    for k in range(K):
        p = seed_conf[k]
        if p < p_ih_floor:
            p = p_ih_floor
        if p > 1.0:
            p = 1.0
        conf_used[k] = p
        r = gamma / p
        gate[k] = int(math.ceil(r * r))
        vs = alpha_spatial * (r * r)
        vc = alpha_color * (r * r)
        v0[k, 0] = vs; v0[k, 1] = vs
        v0[k, 2] = vc; v0[k, 3] = vc; v0[k, 4] = vc
        sig0[k, 0] = sxy; sig0[k, 1] = sxy
        sig0[k, 2] = c_l; sig0[k, 3] = c_ab; sig0[k, 4] = c_ab
        for d in range(5):
            mu0[k, d] = feat[seed_pix[k], d]
            mu[k, d] = mu0[k, d]
            var[k, d] = sig0[k, d]

    state = np.full(N, -1, np.int32)  # -1 - T, or cluster index when >= 0
    tcount = np.zeros(N, np.uint8)    # draws taken, kept past assignment
    cap_vc = -1 - visit_cap

    caph = 4 * HOT_TARGET
    hot = np.empty((caph, 3))
    hn = 0
    capc = N + K + 64
    cold = np.empty((capc, 3))
    cn = 0
    theta = 1.0
    qbuf = np.empty(1024)

    cap2 = N // 4 + 64
    q2_pix = np.empty(cap2, np.int32)
    q2_clu = np.empty(cap2, np.int32)
    qn = 0

    seq = 0
    for k in range(K):
        hn = _hot_push(hot, hn, 1.0, float(seq), seed_pix[k] * PAY_SHIFT + k)
        seq += 1
        if hn >= caph:
            caph *= 2
            h2 = np.empty((caph, 3)); h2[:hn] = hot[:hn]; hot = h2

    flushes = 0
    max_flushes = visit_cap * N + 8
    while hn > 0 or cn > 0 or qn > 0:
        if hn == 0 and cn > 0:
            # refill: drop dead cold elements, move the top slice into hot
            w = 0
            mx = -1.0
            for i in range(cn):
                pix = int(cold[i, 2] * PAY_INV)
                s = state[pix]
                if s >= 0 or s <= cap_vc:
                    continue
                cold[w, 0] = cold[i, 0]; cold[w, 1] = cold[i, 1]; cold[w, 2] = cold[i, 2]
                if cold[w, 0] > mx:
                    mx = cold[w, 0]
                w += 1
            cn = w
            if cn > 0:
                if cn <= 2 * HOT_TARGET:
                    th = -1.0
                else:
                    stride = cn // 1024
                    for i in range(1024):
                        qbuf[i] = cold[i * stride, 0]
                    qs = np.sort(qbuf)
                    qi = 1024 - (HOT_TARGET * 1024) // cn
                    if qi < 0:
                        qi = 0
                    elif qi > 1023:
                        qi = 1023
                    th = qs[qi]
                    if th > mx:
                        th = mx
                w = 0
                mn = 2.0
                for i in range(cn):
                    if cold[i, 0] >= th:
                        if hn >= caph:
                            caph *= 2
                            h2 = np.empty((caph, 3)); h2[:hn] = hot[:hn]; hot = h2
                        hot[hn, 0] = cold[i, 0]; hot[hn, 1] = cold[i, 1]; hot[hn, 2] = cold[i, 2]
                        hn += 1
                        if cold[i, 0] < mn:
                            mn = cold[i, 0]
                    else:
                        cold[w, 0] = cold[i, 0]; cold[w, 1] = cold[i, 1]; cold[w, 2] = cold[i, 2]
                        w += 1
                cn = w
                theta = mn
                for i in range((hn - 2) >> 2, -1, -1):
                    _hot_sift_down(hot, hn, i)
            continue
        if hn > 6 * HOT_TARGET:
            # hot heap ballooned: raise theta, spill the tail back to cold
            stride = hn // 1024
            for i in range(1024):
                qbuf[i] = hot[i * stride, 0]
            qs = np.sort(qbuf)
            qi = 1024 - (HOT_TARGET * 1024) // hn
            if qi < 0:
                qi = 0
            elif qi > 1023:
                qi = 1023
            th = qs[qi]
            if th > hot[0, 0]:
                th = hot[0, 0]
            if cn + hn > capc:
                while cn + hn > capc:
                    capc *= 2
                c2 = np.empty((capc, 3)); c2[:cn] = cold[:cn]; cold = c2
            w = 0
            mn = 2.0
            for i in range(hn):
                if hot[i, 0] >= th:
                    hot[w, 0] = hot[i, 0]; hot[w, 1] = hot[i, 1]; hot[w, 2] = hot[i, 2]
                    if hot[i, 0] < mn:
                        mn = hot[i, 0]
                    w += 1
                else:
                    cold[cn, 0] = hot[i, 0]; cold[cn, 1] = hot[i, 1]; cold[cn, 2] = hot[i, 2]
                    cn += 1
            hn = w
            theta = mn
            for i in range((hn - 2) >> 2, -1, -1):
                _hot_sift_down(hot, hn, i)
        if hn > 0:
            P = hot[0, 0]
            pay = hot[0, 2]
            j = int(pay * PAY_INV)
            k = int(pay - j * PAY_SHIFT)
            hn -= 1
            if hn > 0:
                hot[0, 0] = hot[hn, 0]; hot[0, 1] = hot[hn, 1]; hot[0, 2] = hot[hn, 2]
                _hot_sift_down(hot, hn, 0)
            s = state[j]
            if s < 0 and s > cap_vc:
                u = _pcg32_uniform(rng)
                s -= 1  # visit counted before the acceptance test
                state[j] = s
                tcount[j] += 1
                if u < P:
                    state[j] = k
                    n = nk[k] + 1
                    nk[k] = n
                    nf = float(n)
                    inv_n = 1.0 / nf
                    inv_kap = 1.0 / (kappa0 + nf)
                    w_dm = nf * kappa0 * inv_kap
                    dogate = n >= gate[k]
                    for d in range(5):
                        z = np.float64(feat[j, d])
                        a1 = acc[k, d] + z
                        acc[k, d] = a1
                        a2 = acc2[k, d] + z * z
                        acc2[k, d] = a2
                        xb = a1 * inv_n
                        mu[k, d] = (kappa0 * mu0[k, d] + nf * xb) * inv_kap
                        if dogate:
                            ss = a2 - nf * (xb * xb)
                            if ss < 0.0:
                                ss = 0.0
                            dm = mu0[k, d] - xb
                            var[k, d] = (v0[k, d] * sig0[k, d] + ss + w_dm * (dm * dm)) \
                                * (1.0 / (v0[k, d] + nf))
                    x = int(feat[j, 0])
                    y = int(feat[j, 1])
                    m0 = mu[k, 0]; m1 = mu[k, 1]; m2 = mu[k, 2]; m3 = mu[k, 3]; m4 = mu[k, 4]
                    iv0 = 1.0 / var[k, 0]; iv1 = 1.0 / var[k, 1]; iv2 = 1.0 / var[k, 2]
                    iv3 = 1.0 / var[k, 3]; iv4 = 1.0 / var[k, 4]
                    if hn + 8 > caph:
                        caph *= 2
                        h2 = np.empty((caph, 3)); h2[:hn] = hot[:hn]; hot = h2
                    if cn + 8 > capc:
                        capc *= 2
                        c2 = np.empty((capc, 3)); c2[:cn] = cold[:cn]; cold = c2
                    kf = float(k)
                    for t in range(8):
                        if t == 0:
                            if y == 0 or x == 0:
                                continue
                            nj = j - width - 1
                        elif t == 1:
                            if y == 0:
                                continue
                            nj = j - width
                        elif t == 2:
                            if y == 0 or x == width - 1:
                                continue
                            nj = j - width + 1
                        elif t == 3:
                            if x == 0:
                                continue
                            nj = j - 1
                        elif t == 4:
                            if x == width - 1:
                                continue
                            nj = j + 1
                        elif t == 5:
                            if y == height - 1 or x == 0:
                                continue
                            nj = j + width - 1
                        elif t == 6:
                            if y == height - 1:
                                continue
                            nj = j + width
                        else:
                            if y == height - 1 or x == width - 1:
                                continue
                            nj = j + width + 1
                        if state[nj] < 0:
                            d0 = np.float64(feat[nj, 0]) - m0
                            d1 = np.float64(feat[nj, 1]) - m1
                            d2 = np.float64(feat[nj, 2]) - m2
                            d3 = np.float64(feat[nj, 3]) - m3
                            d4 = np.float64(feat[nj, 4]) - m4
                            dd = d0 * d0 * iv0 + d1 * d1 * iv1 + d2 * d2 * iv2 \
                                + d3 * d3 * iv3 + d4 * d4 * iv4
                            Pn = _pow_int(1.0 - _chi2_cdf5(dd), eta)
                            pay2 = nj * PAY_SHIFT + kf
                            if Pn >= theta:
                                hn = _hot_push(hot, hn, Pn, float(seq), pay2)
                            else:
                                cold[cn, 0] = Pn; cold[cn, 1] = float(seq); cold[cn, 2] = pay2
                                cn += 1
                            seq += 1
                elif s > cap_vc:
                    if qn >= cap2:
                        cap2 *= 2
                        a = np.empty(cap2, np.int32); a[:qn] = q2_pix[:qn]; q2_pix = a
                        b = np.empty(cap2, np.int32); b[:qn] = q2_clu[:qn]; q2_clu = b
                    q2_pix[qn] = j
                    q2_clu[qn] = k
                    qn += 1
        if hn == 0 and cn == 0 and qn > 0:
            # recycling: re-score everything in Q2 against current statistics
            flushes += 1
            if flushes > max_flushes:
                break
            if qn > capc:
                while qn > capc:
                    capc *= 2
                cold = np.empty((capc, 3))
            for t in range(qn):
                j = q2_pix[t]
                k = q2_clu[t]
                dd = 0.0
                for d in range(5):
                    df = np.float64(feat[j, d]) - mu[k, d]
                    dd += df * df * (1.0 / var[k, d])
                Pn = _pow_int(1.0 - _chi2_cdf5(dd), eta)
                pay2 = j * PAY_SHIFT + float(k)
                if Pn >= theta:
                    if hn >= caph:
                        caph *= 2
                        h2 = np.empty((caph, 3)); h2[:hn] = hot[:hn]; hot = h2
                    hn = _hot_push(hot, hn, Pn, float(seq), pay2)
                else:
                    cold[cn, 0] = Pn; cold[cn, 1] = float(seq); cold[cn, 2] = pay2
                    cn += 1
                seq += 1
            qn = 0

    labels = np.empty(N, np.int32)
    for j in range(N):
        s = state[j]
        labels[j] = s if s >= 0 else -1
    return labels, tcount, mu, var, nk, acc, acc2, mu0, sig0, v0, gate, conf_used


@njit(cache=True, nogil=True)
def sample_seeds_kernel(weights, width, height, gamma, rng):
    """One weighted candidate per gamma x gamma cell, accepted with prob w.

    Cells are scanned row-major, pixels within a cell row-major.  A cell with
    total weight below 1e-6 consumes no draws and yields no seed; otherwise
    exactly two draws are consumed (candidate choice, acceptance).
    """
    ncx = (width + gamma - 1) // gamma
    ncy = (height + gamma - 1) // gamma
    out_pix = np.empty(ncx * ncy, np.int64)
    out_conf = np.empty(ncx * ncy)
    m = 0
    for cy in range(ncy):
        y0 = cy * gamma
        y1 = y0 + gamma
        if y1 > height:
            y1 = height
        for cx in range(ncx):
            x0 = cx * gamma
            x1 = x0 + gamma
            if x1 > width:
                x1 = width
            total = 0.0
            for y in range(y0, y1):
                base = y * width
                for x in range(x0, x1):
                    total += weights[base + x]
            if total < 1e-6:
                continue
            target = _pcg32_uniform(rng) * total
            run = 0.0
            pick = -1
            done = False
            for y in range(y0, y1):
                base = y * width
                for x in range(x0, x1):
                    w = weights[base + x]
                    if w > 0.0:
                        run += w
                        pick = base + x
                        if target < run:
                            done = True
                            break
                if done:
                    break
            u = _pcg32_uniform(rng)
            if u < weights[pick]:
                out_pix[m] = pick
                out_conf[m] = weights[pick]
                m += 1
    return out_pix[:m].copy(), out_conf[:m].copy()


@njit(cache=True, nogil=True)
def cluster_score_kernel(feat, labels, scores, mu, var, eta):
    """Per-cluster weighted score means at final statistics, spread per pixel.

    Weight of pixel j in cluster k is the assignment probability computed
    from the cluster's final posterior; orphan pixels keep their input score.
    """
    N = labels.shape[0]
    K = mu.shape[0]
    num = np.zeros(K)
    den = np.zeros(K)
    for j in range(N):
        k = labels[j]
        if k >= 0:
            dd = 0.0
            for d in range(5):
                df = np.float64(feat[j, d]) - mu[k, d]
                dd += df * df * (1.0 / var[k, d])
            p = _pow_int(1.0 - _chi2_cdf5(dd), eta)
            num[k] += scores[j] * p
            den[k] += p
    out = np.empty(N)
    for j in range(N):
        k = labels[j]
        if k >= 0:
            out[j] = num[k] / den[k]
        else:
            out[j] = scores[j]
    return out
