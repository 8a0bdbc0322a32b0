"""Numba-compiled inner loops.

Everything here is private. Public modules (rng, activation, recurrent) wrap
these kernels; nothing else should import this module. All kernels are
sequential and allocation-free in their hot paths so results are bit-identical
regardless of thread count or call batching.
"""

import numpy as np
from numba import njit

# ---------------------------------------------------------------------------
# xoshiro256** generator
# ---------------------------------------------------------------------------

_U5 = np.uint64(5)
_U7 = np.uint64(7)
_U9 = np.uint64(9)
_U11 = np.uint64(11)
_U17 = np.uint64(17)
_U19 = np.uint64(19)
_U45 = np.uint64(45)
_U57 = np.uint64(57)
_ONE = np.uint64(1)

# 53-bit mantissa scale: uniforms are (u64 >> 11) * 2**-53, in [0, 1)
_INV53 = 1.0 / 9007199254740992.0
_TWO_PI = 6.283185307179586
_PI = 3.141592653589793


@njit(cache=True)
def _next_u64(s):
    x = s[1] * _U5
    r = ((x << _U7) | (x >> _U57)) * _U9
    t = s[1] << _U17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = (s[3] << _U45) | (s[3] >> _U19)
    return r


@njit(cache=True)
def fill_u64(s, out):
    for i in range(out.shape[0]):
        out[i] = _next_u64(s)


@njit(cache=True)
def fill_uniform(s, out):
    for i in range(out.shape[0]):
        out[i] = np.float64(_next_u64(s) >> _U11) * _INV53


@njit(cache=True)
def fill_gaussian(s, pending, out):
    """Box-Muller pairs from consecutive 53-bit uniforms.

    Each pair of uniforms (u1, u2) yields radius*cos(angle) then
    radius*sin(angle); the sine is taken as sign(pi - angle) sqrt(1 - cos^2),
    which keeps the hot loop to a single trig call. An odd trailing draw
    leaves the sine half pending on the stream (pending[0] = flag,
    pending[1] = value), so fill(a) followed by fill(b) equals fill(a + b).
    """
    n = out.shape[0]
    i = 0
    if pending[0] != 0.0 and n > 0:
        out[0] = pending[1]
        pending[0] = 0.0
        i = 1
    while i < n:
        u1 = np.float64(_next_u64(s) >> _U11) * _INV53
        u2 = np.float64(_next_u64(s) >> _U11) * _INV53
        rad = np.sqrt(-2.0 * np.log1p(-u1))
        ang = _TWO_PI * u2
        c = np.cos(ang)
        sn = np.sqrt(max(1.0 - c * c, 0.0))
        if ang >= _PI:
            sn = -sn
        out[i] = rad * c
        i += 1
        if i < n:
            out[i] = rad * sn
            i += 1
        else:
            pending[0] = 1.0
            pending[1] = rad * sn
    return i


@njit(cache=True)
def shuffle_in_place(s, idx):
    """Fisher-Yates, drawing j in [0, i] by masked rejection (unbiased)."""
    n = idx.shape[0]
    for i in range(n - 1, 0, -1):
        span = np.uint64(i)
        mask = span
        mask |= mask >> _ONE
        mask |= mask >> np.uint64(2)
        mask |= mask >> np.uint64(4)
        mask |= mask >> np.uint64(8)
        mask |= mask >> np.uint64(16)
        mask |= mask >> np.uint64(32)
        while True:
            j = _next_u64(s) & mask
            if j <= span:
                break
        tmp = idx[i]
        idx[i] = idx[np.int64(j)]
        idx[np.int64(j)] = tmp


# ---------------------------------------------------------------------------
# Rectangular-barrier transmission coefficient, hbar^2/2m = 1 units
# ---------------------------------------------------------------------------

# |E - V0| <= BRANCH_DELTA * V0 switches to the stitched series so the
# removable singularity at E = V0 never hits 0/0.
BRANCH_DELTA = 1e-6
# Beyond this kappa*a the sinh branch is evaluated asymptotically in the log
# domain; sinh**2 alone would overflow near kappa*a ~ 355.
DEEP_KAPPA_A = 20.0


@njit(cache=True)
def transmission_scalar(e, v0, a):
    u = v0 - e
    if abs(u) <= BRANCH_DELTA * v0:
        x2 = u * a * a
        f = 1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 45.0
        g = v0 * v0 * a * a * f / (4.0 * e)
        return 1.0 / (1.0 + g)
    if u > 0.0:
        kappa = np.sqrt(u)
        ka = kappa * a
        if ka > DEEP_KAPPA_A:
            log_t = np.log(16.0 * e * u / (v0 * v0)) - 2.0 * ka
            return np.exp(log_t)
        sh = np.sinh(ka)
        g = v0 * v0 * sh * sh / (4.0 * e * u)
        return 1.0 / (1.0 + g)
    w = -u
    k = np.sqrt(w)
    sn = np.sin(k * a)
    g = v0 * v0 * sn * sn / (4.0 * e * w)
    return 1.0 / (1.0 + g)


@njit(cache=True)
def transmission_grad_scalar(e, v0, a):
    # written as T (1 - T) * d(-ln g)/dE so extreme energies never hit
    # inf/inf; T and 1 - T are both computed directly from g
    u = v0 - e
    if abs(u) <= BRANCH_DELTA * v0:
        a2 = a * a
        x2 = u * a2
        f = 1.0 + x2 / 3.0 + 2.0 * x2 * x2 / 45.0
        fp = a2 / 3.0 + 4.0 * u * a2 * a2 / 45.0
        c = v0 * v0 * a2 / 4.0
        g = c * f / e
        return c * (e * fp + f) / (e * e * (1.0 + g) * (1.0 + g))
    if u > 0.0:
        kappa = np.sqrt(u)
        ka = kappa * a
        if ka > DEEP_KAPPA_A:
            log_t = np.log(16.0 * e * u / (v0 * v0)) - 2.0 * ka
            t = np.exp(log_t)
            return t * (1.0 / e - 1.0 / u + a / kappa)
        sh = np.sinh(ka)
        ch = np.cosh(ka)
        g = v0 * v0 * sh * sh / (4.0 * e * u)
        t = 1.0 / (1.0 + g)
        one_minus_t = g / (1.0 + g)
        return one_minus_t * t * (a * ch / (sh * kappa) + 1.0 / e - 1.0 / u)
    w = -u
    k = np.sqrt(w)
    sn = np.sin(k * a)
    cs = np.cos(k * a)
    g = v0 * v0 * sn * sn / (4.0 * e * w)
    t = 1.0 / (1.0 + g)
    one_minus_t = g / (1.0 + g)
    if sn == 0.0:  # exact resonance: interior maximum
        return 0.0
    return one_minus_t * t * (1.0 / e + 1.0 / w - a * cs / (sn * k))


# Energy maps: pre-activation x -> positive energy E plus dE/dx.
# kind 0 = smooth positive (softplus, scale s), kind 1 = identity clamp.
EMAP_SMOOTH = 0
EMAP_CLAMP = 1
CLAMP_EPS = 1e-12
# smallest positive normal double; keeps the smooth map > 0 for every finite
# x even where exp underflows, so transmission's E > 0 domain always holds
TINY_ENERGY = 2.2250738585072014e-308


@njit(cache=True)
def energy_scalar(x, kind, s):
    if kind == EMAP_CLAMP:
        return x if x > CLAMP_EPS else CLAMP_EPS
    t = x / s
    if t > 40.0:
        return x + s * np.log1p(np.exp(-t))
    if t < -40.0:
        e = s * np.exp(t)
        return e if e > TINY_ENERGY else TINY_ENERGY
    return s * np.log1p(np.exp(t))


@njit(cache=True)
def energy_grad_scalar(x, kind, s):
    if kind == EMAP_CLAMP:
        return 1.0 if x > CLAMP_EPS else 0.0
    t = x / s
    if t >= 0.0:
        return 1.0 / (1.0 + np.exp(-t))
    et = np.exp(t)
    return et / (1.0 + et)


@njit(cache=True)
def qt_activate_kernel(x, v0, a, kind, s, act, der):
    for i in range(x.shape[0]):
        e = energy_scalar(x[i], kind, s)
        act[i] = transmission_scalar(e, v0, a)
        der[i] = transmission_grad_scalar(e, v0, a) * energy_grad_scalar(x[i], kind, s)


@njit(cache=True)
def relu_kernel(x, act, der):
    for i in range(x.shape[0]):
        if x[i] > 0.0:
            act[i] = x[i]
            der[i] = 1.0
        else:
            act[i] = 0.0
            der[i] = 0.0


# ---------------------------------------------------------------------------
# Elman cell: fused forward / backward over one token sequence
# ---------------------------------------------------------------------------

ACT_QT = 0
ACT_RELU = 1


@njit(cache=True)
def rnn_forward_kernel(ids, emb, wxh, whh, bh, head_w, head_b,
                       act_kind, v0, a, emap_kind, emap_s,
                       hs, pre, der):
    """Fills hs/pre/der (T, H) and returns the logit z = head . h_T + b."""
    t_len = ids.shape[0]
    h_dim = bh.shape[0]
    e_dim = emb.shape[1]
    for t in range(t_len):
        tok = ids[t]
        for j in range(h_dim):
            acc = bh[j]
            for k in range(e_dim):
                acc += wxh[j, k] * emb[tok, k]
            if t > 0:
                for k in range(h_dim):
                    acc += whh[j, k] * hs[t - 1, k]
            pre[t, j] = acc
        if act_kind == ACT_QT:
            for j in range(h_dim):
                e = energy_scalar(pre[t, j], emap_kind, emap_s)
                hs[t, j] = transmission_scalar(e, v0, a)
                der[t, j] = (transmission_grad_scalar(e, v0, a)
                             * energy_grad_scalar(pre[t, j], emap_kind, emap_s))
        else:
            for j in range(h_dim):
                if pre[t, j] > 0.0:
                    hs[t, j] = pre[t, j]
                    der[t, j] = 1.0
                else:
                    hs[t, j] = 0.0
                    der[t, j] = 0.0
    z = head_b
    for j in range(h_dim):
        z += head_w[j] * hs[t_len - 1, j]
    return z


@njit(cache=True)
def rnn_bptt_kernel(ids, emb, wxh, whh, bh, head_w, head_b,
                    act_kind, v0, a, emap_kind, emap_s, label,
                    d_emb, d_wxh, d_whh, d_bh, d_head_w, d_head_b,
                    hs, pre, der, dh):
    """Unrolled reverse-mode pass; gradient arrays must arrive zeroed.

    Returns the binary cross-entropy loss. dh is (H,) scratch.
    """
    t_len = ids.shape[0]
    h_dim = bh.shape[0]
    e_dim = emb.shape[1]
    z = rnn_forward_kernel(ids, emb, wxh, whh, bh, head_w, head_b,
                           act_kind, v0, a, emap_kind, emap_s, hs, pre, der)
    # stable BCE from the logit: ln(1 + e^z) - y z
    if z > 0.0:
        loss = z + np.log1p(np.exp(-z)) - label * z
        p = 1.0 / (1.0 + np.exp(-z))
    else:
        ez = np.exp(z)
        loss = np.log1p(ez) - label * z
        p = ez / (1.0 + ez)
    dz = p - label
    d_head_b[0] += dz
    for j in range(h_dim):
        d_head_w[j] += dz * hs[t_len - 1, j]
        dh[j] = dz * head_w[j]
    for t in range(t_len - 1, -1, -1):
        tok = ids[t]
        for j in range(h_dim):
            delta = dh[j] * der[t, j]
            d_bh[j] += delta
            for k in range(e_dim):
                d_wxh[j, k] += delta * emb[tok, k]
                d_emb[tok, k] += delta * wxh[j, k]
            if t > 0:
                for k in range(h_dim):
                    d_whh[j, k] += delta * hs[t - 1, k]
            dh[j] = delta  # reuse as delta buffer for the recurrent pull-back
        if t > 0:
            for k in range(h_dim):
                acc = 0.0
                for j in range(h_dim):
                    acc += whh[j, k] * dh[j]
                pre[t, k] = acc  # pre row t is dead now; reuse as next dh
            for k in range(h_dim):
                dh[k] = pre[t, k]
    return loss
