"""Independent numpy/scipy re-derivations of the core math.

These rebuild each computation from its definition in a different language
and numeric stack, then compare against the C++ implementation.
"""

import math

import numpy as np
import pytest

import _avth as avth


def test_log_mel_matches_numpy_rederivation():
    rng = np.random.default_rng(5)
    samples = (rng.normal(0, 4000, size=16000)).astype(np.int16)

    got = avth.log_mel(samples, 16000)

    # Reflect-padded STFT, periodic Hann, 400/160, power spectrum.
    x = samples.astype(np.float64) / 32768.0
    pad = 200
    xp = np.concatenate([x[1 : pad + 1][::-1], x, x[-pad - 1 : -1][::-1]])
    win = 0.5 * (1 - np.cos(2 * np.pi * np.arange(400) / 400))
    frames = 1 + len(x) // 160
    power = np.empty((frames, 201))
    for t in range(frames):
        seg = xp[t * 160 : t * 160 + 400] * win
        spec = np.fft.rfft(seg, n=400)
        power[t] = np.abs(spec) ** 2

    # 80 triangular HTK-mel filters on 0..8000 Hz.
    def hz_to_mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def mel_to_hz(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    pts = mel_to_hz(hz_to_mel(8000.0) * np.arange(82) / 81.0)
    bins = np.arange(201) * 16000.0 / 400.0
    fb = np.zeros((80, 201))
    for i in range(80):
        rise = (bins - pts[i]) / (pts[i + 1] - pts[i])
        fall = (pts[i + 2] - bins) / (pts[i + 2] - pts[i + 1])
        fb[i] = np.maximum(0.0, np.minimum(rise, fall))

    want = np.log(power @ fb.T + 1e-10)
    assert got.shape == want.shape
    assert np.max(np.abs(got - want)) < 1e-9


def test_rotation_matches_scipy():
    scipy_rot = pytest.importorskip("scipy.spatial.transform").Rotation
    pitch, yaw, roll = 0.31, -0.22, 0.57
    got = avth.rotation_from_euler(pitch, yaw, roll)
    # Rz(roll) @ Ry(yaw) @ Rx(pitch), intrinsic matrix product.
    want = scipy_rot.from_euler("ZYX", [roll, yaw, pitch]).as_matrix()
    assert np.allclose(got, want, atol=1e-12)


def test_compose_target_matches_numpy_rederivation():
    rng = np.random.default_rng(11)
    k = 7
    xc = rng.uniform(-0.7, 0.7, size=(k, 3))

    def rand_motion():
        s = float(np.exp(rng.normal(0, 0.2)))
        r = avth.rotation_from_euler(*rng.normal(0, 0.3, size=3))
        d = rng.normal(0, 0.05, size=(k, 3))
        t = rng.normal(0, 0.2, size=3)
        return (s, r, d, t)

    key, ref, tgt = rand_motion(), rand_motion(), rand_motion()
    mouth = rng.normal(0, 0.02, size=(k, 3))
    got = avth.compose_target(xc, key, ref, tgt, mouth)

    sk, rk, dk, tk = key
    s0, r0, d0, t0 = ref
    si, ri, di, ti = tgt
    composite = ri @ r0.T @ rk
    want = sk * (si / s0) * (xc @ composite) + (dk + di - d0) + (tk + ti - t0) + mouth
    assert np.allclose(got, want, atol=1e-12)

    # Row-vector convention for the keyframe path too.
    got_key = avth.compose_key(xc, sk, rk, dk, tk)
    assert np.allclose(got_key, sk * (xc @ rk + dk) + tk, atol=1e-12)


def test_warp_matches_numpy_rederivation():
    rng = np.random.default_rng(13)
    c, d, h, w = 2, 3, 5, 6
    vol = rng.normal(size=(c, d, h, w))
    k = 4
    x_key = rng.uniform(-0.5, 0.5, size=(k, 3))
    x_trg = x_key + rng.uniform(-0.2, 0.2, size=(k, 3))
    sigma = 0.3

    got = avth.warp(vol, x_key, x_trg, sigma)

    def normalized(i, n):
        return -1.0 + 2.0 * i / (n - 1) if n > 1 else 0.0

    def sample(ch, fz, fy, fx):
        z0, y0, x0 = int(np.floor(fz)), int(np.floor(fy)), int(np.floor(fx))
        tz, ty, tx = fz - z0, fy - y0, fx - x0
        acc = 0.0
        for dz in (0, 1):
            for dy in (0, 1):
                for dx in (0, 1):
                    zz, yy, xx = z0 + dz, y0 + dy, x0 + dx
                    if 0 <= zz < d and 0 <= yy < h and 0 <= xx < w:
                        v = vol[ch, zz, yy, xx]
                    else:
                        v = 0.0
                    wgt = (tz if dz else 1 - tz) * (ty if dy else 1 - ty) * (tx if dx else 1 - tx)
                    acc += v * wgt
        return acc

    want = np.empty_like(vol)
    for iz in range(d):
        for iy in range(h):
            for ix in range(w):
                p = np.array([normalized(ix, w), normalized(iy, h), normalized(iz, d)])
                logits = -np.sum((p - x_key) ** 2, axis=1) / (2 * sigma * sigma)
                weights = np.exp(logits - logits.max())
                weights /= weights.sum()
                u = weights @ (x_trg - x_key)
                fx = ix - u[0] * (w - 1) / 2.0
                fy = iy - u[1] * (h - 1) / 2.0
                fz = iz - u[2] * (d - 1) / 2.0
                for ch in range(c):
                    want[ch, iz, iy, ix] = sample(ch, fz, fy, fx)

    assert np.max(np.abs(got - want)) < 1e-9


def test_bd_rate_matches_numpy_polyfit_route():
    # Classic four-point Bjontegaard delta: fit log10(rate) as a cubic in the
    # metric with numpy, integrate analytically, compare.
    anchor = [(100.0, 30.0), (210.0, 33.2), (430.0, 35.9), (820.0, 37.8)]
    test = [(90.0, 30.4), (185.0, 33.0), (400.0, 36.2), (760.0, 38.1)]

    def numpy_bd(a, t):
        am, ar = np.array([p[1] for p in a]), np.log10([p[0] for p in a])
        tm, tr = np.array([p[1] for p in t]), np.log10([p[0] for p in t])
        lo, hi = max(am.min(), tm.min()), min(am.max(), tm.max())
        pa = np.polyfit(am, ar, 3)
        pt = np.polyfit(tm, tr, 3)
        ia = np.polyval(np.polyint(pa), [lo, hi])
        it = np.polyval(np.polyint(pt), [lo, hi])
        delta = ((it[1] - it[0]) - (ia[1] - ia[0])) / (hi - lo)
        return (10.0 ** delta - 1.0) * 100.0

    got = avth.bd_rate(anchor, test)
    want = numpy_bd(anchor, test)
    assert got == pytest.approx(want, abs=1e-6)


def test_resample_matches_length_and_tone_scipy_free():
    # 3 kHz tone through 44.1k -> 16k: irrational-ish ratio, length contract
    # and passband amplitude.
    n = 44100
    t = np.arange(n) / 44100.0
    tone = (7000 * np.sin(2 * np.pi * 3000 * t)).astype(np.int16)
    out = avth.resample_audio(tone, 44100, 16000)
    assert len(out) == round(n * 16000 / 44100)
    seg = out[500:-500].astype(np.float64)
    ts = (np.arange(len(seg)) + 500) / 16000.0
    a = 2 * np.mean(seg * np.cos(2 * np.pi * 3000 * ts))
    b = 2 * np.mean(seg * np.sin(2 * np.pi * 3000 * ts))
    assert math.hypot(a, b) == pytest.approx(7000, rel=0.02)
