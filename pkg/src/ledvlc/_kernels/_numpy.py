"""Pure-NumPy implementations of the pixel kernels.

Behaviour must stay in lockstep with the compiled core in _core.pyx: pixel
membership uses squared distances, vote targets round half away from zero,
and sector indices clamp to 15. The parity test suite compares the two.
"""

import numpy as np

PROFILE_UNIFORM = 0
PROFILE_FEATHERED = 1
PROFILE_GAUSSIAN = 2


def _profile(d, radius, profile, feather):
    if profile == PROFILE_UNIFORM or (profile == PROFILE_FEATHERED and feather <= 0.0):
        return np.ones_like(d)
    if profile == PROFILE_FEATHERED:
        plateau = radius - feather
        h = np.ones_like(d)
        roll = d > plateau
        h[roll] = 0.5 * (1.0 + np.cos(np.pi * (d[roll] - plateau) / feather))
        return h
    if profile == PROFILE_GAUSSIAN:
        sigma = (2.0 * radius) / 6.0
        return np.exp(-(d * d) / (2.0 * sigma * sigma))
    raise ValueError(f"unknown profile id {profile}")


def render_spots(img, xs, ys, amps, c_px, profile, feather, clip, pcx, pcy, rmax):
    """Accumulate blur disks of diameter c_px into img (in place).

    clip != 0 zeroes contributions from pixels beyond rmax of the principal
    point (pcx, pcy). Pixel centres decide membership; no area sampling.
    """
    if c_px <= 0:
        return
    h_img, w_img = img.shape
    radius = c_px / 2.0
    r2 = radius * radius
    for cx, cy, amp in zip(xs, ys, amps):
        if amp == 0.0:
            continue
        x0 = max(0, int(np.floor(cx - radius)))
        x1 = min(w_img - 1, int(np.ceil(cx + radius)))
        y0 = max(0, int(np.floor(cy - radius)))
        y1 = min(h_img - 1, int(np.ceil(cy + radius)))
        if x0 > x1 or y0 > y1:
            continue
        px = np.arange(x0, x1 + 1, dtype=np.float64)
        py = np.arange(y0, y1 + 1, dtype=np.float64)[:, None]
        dx = px - cx
        dy = py - cy
        d2 = dx * dx + dy * dy
        mask = d2 <= r2
        if clip:
            qx = px - pcx
            qy = py - pcy
            mask &= (qx * qx + qy * qy) <= rmax * rmax
        if not mask.any():
            continue
        d = np.sqrt(d2[mask])
        img[y0 : y1 + 1, x0 : x1 + 1][mask] += amp * _profile(d, radius, profile, feather)


def hough_accumulate(ex, ey, ux, uy, radii, height, width):
    """Vote along +/- gradient directions at each radius.

    Returns an int32 accumulator of shape (len(radii), height, width).
    Targets quantize with floor(v + 0.5); out-of-frame votes are dropped.
    """
    n_r = len(radii)
    acc = np.zeros((n_r, height, width), dtype=np.int32)
    exf = ex.astype(np.float64)
    eyf = ey.astype(np.float64)
    for ri in range(n_r):
        r = float(radii[ri])
        for sign in (1.0, -1.0):
            ax = np.floor(exf + sign * r * ux + 0.5).astype(np.int64)
            ay = np.floor(eyf + sign * r * uy + 0.5).astype(np.int64)
            ok = (ax >= 0) & (ax < width) & (ay >= 0) & (ay < height)
            if not ok.any():
                continue
            flat = ay[ok] * width + ax[ok]
            acc[ri] += np.bincount(flat, minlength=height * width).reshape(
                height, width
            ).astype(np.int32)
    return acc


def sector_sums(img, a, b, radius):
    """Per-sector intensity sums and pixel counts inside a disk.

    The disk of the given radius about (a, b) is split into 16 equal
    angular sectors by the angle of (pixel - centre); sector 0 starts at
    the +x axis. Returns (sums[16], counts[16]).
    """
    h_img, w_img = img.shape
    sums = np.zeros(16, dtype=np.float64)
    counts = np.zeros(16, dtype=np.int64)
    x0 = max(0, int(np.floor(a - radius)))
    x1 = min(w_img - 1, int(np.ceil(a + radius)))
    y0 = max(0, int(np.floor(b - radius)))
    y1 = min(h_img - 1, int(np.ceil(b + radius)))
    if x0 > x1 or y0 > y1:
        return sums, counts
    px = np.arange(x0, x1 + 1, dtype=np.float64)
    py = np.arange(y0, y1 + 1, dtype=np.float64)[:, None]
    dx = px - a
    dy = py - b
    mask = dx * dx + dy * dy <= radius * radius
    if not mask.any():
        return sums, counts
    ang = np.mod(np.arctan2(np.broadcast_to(dy, mask.shape)[mask],
                            np.broadcast_to(dx, mask.shape)[mask]), 2.0 * np.pi)
    sec = np.minimum((ang / (2.0 * np.pi / 16.0)).astype(np.int64), 15)
    vals = img[y0 : y1 + 1, x0 : x1 + 1][mask]
    sums += np.bincount(sec, weights=vals, minlength=16)
    counts += np.bincount(sec, minlength=16)
    return sums, counts
