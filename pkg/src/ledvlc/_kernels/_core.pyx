# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels; mirrors _numpy.py decision for decision."""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, ceil, cos, exp, floor, sqrt

cdef double PI = 3.141592653589793
cdef double TWO_PI = 6.283185307179586

PROFILE_UNIFORM = 0
PROFILE_FEATHERED = 1
PROFILE_GAUSSIAN = 2


cdef inline double _profile_value(double d, double radius, int profile,
                                  double feather) nogil:
    cdef double plateau, sigma
    if profile == 0 or (profile == 1 and feather <= 0.0):
        return 1.0
    if profile == 1:
        plateau = radius - feather
        if d <= plateau:
            return 1.0
        return 0.5 * (1.0 + cos(PI * (d - plateau) / feather))
    sigma = (2.0 * radius) / 6.0
    return exp(-(d * d) / (2.0 * sigma * sigma))


def render_spots(double[:, ::1] img, double[::1] xs, double[::1] ys,
                 double[::1] amps, double c_px, int profile, double feather,
                 int clip, double pcx, double pcy, double rmax):
    cdef Py_ssize_t h_img = img.shape[0]
    cdef Py_ssize_t w_img = img.shape[1]
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t k, x, y, x0, x1, y0, y1
    cdef double radius, r2, cx, cy, amp, dx, dy, d2, qx, qy, rmax2
    if c_px <= 0:
        return
    radius = c_px / 2.0
    r2 = radius * radius
    rmax2 = rmax * rmax
    for k in range(n):
        amp = amps[k]
        if amp == 0.0:
            continue
        cx = xs[k]
        cy = ys[k]
        x0 = <Py_ssize_t>floor(cx - radius)
        x1 = <Py_ssize_t>ceil(cx + radius)
        y0 = <Py_ssize_t>floor(cy - radius)
        y1 = <Py_ssize_t>ceil(cy + radius)
        if x0 < 0:
            x0 = 0
        if y0 < 0:
            y0 = 0
        if x1 > w_img - 1:
            x1 = w_img - 1
        if y1 > h_img - 1:
            y1 = h_img - 1
        for y in range(y0, y1 + 1):
            dy = y - cy
            for x in range(x0, x1 + 1):
                dx = x - cx
                d2 = dx * dx + dy * dy
                if d2 > r2:
                    continue
                if clip:
                    qx = x - pcx
                    qy = y - pcy
                    if qx * qx + qy * qy > rmax2:
                        continue
                img[y, x] += amp * _profile_value(sqrt(d2), radius, profile, feather)


def hough_accumulate(cnp.int64_t[::1] ex, cnp.int64_t[::1] ey,
                     double[::1] ux, double[::1] uy, double[::1] radii,
                     Py_ssize_t height, Py_ssize_t width):
    cdef Py_ssize_t n_r = radii.shape[0]
    cdef Py_ssize_t m = ex.shape[0]
    acc_np = np.zeros((n_r, height, width), dtype=np.int32)
    cdef cnp.int32_t[:, :, ::1] acc = acc_np
    cdef Py_ssize_t ri, k, a, b
    cdef double r, s
    cdef int side
    for ri in range(n_r):
        r = radii[ri]
        for side in range(2):
            s = 1.0 if side == 0 else -1.0
            for k in range(m):
                a = <Py_ssize_t>floor(ex[k] + s * r * ux[k] + 0.5)
                b = <Py_ssize_t>floor(ey[k] + s * r * uy[k] + 0.5)
                if a < 0 or a >= width or b < 0 or b >= height:
                    continue
                acc[ri, b, a] += 1
    return acc_np


def sector_sums(double[:, ::1] img, double a, double b, double radius):
    cdef Py_ssize_t h_img = img.shape[0]
    cdef Py_ssize_t w_img = img.shape[1]
    sums_np = np.zeros(16, dtype=np.float64)
    counts_np = np.zeros(16, dtype=np.int64)
    cdef double[::1] sums = sums_np
    cdef cnp.int64_t[::1] counts = counts_np
    cdef Py_ssize_t x0, x1, y0, y1, x, y, sec
    cdef double dx, dy, ang, r2
    r2 = radius * radius
    x0 = <Py_ssize_t>floor(a - radius)
    x1 = <Py_ssize_t>ceil(a + radius)
    y0 = <Py_ssize_t>floor(b - radius)
    y1 = <Py_ssize_t>ceil(b + radius)
    if x0 < 0:
        x0 = 0
    if y0 < 0:
        y0 = 0
    if x1 > w_img - 1:
        x1 = w_img - 1
    if y1 > h_img - 1:
        y1 = h_img - 1
    for y in range(y0, y1 + 1):
        dy = y - b
        for x in range(x0, x1 + 1):
            dx = x - a
            if dx * dx + dy * dy > r2:
                continue
            ang = atan2(dy, dx)
            if ang < 0:
                ang += TWO_PI
            sec = <Py_ssize_t>(ang / (TWO_PI / 16.0))
            if sec > 15:
                sec = 15
            sums[sec] += img[y, x]
            counts[sec] += 1
    return sums_np, counts_np
