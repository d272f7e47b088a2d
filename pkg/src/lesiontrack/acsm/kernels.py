"""Compiled per-anchor search loops.

For each anchor the patch side is tried from the largest that fits down to 1
and the first size with a lattice match anywhere in the window wins; a match
at side k implies one at every smaller side, so this equals the maximum.
Candidate anchors are scanned in (z, y, x) lexicographic order in 3D and
(row, col) order in 2D, so the first match reported is deterministic.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _match_3d(c1, px, py, pz, c2, qx, qy, qz, k, dx, dy, dz):
    for i in range(0, k, dx):
        for j in range(0, k, dy):
            for l in range(0, k, dz):
                if c1[px + i, py + j, pz + l] != c2[qx + i, qy + j, qz + l]:
                    return False
    return True


@njit(cache=True, nogil=True)
def anchor_3d(c1, c2, px, py, pz, kmax, dx, dy, dz, r):
    """Return ``(k, qx, qy, qz)``; ``k == 0`` and ``q == -1`` when nothing matches."""
    n2x, n2y, n2z = c2.shape
    v = c1[px, py, pz]
    for k in range(kmax, 0, -1):
        zlo = max(0, pz - r)
        zhi = min(pz + r, n2z - k)
        ylo = max(0, py - r)
        yhi = min(py + r, n2y - k)
        xlo = max(0, px - r)
        xhi = min(px + r, n2x - k)
        for qz in range(zlo, zhi + 1):
            for qy in range(ylo, yhi + 1):
                for qx in range(xlo, xhi + 1):
                    if c2[qx, qy, qz] != v:
                        continue
                    if _match_3d(c1, px, py, pz, c2, qx, qy, qz, k, dx, dy, dz):
                        return k, qx, qy, qz
    return 0, -1, -1, -1


@njit(cache=True, nogil=True)
def k_map_3d(c1, c2, stride, cap, dx, dy, dz, r):
    n1x, n1y, n1z = c1.shape
    ax = (n1x + stride - 1) // stride
    ay = (n1y + stride - 1) // stride
    az = (n1z + stride - 1) // stride
    kmap = np.zeros((ax, ay, az), dtype=np.int64)
    kmax_map = np.zeros((ax, ay, az), dtype=np.int64)
    for a in range(ax):
        px = a * stride
        for b in range(ay):
            py = b * stride
            for c in range(az):
                pz = c * stride
                kmax = min(n1x - px, n1y - py, n1z - pz, cap)
                kmax_map[a, b, c] = kmax
                kmap[a, b, c] = anchor_3d(c1, c2, px, py, pz, kmax, dx, dy, dz, r)[0]
    return kmap, kmax_map


@njit(cache=True, nogil=True)
def _match_2d(a, pr, pc, b, qr, qc, k, drow, dcol):
    for i in range(0, k, drow):
        for j in range(0, k, dcol):
            if a[pr + i, pc + j] != b[qr + i, qc + j]:
                return False
    return True


@njit(cache=True, nogil=True)
def anchor_2d(a, b, pr, pc, kmax, drow, dcol, r):
    nbr, nbc = b.shape
    v = a[pr, pc]
    for k in range(kmax, 0, -1):
        rlo = max(0, pr - r)
        rhi = min(pr + r, nbr - k)
        clo = max(0, pc - r)
        chi = min(pc + r, nbc - k)
        for qr in range(rlo, rhi + 1):
            for qc in range(clo, chi + 1):
                if b[qr, qc] != v:
                    continue
                if _match_2d(a, pr, pc, b, qr, qc, k, drow, dcol):
                    return k, qr, qc
    return 0, -1, -1


@njit(cache=True, nogil=True)
def k_map_2d(a, b, stride, cap, drow, dcol, r):
    nr, nc = a.shape
    ar = (nr + stride - 1) // stride
    ac = (nc + stride - 1) // stride
    kmap = np.zeros((ar, ac), dtype=np.int64)
    kmax_map = np.zeros((ar, ac), dtype=np.int64)
    for i in range(ar):
        pr = i * stride
        for j in range(ac):
            pc = j * stride
            kmax = min(nr - pr, nc - pc, cap)
            kmax_map[i, j] = kmax
            kmap[i, j] = anchor_2d(a, b, pr, pc, kmax, drow, dcol, r)[0]
    return kmap, kmax_map
