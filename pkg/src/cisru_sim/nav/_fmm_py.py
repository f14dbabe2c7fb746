"""Pure-Python fast-marching kernel (fallback when the compiled extension is
unavailable). Must stay numerically identical to the Cython version: same
update formulas, same (value, index) heap ordering.

The local crossing cost between two cells averages their inverse speeds
(midpoint rule), so arrival times agree with a graph metric of edge cost
h*(1/Vi+1/Vj)/2. On a uniform speed field the axis update reduces exactly to
T = (Tx+Ty+sqrt(2c^2-(Tx-Ty)^2))/2 with the one-sided fallback min(Tx,Ty)+c.
With `diagonals` the wavefront also crosses cell corners (edge length
h*sqrt(2), never squeezing between two touching obstacles), which removes
the 4-neighborhood's diagonal startup error.
"""

from __future__ import annotations

import heapq
import math

import numpy as np

INF = math.inf
SQRT2 = math.sqrt(2.0)


def march(speed: np.ndarray, h: float, src_rows: np.ndarray, src_cols: np.ndarray,
          diagonals: bool = False) -> np.ndarray:
    """Solve |grad T| = 1/V by first-order upwind fast marching. `speed` is V
    per cell; cells with V <= 0 are impassable and keep T = +inf. Sources
    start at T = 0."""
    height, width = speed.shape
    T = np.full((height, width), INF, dtype=np.float64)
    frozen = np.zeros((height, width), dtype=bool)
    spd = speed

    heap: list[tuple[float, int]] = []
    for r, c in zip(src_rows.tolist(), src_cols.tolist()):
        if T[r, c] > 0.0:
            T[r, c] = 0.0
            heapq.heappush(heap, (0.0, r * width + c))

    while heap:
        t, idx = heapq.heappop(heap)
        r, c = divmod(idx, width)
        if frozen[r, c]:
            continue
        frozen[r, c] = True
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                if not diagonals and dr != 0 and dc != 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < height and 0 <= nc < width):
                    continue
                if frozen[nr, nc]:
                    continue
                v = spd[nr, nc]
                if v <= 0.0:
                    continue
                if dr != 0 and dc != 0 and (spd[r, nc] <= 0.0 or spd[nr, c] <= 0.0):
                    continue
                inv_v = 1.0 / v

                tx = INF
                cx = 0.0
                if nc > 0 and frozen[nr, nc - 1] and spd[nr, nc - 1] > 0.0 \
                        and T[nr, nc - 1] < tx:
                    tx = T[nr, nc - 1]
                    cx = h * (inv_v + 1.0 / spd[nr, nc - 1]) * 0.5
                if nc + 1 < width and frozen[nr, nc + 1] and spd[nr, nc + 1] > 0.0 \
                        and T[nr, nc + 1] < tx:
                    tx = T[nr, nc + 1]
                    cx = h * (inv_v + 1.0 / spd[nr, nc + 1]) * 0.5
                ty = INF
                cy = 0.0
                if nr > 0 and frozen[nr - 1, nc] and spd[nr - 1, nc] > 0.0 \
                        and T[nr - 1, nc] < ty:
                    ty = T[nr - 1, nc]
                    cy = h * (inv_v + 1.0 / spd[nr - 1, nc]) * 0.5
                if nr + 1 < height and frozen[nr + 1, nc] and spd[nr + 1, nc] > 0.0 \
                        and T[nr + 1, nc] < ty:
                    ty = T[nr + 1, nc]
                    cy = h * (inv_v + 1.0 / spd[nr + 1, nc]) * 0.5

                if tx != INF and ty != INF:
                    a = 1.0 / (cx * cx) + 1.0 / (cy * cy)
                    b = -2.0 * (tx / (cx * cx) + ty / (cy * cy))
                    k = tx * tx / (cx * cx) + ty * ty / (cy * cy) - 1.0
                    disc = b * b - 4.0 * a * k
                    if disc >= 0.0:
                        tnew = (-b + math.sqrt(disc)) / (2.0 * a)
                    else:
                        tnew = tx + cx if tx + cx < ty + cy else ty + cy
                elif tx != INF:
                    tnew = tx + cx
                elif ty != INF:
                    tnew = ty + cy
                else:
                    tnew = INF

                if diagonals:
                    for er, ec in ((-1, -1), (-1, 1), (1, -1), (1, 1)):
                        ar, ac = nr + er, nc + ec
                        if not (0 <= ar < height and 0 <= ac < width):
                            continue
                        if not frozen[ar, ac] or spd[ar, ac] <= 0.0:
                            continue
                        if spd[nr, ac] <= 0.0 or spd[ar, nc] <= 0.0:
                            continue
                        cand = T[ar, ac] + SQRT2 * h * (inv_v + 1.0 / spd[ar, ac]) * 0.5
                        if cand < tnew:
                            tnew = cand

                if tnew < T[nr, nc]:
                    T[nr, nc] = tnew
                    heapq.heappush(heap, (tnew, nr * width + nc))
    return T
