"""Occupancy-grid map merging.

Two grids of the same environment related by an unknown rigid transform are
aligned by corner keypoints with orientation-normalized binary patch
descriptors, brute-force mutual matching, and random-sample consensus over
two-point subsets, then fused cell by cell with a conservative conflict rule
(an obstacle report is never erased by a free one).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .geometry import Pose2D, normalize_angle
from .grid import CellState, GridMap, SemLabel

DESCRIPTOR_SIDE = 16      # bits = side * side
DESCRIPTOR_SPACING = 1.5  # cells between samples; wide patches disambiguate
                          # same-shaped corners at different places
HARRIS_K = 0.04
RESPONSE_FLOOR = 1e-6
RESPONSE_REL = 0.005
NMS_RADIUS = 2  # 5x5 window
RATIO_TEST = 0.8
MAX_TIED_MATCHES = 4
CONSENSUS_ITERATIONS = 400
INLIER_RADIUS_CELLS = 2.0
GUIDED_RADIUS_CELLS = 1.5
MIN_INLIERS = 3


class InsufficientOverlap:
    """Estimation failed: too few consistent matches between the maps."""

    def __repr__(self):
        return "InsufficientOverlap"


INSUFFICIENT_OVERLAP = InsufficientOverlap()


@dataclass(frozen=True)
class Keypoint:
    col: int
    row: int
    orientation: float
    response: float
    col_f: float = None  # sub-cell refined position, defaults to the cell
    row_f: float = None

    def __post_init__(self):
        if self.col_f is None:
            object.__setattr__(self, "col_f", float(self.col))
        if self.row_f is None:
            object.__setattr__(self, "row_f", float(self.row))


@dataclass(frozen=True)
class KpMatch:
    index_a: int
    index_b: int
    distance: float


@dataclass(frozen=True)
class RigidTransform2D:
    rotation: float           # radians
    translation: tuple[float, float]  # meters

    @staticmethod
    def identity() -> "RigidTransform2D":
        return RigidTransform2D(0.0, (0.0, 0.0))

    def apply_cells(self, col: float, row: float, resolution: float) -> tuple[float, float]:
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        tx, ty = self.translation[0] / resolution, self.translation[1] / resolution
        return (c * col - s * row + tx, s * col + c * row + ty)

    def inverse(self) -> "RigidTransform2D":
        c, s = math.cos(self.rotation), math.sin(self.rotation)
        tx, ty = self.translation
        return RigidTransform2D(-self.rotation, (-(c * tx + s * ty), -(-s * tx + c * ty)))

    def as_dict(self) -> dict:
        return {"rotation": self.rotation,
                "tx": self.translation[0], "ty": self.translation[1]}


def _smooth(arr: np.ndarray) -> np.ndarray:
    """Separable binomial 5-tap blur, zero padding outside the grid."""
    kernel = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    out = np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="same"), 0, arr)
    out = np.apply_along_axis(lambda m: np.convolve(m, kernel, mode="same"), 1, out)
    return out


def _window_max(arr: np.ndarray, radius: int) -> np.ndarray:
    out = arr.copy()
    h, w = arr.shape
    for dr in range(-radius, radius + 1):
        for dc in range(-radius, radius + 1):
            if dr == 0 and dc == 0:
                continue
            shifted = np.full_like(arr, -np.inf)
            r0, r1 = max(0, dr), min(h, h + dr)
            c0, c1 = max(0, dc), min(w, w + dc)
            shifted[r0:r1, c0:c1] = arr[r0 - dr:r1 - dr, c0 - dc:c1 - dc]
            np.maximum(out, shifted, out=out)
    return out


ORIENTATION_RADIUS = 7


def _lattice_orientation(binary: np.ndarray, field: np.ndarray,
                         kp_row: float, kp_col: float) -> float:
    """Local edge-lattice angle plus the heaviest mass quadrant.

    Gradients around a rectangular corner cluster at two perpendicular
    directions; averaging them on the 4*phi circle recovers the edge angle
    mod 90 degrees very stably, even on re-rasterized staircase edges. The
    remaining quadrant is chosen by radially weighted obstacle mass (the
    near field is ambiguous when detection lands slightly off the corner).
    """
    gy, gx = np.gradient(field)
    height, width = field.shape
    row, col = int(round(kp_row)), int(round(kp_col))
    r0, r1 = max(0, row - ORIENTATION_RADIUS), min(height, row + ORIENTATION_RADIUS + 1)
    c0, c1 = max(0, col - ORIENTATION_RADIUS), min(width, col + ORIENTATION_RADIUS + 1)
    gxw = gx[r0:r1, c0:c1].ravel()
    gyw = gy[r0:r1, c0:c1].ravel()
    weight = np.hypot(gxw, gyw)
    phi = np.arctan2(gyw, gxw)
    s4 = float((weight * np.sin(4 * phi)).sum())
    c4 = float((weight * np.cos(4 * phi)).sum())
    if abs(s4) < 1e-12 and abs(c4) < 1e-12:
        return 0.0
    psi = math.atan2(s4, c4) / 4.0
    window = binary[r0:r1, c0:c1]
    rows, cols = np.mgrid[r0:r1, c0:c1]
    dy = rows - kp_row
    dx = cols - kp_col
    radial = np.clip(np.hypot(dx, dy) - 1.5, 0.0, None)
    quadrant = (np.floor((np.arctan2(dy, dx) - psi) / (math.pi / 2)) % 4).astype(int)
    masses = [float((window * radial * (quadrant == k)).sum()) for k in range(4)]
    return normalize_angle(psi + math.pi / 4 + int(np.argmax(masses)) * math.pi / 2)


def _parabolic_offset(response: np.ndarray, row: int, col: int, axis: int) -> float:
    """Sub-cell peak offset along one axis from a 3-point quadratic fit."""
    if axis == 0:
        if row <= 0 or row >= response.shape[0] - 1:
            return 0.0
        prev, cur, nxt = response[row - 1, col], response[row, col], response[row + 1, col]
    else:
        if col <= 0 or col >= response.shape[1] - 1:
            return 0.0
        prev, cur, nxt = response[row, col - 1], response[row, col], response[row, col + 1]
    denom = 2.0 * cur - prev - nxt
    if abs(denom) < 1e-18:
        return 0.0
    return float(np.clip((nxt - prev) / (2.0 * denom), -0.5, 0.5))


def detect_keypoints(grid: GridMap) -> list[Keypoint]:
    """Corner keypoints of the binarized occupancy (obstacle = 1): structure
    tensor response on the smoothed mask, non-maximum suppression in a 5x5
    window, parabolic sub-cell refinement, orientation from the local
    edge-lattice angle and mass quadrant."""
    binary = (grid.cells == CellState.OBSTACLE).astype(np.float64)
    if not binary.any():
        return []
    smoothed = _smooth(binary)
    gy, gx = np.gradient(smoothed)
    ixx = _smooth(gx * gx)
    iyy = _smooth(gy * gy)
    ixy = _smooth(gx * gy)
    response = ixx * iyy - ixy * ixy - HARRIS_K * (ixx + iyy) ** 2
    threshold = max(RESPONSE_FLOOR, RESPONSE_REL * float(response.max()))
    peaks = (response >= _window_max(response, NMS_RADIUS)) & (response > threshold)
    keypoints: list[Keypoint] = []
    taken: list[tuple[int, int]] = []
    height, width = response.shape
    for row, col in zip(*np.nonzero(peaks)):
        row, col = int(row), int(col)
        if any(abs(row - tr) <= NMS_RADIUS and abs(col - tc) <= NMS_RADIUS for tr, tc in taken):
            continue  # plateau tie: keep the first in scan order
        taken.append((row, col))
        row_f = row + _parabolic_offset(response, row, col, axis=0)
        col_f = col + _parabolic_offset(response, row, col, axis=1)
        keypoints.append(Keypoint(
            col=col, row=row,
            orientation=_lattice_orientation(binary, smoothed, row_f, col_f),
            response=float(response[row, col]),
            col_f=col_f, row_f=row_f,
        ))
    return keypoints


def describe(grid: GridMap, keypoint: Keypoint,
             field: np.ndarray | None = None) -> np.ndarray | None:
    """16x16 binary patch sampled on a grid rotated to the keypoint's
    orientation, row-major bit order. Bits come from bilinear samples of the
    smoothed obstacle mask (majority threshold), which survives the staircase
    aliasing of re-rasterized maps. None for keypoints too close to the
    border (callers count skips)."""
    half = DESCRIPTOR_SIDE // 2
    if (keypoint.col < half or keypoint.row < half
            or keypoint.col >= grid.width - half or keypoint.row >= grid.height - half):
        return None
    if field is None:
        field = _smooth((grid.cells == CellState.OBSTACLE).astype(np.float64))
    height, width = field.shape
    c, s = math.cos(keypoint.orientation), math.sin(keypoint.orientation)
    bits = np.zeros(DESCRIPTOR_SIDE * DESCRIPTOR_SIDE, dtype=np.uint8)
    k = 0
    for i in range(DESCRIPTOR_SIDE):
        dy = (i - (DESCRIPTOR_SIDE - 1) / 2.0) * DESCRIPTOR_SPACING
        for j in range(DESCRIPTOR_SIDE):
            dx = (j - (DESCRIPTOR_SIDE - 1) / 2.0) * DESCRIPTOR_SPACING
            sx = keypoint.col_f + c * dx - s * dy
            sy = keypoint.row_f + s * dx + c * dy
            if 0.0 <= sx <= width - 1.0 and 0.0 <= sy <= height - 1.0:
                c0 = min(int(sx), width - 2) if width > 1 else 0
                r0 = min(int(sy), height - 2) if height > 1 else 0
                fu = sx - c0
                fv = sy - r0
                value = (field[r0, c0] * (1 - fu) * (1 - fv)
                         + field[r0, c0 + 1] * fu * (1 - fv)
                         + field[r0 + 1, c0] * (1 - fu) * fv
                         + field[r0 + 1, c0 + 1] * fu * fv)
                if value >= 0.5:
                    bits[k] = 1
            k += 1
    return bits


def describe_all(grid: GridMap, keypoints: list[Keypoint]) -> tuple[list[Keypoint], np.ndarray, int]:
    """Descriptors for the describable keypoints; returns (kept keypoints,
    descriptor matrix, skipped count)."""
    kept: list[Keypoint] = []
    descs: list[np.ndarray] = []
    skipped = 0
    field = _smooth((grid.cells == CellState.OBSTACLE).astype(np.float64))
    for kp in keypoints:
        d = describe(grid, kp, field)
        if d is None:
            skipped += 1
        else:
            kept.append(kp)
            descs.append(d)
    matrix = np.array(descs, dtype=np.uint8) if descs else np.zeros((0, DESCRIPTOR_SIDE ** 2), np.uint8)
    return kept, matrix, skipped


def _rotation_permutations() -> np.ndarray:
    """Bit index maps rotating a row-major SxS patch by k*90 degrees."""
    idx = np.arange(DESCRIPTOR_SIDE * DESCRIPTOR_SIDE).reshape(
        DESCRIPTOR_SIDE, DESCRIPTOR_SIDE)
    perms = []
    cur = idx
    for _ in range(4):
        perms.append(cur.ravel().copy())
        cur = np.rot90(cur, 1)
    return np.array(perms)


_ROT_PERMS = _rotation_permutations()


def match(descriptors_a: np.ndarray, descriptors_b: np.ndarray) -> list[KpMatch]:
    """Brute-force Hamming matching: mutual nearest neighbors passing the
    best/second-best ratio test.

    Distances are taken modulo quarter-turn patch rotations (a fixed bit
    permutation), because corner orientations on rectilinear maps are only
    stable modulo 90 degrees; the consensus stage recovers the actual
    rotation geometrically.
    """
    na, nb = len(descriptors_a), len(descriptors_b)
    if na == 0 or nb == 0:
        return []
    dist = np.stack([
        np.count_nonzero(descriptors_a[:, None, :]
                         != descriptors_b[None, :, perm], axis=2)
        for perm in _ROT_PERMS
    ]).min(axis=0).astype(np.float64)
    row_min = dist.min(axis=1)
    col_min = dist.min(axis=0)
    matches = []
    for ia in range(na):
        d1 = float(row_min[ia])
        above = dist[ia][dist[ia] > d1]
        d2 = float(above.min()) if above.size else np.inf
        if d1 > RATIO_TEST * d2:
            continue
        # repeated structure (identical rocks) produces exact distance ties;
        # emit every tied mutual pair and let the consensus stage pick the
        # geometrically consistent ones
        tied = np.nonzero(dist[ia] == d1)[0]
        for ib in tied[:MAX_TIED_MATCHES]:
            if dist[ia, ib] == col_min[ib]:
                matches.append(KpMatch(ia, int(ib), d1))
    return matches


def _fit_rigid(pa: np.ndarray, pb: np.ndarray) -> tuple[float, float, float]:
    """Least-squares rigid transform (no scale) sending pb onto pa."""
    ca = pa.mean(axis=0)
    cb = pb.mean(axis=0)
    qa = pa - ca
    qb = pb - cb
    num = float(np.sum(qb[:, 0] * qa[:, 1] - qb[:, 1] * qa[:, 0]))
    den = float(np.sum(qb[:, 0] * qa[:, 0] + qb[:, 1] * qa[:, 1]))
    theta = math.atan2(num, den)
    c, s = math.cos(theta), math.sin(theta)
    tx = ca[0] - (c * cb[0] - s * cb[1])
    ty = ca[1] - (s * cb[0] + c * cb[1])
    return theta, tx, ty


def estimate_transform(matches: list[KpMatch], kps_a: list[Keypoint],
                       kps_b: list[Keypoint], resolution: float,
                       iterations: int = CONSENSUS_ITERATIONS,
                       seed: int = 0):
    """Consensus over two-match subsets, then least-squares refinement over
    the inliers. Returns the transform mapping map-b cell coordinates into
    map-a cell coordinates, or INSUFFICIENT_OVERLAP."""
    if len(matches) < 2:
        return INSUFFICIENT_OVERLAP
    pa = np.array([(kps_a[m.index_a].col_f, kps_a[m.index_a].row_f) for m in matches], dtype=np.float64)
    pb = np.array([(kps_b[m.index_b].col_f, kps_b[m.index_b].row_f) for m in matches], dtype=np.float64)
    n = len(matches)
    rng = random.Random(seed)
    best_inliers: np.ndarray | None = None
    best_count = 0
    best_err = np.inf
    for _ in range(iterations):
        i = rng.randrange(n)
        j = rng.randrange(n)
        if i == j:
            continue
        va = pa[j] - pa[i]
        vb = pb[j] - pb[i]
        if np.hypot(*vb) < 1e-9 or np.hypot(*va) < 1e-9:
            continue
        theta = math.atan2(va[1], va[0]) - math.atan2(vb[1], vb[0])
        c, s = math.cos(theta), math.sin(theta)
        tx = pa[i, 0] - (c * pb[i, 0] - s * pb[i, 1])
        ty = pa[i, 1] - (s * pb[i, 0] + c * pb[i, 1])
        proj_x = c * pb[:, 0] - s * pb[:, 1] + tx
        proj_y = s * pb[:, 0] + c * pb[:, 1] + ty
        err = np.hypot(proj_x - pa[:, 0], proj_y - pa[:, 1])
        inliers = err <= INLIER_RADIUS_CELLS
        count = int(inliers.sum())
        mean_err = float(err[inliers].mean()) if count else np.inf
        if count > best_count or (count == best_count and mean_err < best_err):
            best_count = count
            best_err = mean_err
            best_inliers = inliers
    if best_inliers is None or best_count < MIN_INLIERS:
        return INSUFFICIENT_OVERLAP
    theta, tx, ty = _fit_rigid(pa[best_inliers], pb[best_inliers])
    # annealed refits: tighten the inlier radius so marginal pairs drop out
    for radius in (INLIER_RADIUS_CELLS, 1.5, 1.0):
        c, s = math.cos(theta), math.sin(theta)
        proj_x = c * pb[:, 0] - s * pb[:, 1] + tx
        proj_y = s * pb[:, 0] + c * pb[:, 1] + ty
        err = np.hypot(proj_x - pa[:, 0], proj_y - pa[:, 1])
        inliers = err <= radius
        if int(inliers.sum()) < MIN_INLIERS:
            break
        best_inliers = inliers
        theta, tx, ty = _fit_rigid(pa[best_inliers], pb[best_inliers])
    return RigidTransform2D(normalize_angle(theta), (tx * resolution, ty * resolution))


def align_and_fuse(grid_a: GridMap, grid_b: GridMap, seed: int = 0):
    """Full pipeline: keypoints, descriptors, matching, estimation, fusion.
    Returns (transform | INSUFFICIENT_OVERLAP, fused | None, stats dict)."""
    kps_a = detect_keypoints(grid_a)
    kps_b = detect_keypoints(grid_b)
    kept_a, desc_a, skip_a = describe_all(grid_a, kps_a)
    kept_b, desc_b, skip_b = describe_all(grid_b, kps_b)
    matches = match(desc_a, desc_b)
    stats = {"keypoints_a": len(kps_a), "keypoints_b": len(kps_b),
             "border_skipped": skip_a + skip_b, "matches": len(matches)}
    transform = estimate_transform(matches, kept_a, kept_b, grid_a.resolution, seed=seed)
    if isinstance(transform, InsufficientOverlap):
        return INSUFFICIENT_OVERLAP, None, stats
    return transform, fuse(grid_a, grid_b, transform), stats


def _combine(state_a: np.ndarray, sem_a: np.ndarray,
             state_b: np.ndarray, sem_b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell precedence: known beats unknown, obstacle beats free; the
    winning side's semantic label is kept."""
    state = state_a.copy()
    sem = sem_a.copy()
    a_unknown = state_a == CellState.UNKNOWN
    b_known = state_b != CellState.UNKNOWN
    take_b = a_unknown & b_known
    state[take_b] = state_b[take_b]
    sem[take_b] = sem_b[take_b]
    b_obstacle = state_b == CellState.OBSTACLE
    upgrade = (state_a == CellState.FREE) & b_obstacle
    state[upgrade] = CellState.OBSTACLE
    sem[upgrade] = sem_b[upgrade]
    agree = (state_a == state_b) & ~a_unknown
    fill_sem = agree & (sem_a == SemLabel.NONE) & (sem_b != SemLabel.NONE)
    sem[fill_sem] = sem_b[fill_sem]
    return state, sem


def fuse(grid_a: GridMap, grid_b: GridMap, transform: RigidTransform2D) -> GridMap:
    """Resample grid_b through the transform into grid_a's frame and merge.

    The output covers the union of both footprints, so fused knowledge is
    never smaller than either input's.
    """
    if abs(grid_a.resolution - grid_b.resolution) > 1e-9:
        raise ValueError("incompatible resolutions")
    res = grid_a.resolution
    c = math.cos(transform.rotation)
    s = math.sin(transform.rotation)
    tx = transform.translation[0] / res
    ty = transform.translation[1] / res

    corners = []
    for bc in (0.0, grid_b.width - 1.0):
        for br in (0.0, grid_b.height - 1.0):
            corners.append((c * bc - s * br + tx, s * bc + c * br + ty))
    xs = [p[0] for p in corners] + [0.0, grid_a.width - 1.0]
    ys = [p[1] for p in corners] + [0.0, grid_a.height - 1.0]
    off_c = int(math.floor(min(xs)))
    off_r = int(math.floor(min(ys)))
    out_w = int(math.ceil(max(xs))) - off_c + 1
    out_h = int(math.ceil(max(ys))) - off_r + 1

    out_state = np.full((out_h, out_w), CellState.UNKNOWN, dtype=np.uint8)
    out_sem = np.full((out_h, out_w), SemLabel.NONE, dtype=np.int8)
    a_r0, a_c0 = -off_r, -off_c
    out_state[a_r0:a_r0 + grid_a.height, a_c0:a_c0 + grid_a.width] = grid_a.cells
    out_sem[a_r0:a_r0 + grid_a.height, a_c0:a_c0 + grid_a.width] = grid_a.semantic

    # inverse sampling: each output cell reads map b at the back-projected spot
    oc, orr = np.meshgrid(np.arange(out_w), np.arange(out_h))
    ax = oc + off_c
    ay = orr + off_r
    bx = c * (ax - tx) + s * (ay - ty)
    by = -s * (ax - tx) + c * (ay - ty)
    bc = np.rint(bx).astype(np.int64)
    br = np.rint(by).astype(np.int64)
    valid = (bc >= 0) & (bc < grid_b.width) & (br >= 0) & (br < grid_b.height)
    b_state = np.full((out_h, out_w), CellState.UNKNOWN, dtype=np.uint8)
    b_sem = np.full((out_h, out_w), SemLabel.NONE, dtype=np.int8)
    b_state[valid] = grid_b.cells[br[valid], bc[valid]]
    b_sem[valid] = grid_b.semantic[br[valid], bc[valid]]
    out_state, out_sem = _combine(out_state, out_sem, b_state, b_sem)

    # forward splat so every known b cell lands somewhere in the union grid
    known_r, known_c = np.nonzero(grid_b.cells != CellState.UNKNOWN)
    if known_r.size:
        fx = np.rint(c * known_c - s * known_r + tx).astype(np.int64) - off_c
        fy = np.rint(s * known_c + c * known_r + ty).astype(np.int64) - off_r
        ok = (fx >= 0) & (fx < out_w) & (fy >= 0) & (fy < out_h)
        f_state = np.full((out_h, out_w), CellState.UNKNOWN, dtype=np.uint8)
        f_sem = np.full((out_h, out_w), SemLabel.NONE, dtype=np.int8)
        f_state[fy[ok], fx[ok]] = grid_b.cells[known_r[ok], known_c[ok]]
        f_sem[fy[ok], fx[ok]] = grid_b.semantic[known_r[ok], known_c[ok]]
        out_state, out_sem = _combine(out_state, out_sem, f_state, f_sem)

    origin = Pose2D(grid_a.origin.x + off_c * res, grid_a.origin.y + off_r * res,
                    grid_a.origin.theta)
    return GridMap(out_w, out_h, res, origin, out_state, out_sem)
