import math

import numpy as np
import pytest

from cisru_sim import fusion
from cisru_sim.geometry import Pose2D
from cisru_sim.grid import CellState, GridMap, SemLabel
from oracles import brute_force_rect_corners


def grid_with_rect(width=40, height=40, rect=(10, 10, 10, 10), resolution=1.0):
    """rect = (col, row, w, h) filled obstacle block."""
    grid = GridMap(width, height, resolution)
    grid.cells[:] = CellState.FREE
    c, r, w, h = rect
    grid.cells[r:r + h, c:c + w] = CellState.OBSTACLE
    return grid


def _build_pair(rng, width, height, rotation, offset, carve_unknown):
    grid_a = GridMap(width, height, 1.0)
    grid_a.cells[:] = CellState.FREE
    for _ in range(12):
        w, h = int(rng.integers(3, 8)), int(rng.integers(3, 8))
        c = int(rng.integers(2, width - w - 2))
        r = int(rng.integers(2, height - h - 2))
        grid_a.cells[r:r + h, c:c + w] = CellState.OBSTACLE
    theta = rotation if rotation is not None else float(rng.uniform(-math.pi, math.pi))
    off = offset if offset is not None else (float(rng.uniform(-5, 5)),
                                             float(rng.uniform(-5, 5)))
    cos, sin = math.cos(theta), math.sin(theta)
    mx, my = (width - 1) / 2.0, (height - 1) / 2.0
    tx = mx + off[0] - (cos * mx - sin * my)
    ty = my + off[1] - (sin * mx + cos * my)
    grid_b = GridMap(width, height, 1.0)
    bc, br = np.meshgrid(np.arange(width), np.arange(height))
    ax = np.rint(cos * bc - sin * br + tx).astype(int)
    ay = np.rint(sin * bc + cos * br + ty).astype(int)
    inside = (ax >= 0) & (ax < width) & (ay >= 0) & (ay < height)
    grid_b.cells[inside] = grid_a.cells[ay[inside], ax[inside]]
    if carve_unknown:
        grid_a.cells[:, : width // 6] = CellState.UNKNOWN
        grid_b.cells[: height // 6, :] = CellState.UNKNOWN
    return grid_a, grid_b, fusion.RigidTransform2D(theta, (tx, ty))


def _pair_valid(grid_a, grid_b, transform, min_overlap=0.4, min_corners=4):
    """The recovery claim presumes >= 40% overlap and >= 4 shared corners."""
    cos, sin = math.cos(transform.rotation), math.sin(transform.rotation)
    tx, ty = transform.translation
    rows, cols = np.nonzero(grid_b.cells != CellState.UNKNOWN)
    if rows.size == 0:
        return False
    ax = np.rint(cos * cols - sin * rows + tx).astype(int)
    ay = np.rint(sin * cols + cos * rows + ty).astype(int)
    inside = (ax >= 0) & (ax < grid_a.width) & (ay >= 0) & (ay < grid_a.height)
    known_hits = np.zeros(rows.size, dtype=bool)
    known_hits[inside] = grid_a.cells[ay[inside], ax[inside]] != CellState.UNKNOWN
    if known_hits.mean() < min_overlap:
        return False
    kps_a = fusion.detect_keypoints(grid_a)
    kps_b = fusion.detect_keypoints(grid_b)
    shared = 0
    for kb in kps_b:
        x = cos * kb.col_f - sin * kb.row_f + tx
        y = sin * kb.col_f + cos * kb.row_f + ty
        if any(math.hypot(ka.col_f - x, ka.row_f - y) <= 2.0 for ka in kps_a):
            shared += 1
    return shared >= min_corners


def synthetic_pair(seed, width=48, height=48, rotation=None, offset=None,
                   carve_unknown=True):
    """Build (grid_a, grid_b, true transform b->a in cell coordinates).

    The transform rotates about the grid center plus a small offset, so the
    shared structure stays inside both frames: p_a = R (p_b - m) + m + d.
    grid_b samples grid_a's world through it; both sides keep their own
    unknown stripes. Draws are rejected until the pair satisfies the
    recovery preconditions (>= 40% overlap, >= 4 shared corners).
    """
    for attempt in range(20):
        rng = np.random.default_rng(seed * 1009 + attempt)
        grid_a, grid_b, transform = _build_pair(rng, width, height, rotation,
                                                offset, carve_unknown)
        if _pair_valid(grid_a, grid_b, transform):
            return grid_a, grid_b, transform
    raise RuntimeError(f"no valid pair for seed {seed}")


def transform_action_error(estimate, true, grid_b):
    """Mean displacement (cells) of grid_b's known cells between the two
    transforms; the geometric meaning of translation recovery error."""
    rows, cols = np.nonzero(grid_b.cells != CellState.UNKNOWN)
    pick = slice(0, rows.size, max(1, rows.size // 400))
    cols = cols[pick].astype(float)
    rows = rows[pick].astype(float)

    def apply(tr):
        c, s = math.cos(tr.rotation), math.sin(tr.rotation)
        return (c * cols - s * rows + tr.translation[0],
                s * cols + c * rows + tr.translation[1])

    ex, ey = apply(estimate)
    tx, ty = apply(true)
    return float(np.hypot(ex - tx, ey - ty).mean())


class TestKeypoints:
    def test_uniform_grid_no_keypoints(self):
        grid = GridMap(30, 30, 1.0)
        grid.cells[:] = CellState.FREE
        assert fusion.detect_keypoints(grid) == []

    def test_rectangle_corners_found(self):
        grid = grid_with_rect(rect=(12, 15, 10, 10))
        oracle = brute_force_rect_corners(grid)
        assert len(oracle) == 4
        keypoints = fusion.detect_keypoints(grid)
        assert len(keypoints) == 4
        for kp in keypoints:
            assert any(abs(kp.col - oc) <= 1 and abs(kp.row - orr) <= 1
                       for oc, orr in oracle)

    def test_rotated_grid_rotates_keypoints(self):
        grid = grid_with_rect(rect=(12, 15, 10, 8))
        kps = fusion.detect_keypoints(grid)
        rotated = GridMap(grid.height, grid.width, 1.0)
        rotated.cells = np.rot90(grid.cells, 1).copy()
        rotated.semantic = np.rot90(grid.semantic, 1).copy()
        kps_rot = fusion.detect_keypoints(rotated)
        assert len(kps_rot) == len(kps)
        # np.rot90 sends input (row, col) to output (W-1-col, row)
        width = grid.cells.shape[1]
        expected = {(width - 1 - kp.col, kp.row) for kp in kps}
        found = {(kp.row, kp.col) for kp in kps_rot}
        for er, ec in expected:
            assert any(abs(er - fr) <= 1 and abs(ec - fc) <= 1 for fr, fc in found)

    def test_responses_above_threshold(self):
        grid = grid_with_rect()
        for kp in fusion.detect_keypoints(grid):
            assert kp.response > 0


class TestDescriptors:
    def test_deterministic(self):
        grid = grid_with_rect()
        kp = fusion.detect_keypoints(grid)[0]
        a = fusion.describe(grid, kp)
        b = fusion.describe(grid, kp)
        assert np.array_equal(a, b)
        assert a.shape == (256,)

    def test_border_keypoint_skipped(self):
        grid = grid_with_rect(rect=(0, 0, 6, 6))
        kp = fusion.Keypoint(2, 2, 0.0, 1.0)
        assert fusion.describe(grid, kp) is None

    def test_all_free_patch_zero_bits(self):
        grid = GridMap(40, 40, 1.0)
        grid.cells[:] = CellState.FREE
        kp = fusion.Keypoint(20, 20, 0.7, 1.0)
        assert fusion.describe(grid, kp).sum() == 0

    def test_rotation_normalized_patch_similar(self):
        grid = grid_with_rect(rect=(16, 16, 9, 9))
        kps = fusion.detect_keypoints(grid)
        rotated = GridMap(grid.height, grid.width, 1.0)
        rotated.cells = np.rot90(grid.cells, 1).copy()
        rotated.semantic = np.rot90(grid.semantic, 1).copy()
        kps_rot = fusion.detect_keypoints(rotated)
        _, descs_a, _ = fusion.describe_all(grid, kps)
        _, descs_b, _ = fusion.describe_all(rotated, kps_rot)
        matches = fusion.match(descs_a, descs_b)
        assert matches, "rotation-normalized descriptors should still match"
        for m in matches:
            assert m.distance <= 0.10 * 256


def distinct_blocks_grid(width=60, height=60):
    """Three different-size blocks placed asymmetrically, so corner patches
    carry distinct context."""
    grid = GridMap(width, height, 1.0)
    grid.cells[:] = CellState.FREE
    grid.cells[12:19, 10:22] = CellState.OBSTACLE
    grid.cells[34:44, 15:20] = CellState.OBSTACLE
    grid.cells[22:26, 38:52] = CellState.OBSTACLE
    return grid


class TestMatch:
    def test_identical_sets_identity_matching(self):
        grid = distinct_blocks_grid()
        kps = fusion.detect_keypoints(grid)
        _, descs, _ = fusion.describe_all(grid, kps)
        matches = fusion.match(descs, descs)
        pairs = {(m.index_a, m.index_b) for m in matches}
        # the identity pairing is fully present at distance zero; twin
        # corners (quarter-turn identical patches) may tie alongside it
        assert all(m.distance == 0.0 for m in matches)
        for i in range(len(descs)):
            assert (i, i) in pairs
        for ia, ib in pairs:
            rotated = min(np.count_nonzero(descs[ia] != descs[ib][perm])
                          for perm in fusion._ROT_PERMS)
            assert rotated == 0

    def test_empty_side_no_matches(self):
        empty = np.zeros((0, 256), np.uint8)
        some = np.zeros((3, 256), np.uint8)
        assert fusion.match(empty, some) == []
        assert fusion.match(some, empty) == []

    def test_planted_pair_passes_ratio(self):
        rng = np.random.default_rng(0)
        base = rng.integers(0, 2, 256).astype(np.uint8)
        near = base.copy()
        near[:5] ^= 1  # distance 5
        far = []
        for _ in range(4):
            candidate = base.copy()
            flip = rng.choice(256, 50, replace=False)
            candidate[flip] ^= 1
            far.append(candidate)
        descs_a = np.array([base])
        descs_b = np.array([near] + far)
        matches = fusion.match(descs_a, descs_b)
        assert len(matches) == 1
        assert matches[0].index_b == 0
        assert matches[0].distance == 5.0


class TestEstimateTransform:
    def test_self_match_identity(self):
        grid = distinct_blocks_grid()
        kps = fusion.detect_keypoints(grid)
        kept, descs, _ = fusion.describe_all(grid, kps)
        matches = fusion.match(descs, descs)
        transform = fusion.estimate_transform(matches, kept, kept, grid.resolution)
        assert not isinstance(transform, fusion.InsufficientOverlap)
        assert abs(math.degrees(transform.rotation)) <= 0.5
        assert math.hypot(*transform.translation) <= 0.25

    def test_synthetic_quarter_turn(self):
        grid_a, grid_b, true = synthetic_pair(3, rotation=math.pi / 2,
                                              offset=(5.0, 3.0))
        transform, fused, stats = fusion.align_and_fuse(grid_a, grid_b, seed=5)
        assert not isinstance(transform, fusion.InsufficientOverlap), stats
        err_deg = abs(math.degrees(
            fusion.normalize_angle(transform.rotation - true.rotation)))
        assert err_deg <= 2.0
        assert transform_action_error(transform, true, grid_b) <= 1.0

    def test_unrelated_maps_insufficient(self):
        grid_a = grid_with_rect(width=48, height=48, rect=(10, 10, 10, 10))
        featureless = GridMap(48, 48, 1.0)
        featureless.cells[:] = CellState.FREE
        transform, fused, stats = fusion.align_and_fuse(grid_a, featureless)
        assert isinstance(transform, fusion.InsufficientOverlap)
        assert fused is None

    def test_too_few_matches_insufficient(self):
        grid = grid_with_rect()
        kps = fusion.detect_keypoints(grid)
        kept, descs, _ = fusion.describe_all(grid, kps)
        assert isinstance(
            fusion.estimate_transform([], kept, kept, 1.0),
            fusion.InsufficientOverlap)


class TestFuse:
    def test_idempotent_self_fusion(self):
        grid = grid_with_rect(width=30, height=25, rect=(5, 6, 8, 7))
        grid.cells[0:2, 0:2] = CellState.UNKNOWN
        grid.semantic[10, 10] = SemLabel.ROCK
        fused = fusion.fuse(grid, grid, fusion.RigidTransform2D.identity())
        assert fused.width == grid.width and fused.height == grid.height
        assert np.array_equal(fused.cells, grid.cells)
        assert np.array_equal(fused.semantic, grid.semantic)
        assert fused.origin == grid.origin

    def test_known_beats_unknown(self):
        a = GridMap(10, 10, 1.0)  # all unknown
        b = GridMap(10, 10, 1.0)
        b.cells[:] = CellState.FREE
        fused = fusion.fuse(a, b, fusion.RigidTransform2D.identity())
        assert (fused.cells[:10, :10] == CellState.FREE).all()

    def test_obstacle_beats_free(self):
        a = GridMap(10, 10, 1.0)
        a.cells[:] = CellState.OBSTACLE
        b = GridMap(10, 10, 1.0)
        b.cells[:] = CellState.FREE
        fused = fusion.fuse(a, b, fusion.RigidTransform2D.identity())
        assert (fused.cells == CellState.OBSTACLE).all()
        fused2 = fusion.fuse(b, a, fusion.RigidTransform2D.identity())
        assert (fused2.cells == CellState.OBSTACLE).all()

    def test_information_monotonic(self):
        grid_a, grid_b, true = synthetic_pair(11)
        fused = fusion.fuse(grid_a, grid_b, true)
        assert fused.known_count() >= grid_a.known_count()
        assert fused.known_count() >= grid_b.known_count()

    def test_incompatible_resolution_rejected(self):
        a = GridMap(5, 5, 1.0)
        b = GridMap(5, 5, 0.5)
        with pytest.raises(ValueError):
            fusion.fuse(a, b, fusion.RigidTransform2D.identity())


class TestRecoveryBatch:
    def test_seeded_pairs_recovery_rate(self):
        successes = 0
        total = 20
        for seed in range(total):
            grid_a, grid_b, true = synthetic_pair(seed)
            transform, fused, stats = fusion.align_and_fuse(grid_a, grid_b, seed=seed)
            if isinstance(transform, fusion.InsufficientOverlap):
                continue
            err_deg = abs(math.degrees(
                fusion.normalize_angle(transform.rotation - true.rotation)))
            err_cells = transform_action_error(transform, true, grid_b)
            if err_deg <= 2.0 and err_cells <= 1.0:
                successes += 1
        assert successes >= 0.9 * total, f"only {successes}/{total} recovered"
