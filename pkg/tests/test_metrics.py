import itertools
import math
import sys
import unittest
from pathlib import Path

import numpy as np

# Add parent directory to path to import brainmatch modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from brainmatch.metrics import (
    DimMismatch,
    MetricKind,
    Offset,
    Template,
    ZeroVariance,
    dice,
    ncc,
    partitioned_dice,
    partitioned_ncc,
    partitioned_ssd,
    score,
    ssd,
    ssd_at_offset,
    zscore,
)
from brainmatch.nifti_io import Volume
from brainmatch.pardata import ExecutionConfig


def vol(values, dims=None, label="") -> Volume:
    values = np.asarray(values, dtype=np.float64)
    nx, ny, nz = dims or (values.size, 1, 1)
    return Volume(nx, ny, nz, values, label=label)


def random_pair(rng: np.random.Generator, max_extent: int = 6):
    dims = tuple(int(d) for d in rng.integers(1, max_extent + 1, size=3))
    n = int(np.prod(dims))
    f = Volume(*dims, rng.standard_normal(n) * rng.uniform(0.1, 10.0))
    t = Volume(*dims, rng.standard_normal(n) * rng.uniform(0.1, 10.0))
    return f, t


def brute_ssd_at_offset(f: Volume, t: Volume, off: Offset) -> float:
    fa, ta = f.array(), t.array()
    total = 0.0
    for x, y, z in itertools.product(range(f.nx), range(f.ny), range(f.nz)):
        tx, ty, tz = x - off.u, y - off.v, z - off.w
        if 0 <= tx < t.nx and 0 <= ty < t.ny and 0 <= tz < t.nz:
            total += (fa[x, y, z] - ta[tx, ty, tz]) ** 2
    return total


def loop_metrics(f: Volume, t: Template, f_threshold: float):
    """SSD, NCC and Dice from explicit x/y/z loops over the voxel grid."""
    fa, ta = f.array(), t.volume.array()
    voxels = list(itertools.product(range(f.nx), range(f.ny), range(f.nz)))
    n = len(voxels)
    mean_f = sum(fa[v] for v in voxels) / n
    mean_t = sum(ta[v] for v in voxels) / n
    ssd_total = sxy = sxx = syy = 0.0
    both = in_a = in_b = 0
    for x, y, z in voxels:
        a, b = float(fa[x, y, z]), float(ta[x, y, z])
        ssd_total += (a - b) ** 2
        sxy += (a - mean_f) * (b - mean_t)
        sxx += (a - mean_f) ** 2
        syy += (b - mean_t) ** 2
        in_a += a > f_threshold
        in_b += b > t.mask_threshold
        both += a > f_threshold and b > t.mask_threshold
    ncc_value = sxy / math.sqrt(sxx * syy)
    dice_value = 1.0 if in_a + in_b == 0 else 2.0 * both / (in_a + in_b)
    return ssd_total, ncc_value, dice_value


class TestSsd(unittest.TestCase):

    def test_against_zeros(self):
        self.assertEqual(ssd(vol([1, 2, 3]), Template(vol([0, 0, 0]))), 14.0)

    def test_dim_mismatch(self):
        with self.assertRaises(DimMismatch):
            ssd(vol([1, 2, 3]), Template(vol([1, 2])))

    def test_identities(self):
        rng = np.random.default_rng(11)
        for case in range(1000):
            f, t = random_pair(rng)
            with self.subTest(case=case, dims=f.shape):
                self.assertEqual(ssd(f, Template(f)), 0.0)
                self.assertGreaterEqual(ssd(f, Template(t)), 0.0)
                self.assertEqual(ssd(f, Template(t)), ssd(t, Template(f)))

    def test_zero_offset_is_exactly_ssd(self):
        rng = np.random.default_rng(12)
        for case in range(1000):
            f, t = random_pair(rng)
            with self.subTest(case=case):
                self.assertEqual(ssd_at_offset(f, Template(t), Offset(0, 0, 0)), ssd(f, Template(t)))

    def test_shifted_line(self):
        t = Template(vol([1, 2, 3]))
        self.assertEqual(ssd_at_offset(vol([9, 1, 2]), t, Offset(1, 0, 0)), 0.0)
        self.assertEqual(ssd_at_offset(vol([2, 3, 9]), t, Offset(-1, 0, 0)), 0.0)

    def test_offset_beyond_extent_is_empty_overlap(self):
        f, t = vol([1, 2, 3]), Template(vol([4, 5, 6]))
        self.assertEqual(ssd_at_offset(f, t, Offset(3, 0, 0)), 0.0)
        self.assertEqual(ssd_at_offset(f, t, Offset(-7, 0, 0)), 0.0)
        self.assertEqual(ssd_at_offset(f, t, Offset(0, 1, 0)), 0.0)

    def test_offsets_match_voxel_loop(self):
        rng = np.random.default_rng(13)
        for case in range(200):
            f, t = random_pair(rng, max_extent=5)
            off = Offset(*(int(rng.integers(-n, n + 1)) for n in f.shape))
            with self.subTest(case=case, off=off):
                self.assertAlmostEqual(
                    ssd_at_offset(f, Template(t), off),
                    brute_ssd_at_offset(f, t, off),
                    delta=1e-9 * max(1.0, brute_ssd_at_offset(f, t, off)),
                )


class TestNcc(unittest.TestCase):

    def test_self_and_negation(self):
        rng = np.random.default_rng(21)
        for case in range(1000):
            f, _ = random_pair(rng)
            if np.ptp(f.data) == 0:
                continue
            with self.subTest(case=case):
                self.assertAlmostEqual(ncc(f, Template(f)), 1.0, delta=1e-12)
                self.assertAlmostEqual(ncc(f, Template(f.with_data(-f.data))), -1.0, delta=1e-12)

    def test_bounded(self):
        rng = np.random.default_rng(22)
        for case in range(1000):
            f, t = random_pair(rng)
            if np.ptp(f.data) == 0 or np.ptp(t.data) == 0:
                continue
            value = ncc(f, Template(t))
            with self.subTest(case=case):
                self.assertLessEqual(abs(value), 1.0 + 1e-12)

    def test_affine_invariance(self):
        rng = np.random.default_rng(23)
        for case in range(200):
            f, t = random_pair(rng)
            if np.ptp(f.data) == 0 or np.ptp(t.data) == 0:
                continue
            a, b = rng.uniform(0.1, 100.0), rng.uniform(-50.0, 50.0)
            g = f.with_data(a * f.data + b)
            with self.subTest(case=case):
                self.assertAlmostEqual(ncc(g, Template(t)), ncc(f, Template(t)), delta=1e-9)

    def test_constant_volume(self):
        with self.assertRaises(ZeroVariance):
            ncc(vol([2, 2, 2]), Template(vol([1, 2, 3])))
        with self.assertRaises(ZeroVariance):
            ncc(vol([1, 2, 3]), Template(vol([5, 5, 5])))

    def test_dim_mismatch(self):
        with self.assertRaises(DimMismatch):
            ncc(vol([1, 2, 3, 4], (2, 2, 1)), Template(vol([1, 2, 3, 4])))


class TestDice(unittest.TestCase):

    def test_examples(self):
        t = Template(vol([1, 1, 0, 0]), mask_threshold=0.5)
        self.assertEqual(dice(vol([1, 1, 0, 0]), t), 1.0)
        self.assertEqual(dice(vol([0, 0, 1, 1]), t), 0.0)
        self.assertEqual(dice(vol([1, 0, 0, 0]), t), 2.0 / 3.0)

    def test_both_masks_empty(self):
        self.assertEqual(dice(vol([0, 0, 0]), Template(vol([0, 0, 0]))), 1.0)

    def test_threshold_is_strict(self):
        t = Template(vol([0.5, 0.6]), mask_threshold=0.5)
        self.assertEqual(dice(vol([0.0, 1.0]), t), 1.0)
        self.assertEqual(dice(vol([0.2, 1.0]), t, f_threshold=0.2), 1.0)

    def test_monotone_in_intersection(self):
        t = Template(vol([1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0]))
        values = []
        for overlap in range(5):
            mask = np.zeros(12)
            mask[4 - overlap:8 - overlap] = 1.0
            values.append(dice(vol(mask), t))
        self.assertEqual(values, sorted(values))
        self.assertEqual((values[0], values[-1]), (0.0, 1.0))

    def test_bounds_and_symmetry(self):
        rng = np.random.default_rng(31)
        for case in range(1000):
            f, t = random_pair(rng)
            value = dice(f, Template(t, mask_threshold=0.0))
            with self.subTest(case=case):
                self.assertGreaterEqual(value, 0.0)
                self.assertLessEqual(value, 1.0)
                self.assertEqual(value, dice(t, Template(f, mask_threshold=0.0)))
                self.assertEqual(dice(f, Template(f, mask_threshold=0.0)), 1.0)

    def test_non_finite_threshold_rejected(self):
        with self.assertRaises(ValueError):
            Template(vol([1, 2]), mask_threshold=math.nan)


class TestZscore(unittest.TestCase):

    def test_two_voxels(self):
        np.testing.assert_array_equal(zscore(vol([0, 2])).data, [-1.0, 1.0])

    def test_moments_and_idempotence(self):
        rng = np.random.default_rng(41)
        for case in range(200):
            f, _ = random_pair(rng)
            if np.ptp(f.data) == 0:
                continue
            z = zscore(f)
            with self.subTest(case=case):
                self.assertAlmostEqual(float(z.data.mean()), 0.0, delta=1e-12)
                self.assertAlmostEqual(float(z.data.std()), 1.0, delta=1e-12)
                np.testing.assert_allclose(zscore(z).data, z.data, atol=1e-12)
                self.assertEqual(z.shape, f.shape)

    def test_constant_volume(self):
        with self.assertRaises(ZeroVariance):
            zscore(vol([3, 3, 3, 3]))


class TestScoreDispatch(unittest.TestCase):

    def test_dispatch_matches_direct_calls(self):
        f = vol([0.1, 0.9, 0.4, 0.7])
        t = Template(vol([0.0, 1.0, 0.2, 0.8]))
        self.assertEqual(score(MetricKind.SSD, f, t), ssd(f, t))
        self.assertEqual(score(MetricKind.NCC, f, t), ncc(f, t))
        self.assertEqual(score(MetricKind.DICE, f, t, 0.5), dice(f, t, 0.5))

    def test_direction(self):
        self.assertTrue(MetricKind.SSD.better(1.0, 2.0))
        self.assertTrue(MetricKind.NCC.better(0.9, 0.1))
        self.assertTrue(MetricKind.DICE.better(0.8, 0.2))
        self.assertEqual(MetricKind("ssd").direction, "lower-is-better")


class TestPartitionedMetrics(unittest.TestCase):
    """Voxel-level engine compositions agree with the vectorized metrics."""

    def test_agreement_with_serial(self):
        rng = np.random.default_rng(51)
        for workers in (1, 2, 4):
            for k in (1, 3, 8):
                config = ExecutionConfig(workers=workers)
                f = Volume(6, 5, 4, rng.standard_normal(120))
                t = Template(Volume(6, 5, 4, rng.standard_normal(120)), mask_threshold=0.1)
                with self.subTest(workers=workers, k=k):
                    self.assertAlmostEqual(
                        partitioned_ssd(f, t, config, k), ssd(f, t), delta=1e-9 * ssd(f, t)
                    )
                    self.assertAlmostEqual(partitioned_ncc(f, t, config, k), ncc(f, t), delta=1e-9)
                    self.assertEqual(partitioned_dice(f, t, 0.0, config, k), dice(f, t, 0.0))

    def test_agreement_with_voxel_loops_on_16_cubed(self):
        rng = np.random.default_rng(52)
        for case in range(6):
            f = Volume(16, 16, 16, rng.standard_normal(4096) * rng.uniform(0.5, 5.0) + rng.uniform(-2, 2))
            t = Template(Volume(16, 16, 16, rng.standard_normal(4096)), mask_threshold=float(rng.uniform(-0.5, 0.5)))
            f_threshold = float(rng.uniform(-0.5, 0.5))
            config = ExecutionConfig(workers=int(rng.choice([1, 2, 4, 8])))
            k = int(rng.choice([1, 2, 4, 8]))
            expected_ssd, expected_ncc, expected_dice = loop_metrics(f, t, f_threshold)
            with self.subTest(case=case, workers=config.workers, k=k):
                self.assertAlmostEqual(
                    partitioned_ssd(f, t, config, k), expected_ssd, delta=1e-9 * expected_ssd
                )
                self.assertAlmostEqual(
                    partitioned_ncc(f, t, config, k), expected_ncc, delta=1e-9 * max(1e-3, abs(expected_ncc))
                )
                self.assertAlmostEqual(
                    partitioned_dice(f, t, f_threshold, config, k), expected_dice,
                    delta=1e-9 * max(1e-3, expected_dice),
                )

    def test_dim_mismatch(self):
        with self.assertRaises(DimMismatch):
            partitioned_ssd(vol([1, 2, 3]), Template(vol([1, 2])))

    def test_ncc_checks_dims_before_variance(self):
        with self.assertRaises(DimMismatch):
            partitioned_ncc(vol([2, 2, 2]), Template(vol([1, 2])))
        with self.assertRaises(DimMismatch):
            ncc(vol([2, 2, 2]), Template(vol([1, 2])))


if __name__ == "__main__":
    unittest.main()
