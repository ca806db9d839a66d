import numpy as np
import pytest

from flashbitops.ssd_model import read_latency, OpKind
from flashbitops.workloads import (
    BITMAP,
    ENCRYPTION,
    SEGMENTATION,
    WorkloadSpec,
    average_speedups,
    default_scales,
    read_pnm,
    run_bitmap_index,
    run_encryption,
    run_segmentation,
    run_workload,
)

# Reported average speedups (vs OSC, ISC derived; vs the calibrated
# baselines PARABIT, FLASHCOSMOS) per workload.
TARGETS = {
    SEGMENTATION: {"OSC": 16.5, "ISC": 12.69, "PARABIT": 1.76, "FLASHCOSMOS": 0.5},
    ENCRYPTION: {"OSC": 20.92, "ISC": 16.02, "PARABIT": 2.22, "FLASHCOSMOS": 0.63},
    BITMAP: {"OSC": 31.67, "ISC": 24.26, "PARABIT": 3.37, "FLASHCOSMOS": 0.96},
}


def sweep(kind, cfg, functional=False):
    rng = np.random.default_rng(5)
    return [run_workload(WorkloadSpec(kind, s), cfg, rng=rng, functional=functional)
            for s in default_scales(kind, cfg)]


class TestSpeedups:
    @pytest.mark.parametrize("kind", [SEGMENTATION, ENCRYPTION, BITMAP])
    def test_average_speedups_in_band(self, cfg, kind):
        avg = average_speedups(sweep(kind, cfg))
        for paradigm, target in TARGETS[kind].items():
            tol = 0.10 if paradigm in ("OSC", "ISC") else 0.20
            assert abs(avg[paradigm] - target) / target < tol, (kind, paradigm, avg[paradigm])

    @pytest.mark.parametrize("kind", [SEGMENTATION, ENCRYPTION, BITMAP])
    def test_derived_speedups_in_band_at_every_scale(self, cfg, kind):
        for res in sweep(kind, cfg):
            for paradigm in ("OSC", "ISC"):
                target = TARGETS[kind][paradigm]
                assert abs(res.speedups[paradigm] - target) / target < 0.10

    def test_flashcosmos_wins_multi_operand_workloads(self, cfg):
        for kind in (SEGMENTATION, ENCRYPTION, BITMAP):
            for res in sweep(kind, cfg):
                assert res.speedups["FLASHCOSMOS"] < 1.0

    def test_speedup_identity(self, cfg):
        res = sweep(ENCRYPTION, cfg)[0]
        for p, s in res.speedups.items():
            assert s == pytest.approx(res.total_us[p] / res.total_us["IFC"], rel=1e-12)


class TestScaling:
    @pytest.mark.parametrize("kind", [SEGMENTATION, ENCRYPTION])
    def test_point_speedups_scale_invariant(self, cfg, kind):
        results = sweep(kind, cfg)
        for paradigm in ("OSC", "ISC"):
            values = [r.speedups[paradigm] for r in results]
            assert max(values) / min(values) - 1 < 0.01

    def test_bitmap_marginal_speedup_scale_invariant(self, cfg):
        # ratios of the linear parts: marginal cost between consecutive
        # scale points is the shared structure
        results = sweep(BITMAP, cfg)
        for paradigm in ("OSC", "ISC"):
            marginals = [
                (b.total_us[paradigm] - a.total_us[paradigm]) / (b.total_us["IFC"] - a.total_us["IFC"])
                for a, b in zip(results[:-1], results[1:])
            ]
            assert max(marginals) / min(marginals) - 1 < 0.01

    def test_total_time_linear_in_scale(self, cfg):
        results = sweep(SEGMENTATION, cfg)
        scales = [r.scale for r in results]
        per_unit = [r.total_us["IFC"] / r.scale for r in results]
        assert max(per_unit) / min(per_unit) - 1 < 1e-9
        assert results[-1].total_us["IFC"] > results[0].total_us["IFC"]
        assert scales == sorted(scales)

    def test_scale_ranges_enforced(self, cfg):
        with pytest.raises(ValueError):
            run_segmentation(WorkloadSpec(SEGMENTATION, 100), cfg, functional=False)
        with pytest.raises(ValueError):
            run_encryption(WorkloadSpec(ENCRYPTION, 10**7), cfg, functional=False)
        with pytest.raises(ValueError):
            run_bitmap_index(WorkloadSpec(BITMAP, 13), cfg, functional=False)
        with pytest.raises(ValueError):
            WorkloadSpec("SORTING", 1)

    def test_kind_mismatch_rejected(self, cfg):
        with pytest.raises(ValueError):
            run_segmentation(WorkloadSpec(BITMAP, 1), cfg, functional=False)


class TestStructure:
    def test_xor_workload_slower_per_page_than_and(self, cfg):
        # 4 sensing phases vs 1: the phase-model arithmetic carries over
        enc = run_encryption(WorkloadSpec(ENCRYPTION, 50000), cfg, functional=False)
        seg = run_segmentation(WorkloadSpec(SEGMENTATION, 50000), cfg, functional=False)
        assert read_latency(OpKind.XOR) > read_latency(OpKind.AND)
        enc_per_batch = enc.total_us["IFC"] * 1  # one op per batch
        assert enc_per_batch > 0
        assert read_latency(OpKind.XOR) / read_latency(OpKind.AND) == pytest.approx(130 / 40)

    def test_bitmap_one_day_degenerates_to_single_read(self, cfg):
        one_month = run_bitmap_index(WorkloadSpec(BITMAP, 1), cfg, functional=False)
        assert one_month.total_us["IFC"] > 0
        # chain depth = days - 1: with 30 days, 29 AND ops per slice
        two = run_bitmap_index(WorkloadSpec(BITMAP, 2), cfg, functional=False)
        pop = 0  # popcount cancels in the difference
        per_day = (two.total_us["IFC"] - one_month.total_us["IFC"]) / 30
        batches = int(cfg["workloads"]["bitmap"]["users"]) / (512 * 131072)
        assert per_day == pytest.approx(batches * read_latency(OpKind.AND), rel=1e-9)


class TestFunctionalChecks:
    def test_segmentation_zero_mismatches(self, cfg):
        res = run_segmentation(WorkloadSpec(SEGMENTATION, 10000), cfg,
                               rng=np.random.default_rng(1), check_wordlines=4)
        assert res.functional_checked and res.mismatches == 0

    def test_encryption_roundtrip_zero_mismatches(self, cfg):
        res = run_encryption(WorkloadSpec(ENCRYPTION, 5000), cfg,
                             rng=np.random.default_rng(2), check_wordlines=4)
        assert res.functional_checked and res.mismatches == 0

    def test_bitmap_chain_zero_mismatches(self, cfg):
        res = run_bitmap_index(WorkloadSpec(BITMAP, 1), cfg,
                               rng=np.random.default_rng(3), check_wordlines=2)
        assert res.functional_checked and res.mismatches == 0


class TestPnm:
    def test_roundtrip_p5_and_p6(self, tmp_path):
        gray = np.arange(48, dtype=np.uint8).reshape(6, 8)
        p5 = tmp_path / "g.pgm"
        p5.write_bytes(b"P5\n# comment\n8 6\n255\n" + gray.tobytes())
        assert np.array_equal(read_pnm(str(p5)), gray)
        rgb = np.arange(48 * 3, dtype=np.uint8).reshape(6, 8, 3)
        p6 = tmp_path / "c.ppm"
        p6.write_bytes(b"P6\n8 6\n255\n" + rgb.tobytes())
        assert np.array_equal(read_pnm(str(p6)), rgb)

    def test_ascii_variant(self, tmp_path):
        p2 = tmp_path / "a.pgm"
        p2.write_text("P2\n2 2\n255\n0 64\n128 255\n")
        assert read_pnm(str(p2)).tolist() == [[0, 64], [128, 255]]
