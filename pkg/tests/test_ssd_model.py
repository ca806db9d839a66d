import pytest

from flashbitops.engine import OpCode, OpKind
from flashbitops.ssd_model import (
    BaselineParams,
    EnergyModel,
    Paradigm,
    SsdConfig,
    baseline_timeline,
    energy_per_kb,
    read_energy_uj,
    read_latency,
    timeline,
    transfer_times,
)


@pytest.fixture(scope="module")
def ssd(cfg):
    return SsdConfig.from_config(cfg)


@pytest.fixture(scope="module")
def em(cfg):
    return EnergyModel.from_config(cfg)


@pytest.fixture(scope="module")
def baselines(cfg):
    return BaselineParams.from_config(cfg)


class TestTransfers:
    def test_reference_values(self, ssd):
        t_dma, t_ext = transfer_times(ssd)
        # independent arithmetic: 4 pages over 1.2 GiB/s; 16 channels x 4
        # pages over 8 GiB/s (binary units)
        assert t_dma == pytest.approx(4 * 16384 / (1.2 * 2**30) * 1e6, rel=1e-12)
        assert t_ext == pytest.approx(16 * 4 * 16384 / (8 * 2**30) * 1e6, rel=1e-12)
        assert t_dma == pytest.approx(50.8626, abs=1e-3)
        assert t_ext == pytest.approx(122.0703, abs=1e-3)

    def test_doubling_channel_bw_halves_dma(self, ssd):
        t_dma, _ = transfer_times(ssd)
        fast = SsdConfig(channel_bw_Bps=ssd.channel_bw_Bps * 2)
        assert transfer_times(fast)[0] == pytest.approx(t_dma / 2, rel=1e-12)

    def test_total_planes(self, ssd):
        assert ssd.total_planes == 512


class TestTimelines:
    def test_reference_totals_within_tolerance(self, ssd):
        expect = {
            Paradigm.OSC: 2063.0,
            Paradigm.ISC: 1495.0,
            Paradigm.IFC_ALIGNED: 1087.0,
            Paradigm.IFC_NONALIGNED: 1807.0,
        }
        for paradigm, want in expect.items():
            assert abs(timeline(paradigm, ssd).total_us - want) < 2.0

    def test_breakdown_sums_to_total(self, ssd):
        for p in (Paradigm.OSC, Paradigm.ISC, Paradigm.IFC_ALIGNED, Paradigm.IFC_NONALIGNED):
            tl = timeline(p, ssd, OpCode(OpKind.AND))
            assert tl.total_us == pytest.approx(sum(d for _, d in tl.breakdown), rel=1e-12)

    def test_paradigm_ordering(self, ssd):
        for op in (None, OpCode(OpKind.AND), OpCode(OpKind.XNOR)):
            t_al = timeline(Paradigm.IFC_ALIGNED, ssd, op).total_us
            t_isc = timeline(Paradigm.ISC, ssd, op).total_us
            t_osc = timeline(Paradigm.OSC, ssd, op).total_us
            assert t_al < t_isc < t_osc

    def test_nonaligned_increment_exact(self, ssd):
        delta = timeline(Paradigm.IFC_NONALIGNED, ssd).total_us - timeline(Paradigm.IFC_ALIGNED, ssd).total_us
        assert delta == pytest.approx(2 * ssd.t_R_us + ssd.t_prog_us, rel=1e-12)

    def test_page_size_scales_transfers_not_ordering(self, ssd):
        big = SsdConfig(page_kib=32)
        t_dma, t_ext = transfer_times(ssd)
        b_dma, b_ext = transfer_times(big)
        assert b_dma == pytest.approx(2 * t_dma, rel=1e-12)
        assert b_ext == pytest.approx(2 * t_ext, rel=1e-12)
        assert (timeline(Paradigm.IFC_ALIGNED, big).total_us
                < timeline(Paradigm.ISC, big).total_us
                < timeline(Paradigm.OSC, big).total_us)

    def test_unknown_paradigm_rejected(self, ssd):
        with pytest.raises(ValueError):
            timeline("sideways", ssd)
        with pytest.raises(ValueError):
            timeline(Paradigm.PARABIT, ssd)  # needs baseline params


class TestReadLatency:
    def test_phase_model_reference_points(self):
        assert read_latency(OpKind.AND) == 40.0
        assert read_latency(OpKind.OR) == 70.0
        assert read_latency(OpKind.NOT) == 70.0
        assert read_latency(OpKind.XNOR) == 130.0

    def test_xnor_highest(self):
        times = {k: read_latency(k) for k in OpKind}
        assert max(times.values()) == times[OpKind.XNOR]

    def test_setfeature_charged_on_switch_only(self):
        base = read_latency(OpKind.AND, switching=False)
        switched = read_latency(OpKind.AND, switching=True)
        assert switched - base == 10.0
        assert switched - base <= 10.0


class TestEnergy:
    def test_ratio_is_151(self, em):
        ratio = energy_per_kb(OpKind.XNOR, em) / energy_per_kb(OpKind.AND, em)
        assert ratio == pytest.approx(1.51, abs=0.01)

    def test_monotone_in_phase_count(self, em):
        e = [read_energy_uj(k, em) for k in (OpKind.AND, OpKind.OR, OpKind.XNOR)]
        assert e[0] < e[1] < e[2]

    def test_nonaligned_adds_program_dominated_increment(self, em):
        aligned = energy_per_kb(OpKind.AND, em)
        nonaligned = energy_per_kb(OpKind.AND, em, aligned=False)
        increment = (nonaligned - aligned) * 16
        assert increment > em.e_prog_uj  # program plus the two extra reads
        assert em.e_prog_uj / increment > 0.5  # program dominates


class TestBaselines:
    def test_missing_params_rejected(self, ssd):
        with pytest.raises(ValueError):
            baseline_timeline(Paradigm.PARABIT, ssd, OpKind.AND, None)

    def test_parabit_realloc_charged_when_spilling(self, ssd, baselines):
        from dataclasses import replace
        no_latch = replace(baselines, parabit_latch_chain=False)
        plain = baseline_timeline(Paradigm.PARABIT, ssd, OpKind.AND, no_latch)
        chained = baseline_timeline(Paradigm.PARABIT, ssd, OpKind.AND, no_latch, realign=True)
        assert chained.total_us - plain.total_us == pytest.approx(no_latch.parabit_dram_realloc_us)

    def test_flashcosmos_multi_operand_single_sensing(self, ssd, baselines):
        two = baseline_timeline(Paradigm.FLASHCOSMOS, ssd, OpKind.AND, baselines, n_operands=2)
        sixteen = baseline_timeline(Paradigm.FLASHCOSMOS, ssd, OpKind.AND, baselines, n_operands=16)
        assert two.total_us == sixteen.total_us  # one sensing cycle regardless
        with pytest.raises(ValueError):
            baseline_timeline(Paradigm.FLASHCOSMOS, ssd, OpKind.AND, baselines, n_operands=17)

    def test_baselines_labeled_calibrated(self, ssd, baselines):
        assert baseline_timeline(Paradigm.PARABIT, ssd, OpKind.AND, baselines).calibrated
        assert baseline_timeline(Paradigm.FLASHCOSMOS, ssd, OpKind.XOR, baselines).calibrated
        assert not timeline(Paradigm.OSC, ssd).calibrated


class TestConfigValidation:
    def test_positive_counts_required(self):
        with pytest.raises(ValueError):
            SsdConfig(channels=0)
        with pytest.raises(ValueError):
            SsdConfig(host_bw_Bps=0)
