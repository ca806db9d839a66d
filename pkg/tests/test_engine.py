import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flashbitops.engine import (
    BitwiseEngine,
    OffsetPlanner,
    OpCode,
    OpKind,
    host_op,
)
from flashbitops.nand_device import NandDevice

from conftest import random_page

ALL_OPS = list(OpKind)
BINARY_OPS = [k for k in OpKind if k is not OpKind.NOT]


@pytest.fixture()
def engine(device):
    return BitwiseEngine(device)


def four_level_pages(n):
    a = np.resize(np.array([True, True, False, False]), n)
    b = np.resize(np.array([True, False, False, True]), n)
    return a, b


class TestPlans:
    def test_plan_steps_match_offset_ledger(self, cfg):
        """Signs and magnitudes of the per-reference shifts, in DAC steps."""
        planner = OffsetPlanner.from_config(cfg)
        and_plan = planner.plan(OpCode(OpKind.AND))
        assert and_plan.read_kind == "LSB"
        assert and_plan.cfg.offset_vref1 < 0  # down across L1
        assert and_plan.cfg.offset_vref0 == 0 and and_plan.cfg.offset_vref2 == 0

        or_plan = planner.plan(OpCode(OpKind.OR))
        assert or_plan.read_kind == "MSB"
        assert or_plan.cfg.offset_vref0 > 0  # up across L1
        assert or_plan.cfg.offset_vref2 == 0 and or_plan.cfg.offset_vref1 == 0

        xnor = planner.plan(OpCode(OpKind.XNOR))
        assert xnor.read_kind == "SBR"
        assert xnor.cfg_minus.offset_vref0 == 0 and xnor.cfg_minus.offset_vref2 == 0
        assert xnor.cfg_plus.offset_vref0 == or_plan.cfg.offset_vref0
        assert xnor.cfg_plus.offset_vref2 > 0  # above the top level
        assert xnor.cfg_plus.offset_vref1 == 0  # soft-bit plans never touch vref1

        not_plan = planner.plan(OpCode(OpKind.NOT))
        assert not_plan.cfg.offset_vref0 > or_plan.cfg.offset_vref0  # two levels up
        assert not_plan.cfg.offset_vref2 == xnor.cfg_plus.offset_vref2

    def test_planned_references_hit_valleys(self, cfg):
        planner = OffsetPlanner.from_config(cfg)
        step = planner.dac_step_v
        plan = planner.plan(OpCode(OpKind.AND))
        achieved = planner.defaults[1] + plan.cfg.offset_vref1 * step
        assert abs(achieved - plan.targets_v["vref1"]) <= step / 2
        plan = planner.plan(OpCode(OpKind.OR))
        achieved = planner.defaults[0] + plan.cfg.offset_vref0 * step
        assert abs(achieved - plan.targets_v["vref0"]) <= step / 2

    def test_direct_low_crossing_plans_degraded(self, cfg):
        planner = OffsetPlanner.from_config(cfg)
        for kind in (OpKind.NAND, OpKind.NOR, OpKind.XOR):
            assert planner.plan(OpCode(kind, use_inverse_read=False)).degraded
            assert not planner.plan(OpCode(kind, use_inverse_read=True)).degraded
        for kind in (OpKind.AND, OpKind.OR, OpKind.XNOR, OpKind.NOT):
            assert not planner.plan(OpCode(kind)).degraded

    def test_sensing_phase_counts(self, cfg):
        planner = OffsetPlanner.from_config(cfg)
        phases = {k: planner.plan(OpCode(k, use_inverse_read=False)).sensing_phases for k in OpKind}
        assert phases[OpKind.AND] == 1
        assert phases[OpKind.OR] == phases[OpKind.NOT] == phases[OpKind.NAND] == 2
        assert phases[OpKind.XNOR] == phases[OpKind.NOR] == phases[OpKind.XOR] == 4
        # inverse variants inherit the base op's phase count
        assert planner.plan(OpCode(OpKind.NAND, use_inverse_read=True)).sensing_phases == 1

    def test_plan_table_text(self, cfg):
        table = OffsetPlanner.from_config(cfg).plan_table()
        assert "AND" in table and "vref0" in table
        assert len(table.splitlines()) == 8

    def test_invalid_inverse_flag(self):
        with pytest.raises(ValueError):
            OpCode(OpKind.AND, use_inverse_read=True)
        with pytest.raises(ValueError):
            OpCode.parse("frobnicate")


class TestTruthTables:
    @pytest.mark.parametrize("kind", BINARY_OPS)
    def test_binary_truth_tables_exact(self, engine, kind):
        n = engine.device.geometry.cells_per_wordline
        a, b = four_level_pages(n)
        engine.write_operands(0, 0, a, b)
        got, degraded, _ = engine.execute(0, 0, OpCode(kind))
        assert np.array_equal(got, host_op(kind, a, b))
        assert not degraded
        engine.device.erase_block(0)

    def test_not_truth_table_over_upper_levels(self, engine):
        n = engine.device.geometry.cells_per_wordline
        operand = np.resize(np.array([False, True]), n)
        engine.write_operands(0, 0, operand, op=OpCode(OpKind.NOT))
        got, degraded, phases = engine.execute(0, 0, OpCode(OpKind.NOT))
        assert np.array_equal(got, ~operand)
        assert not degraded and phases == 2
        levels = set(engine.device._wordlines[(0, 0)].levels.tolist())
        assert levels == {2, 3}  # all-zero preload removes the lower levels

    @pytest.mark.parametrize("kind", [OpKind.NAND, OpKind.NOR, OpKind.XOR])
    def test_direct_paths_fail_on_erased_cells(self, engine, kind):
        n = engine.device.geometry.cells_per_wordline
        a = np.ones(n, dtype=bool)
        b = np.ones(n, dtype=bool)  # every cell L0
        engine.write_operands(0, 0, a, b)
        got, degraded, _ = engine.execute(0, 0, OpCode(kind, use_inverse_read=False))
        want = host_op(kind, a, b)
        assert degraded
        assert (got != want).mean() > 0.5  # most erased cells misdecode
        engine.device.erase_block(0)


class TestExecution:
    @given(seed=st.integers(0, 2**31 - 1), kind=st.sampled_from(BINARY_OPS))
    @settings(max_examples=30, deadline=None)
    def test_random_operand_oracle_equivalence(self, small_cfg, seed, kind):
        device = NandDevice.from_config(small_cfg, rng=np.random.default_rng(seed))
        engine = BitwiseEngine(device)
        n = device.geometry.cells_per_wordline
        rng = np.random.default_rng(seed + 1)
        a, b = random_page(rng, n), random_page(rng, n)
        engine.write_operands(0, 0, a, b)
        got, _, _ = engine.execute(0, 0, OpCode(kind))
        assert np.array_equal(got, host_op(kind, a, b))

    def test_read_only_compute(self, engine):
        n = engine.device.geometry.cells_per_wordline
        rng = np.random.default_rng(21)
        a, b = random_page(rng, n), random_page(rng, n)
        engine.write_operands(0, 0, a, b)
        for kind in BINARY_OPS * 2:
            engine.execute(0, 0, OpCode(kind))
        assert np.array_equal(engine.device.read_page(0, 0, "LSB", engine.device.default_feature()), a)
        assert np.array_equal(engine.device.read_page(0, 0, "MSB", engine.device.default_feature()), b)

    def test_set_feature_charged_on_opcode_switch_only(self, engine):
        n = engine.device.geometry.cells_per_wordline
        rng = np.random.default_rng(22)
        engine.write_operands(0, 0, random_page(rng, n), random_page(rng, n))
        start = engine.device.counters.set_features
        engine.execute(0, 0, OpCode(OpKind.AND))
        engine.execute(0, 0, OpCode(OpKind.AND))
        assert engine.device.counters.set_features - start == 1
        engine.execute(0, 0, OpCode(OpKind.OR))
        assert engine.device.counters.set_features - start == 2

    def test_execute_unprogrammed_rejected(self, engine):
        with pytest.raises(RuntimeError):
            engine.execute(0, 7, OpCode(OpKind.AND))

    def test_write_operands_requires_pair_for_binary(self, engine):
        n = engine.device.geometry.cells_per_wordline
        with pytest.raises(ValueError):
            engine.write_operands(0, 0, np.ones(n, dtype=bool))


class TestAlignment:
    def test_align_then_execute_matches_oracle(self, engine):
        device = engine.device
        n = device.geometry.cells_per_wordline
        rng = np.random.default_rng(30)
        a, b = random_page(rng, n), random_page(rng, n)
        # operands scattered: a is an LSB page, b an MSB page, different blocks
        device.program_wordline(0, 0, a, random_page(rng, n))
        device.program_wordline(1, 0, random_page(rng, n), b)
        cost = engine.align_operands((0, 0, "LSB"), (1, 0, "MSB"), 2, 0)
        assert (cost.reads, cost.programs, cost.compute_reads) == (2, 1, 1)
        got, _, _ = engine.execute(2, 0, OpCode(OpKind.AND))
        assert np.array_equal(got, a & b)

    def test_align_page_with_itself_is_idempotent_under_and(self, engine):
        device = engine.device
        n = device.geometry.cells_per_wordline
        rng = np.random.default_rng(31)
        a = random_page(rng, n)
        device.program_wordline(0, 0, a, random_page(rng, n))
        engine.align_operands((0, 0, "LSB"), (0, 0, "LSB"), 3, 0)
        got, _, _ = engine.execute(3, 0, OpCode(OpKind.AND))
        assert np.array_equal(got, a)

    def test_align_to_programmed_destination_rejected(self, engine):
        device = engine.device
        n = device.geometry.cells_per_wordline
        rng = np.random.default_rng(32)
        device.program_wordline(0, 0, random_page(rng, n), random_page(rng, n))
        device.program_wordline(1, 0, random_page(rng, n), random_page(rng, n))
        with pytest.raises(Exception):
            engine.align_operands((0, 0, "LSB"), (0, 0, "MSB"), 1, 0)
