"""Raw-bit-error-rate experiments and wear-model calibration.

Two complementary views of the same error mechanism:

* Monte-Carlo: write random operands, execute, diff against the host
  oracle (``measure_rber``); sweep one reference offset across a range
  (``sweep_offset``); age blocks with ``cycle_block``/``retention_bake``.

* Analytic: because every population is a truncated Gaussian and every
  read is a deterministic threshold test, the expected error rate of an
  op at a wear point is a sum of truncated tail masses over the decode
  intervals (``ErrorModel``). Calibration fits the retention-shift
  coefficients against target cycled error rates with this closed form,
  so it is fast and deterministic.

Experiments fan out across independent device instances, one worker per
instance; reports merge by pure reduction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .cell_physics import (
    CellParams,
    LSB_OF_LEVEL,
    MSB_OF_LEVEL,
    WearState,
    distribution_params,
    truncated_mass,
    valley_window,
)
from .engine import BitwiseEngine, OffsetPlanner, OpCode, OpKind, host_op
from .nand_device import NandDevice, ReadRefConfig


class CapacityError(RuntimeError):
    """Experiment does not fit the device geometry."""


class CalibrationError(RuntimeError):
    """Calibration constraints cannot all be met."""


@dataclass
class RberReport:
    opcode: str
    wear: WearState
    trials: int
    pages_tested: int
    bits_compared: int
    mismatches: int
    rber_percent: float
    rber_upper95_percent: float | None = None  # rule-of-three bound when no errors seen under wear
    degraded: bool = False
    positions: np.ndarray | None = None

    @staticmethod
    def from_counts(opcode: str, wear: WearState, pages: int, page_bits: int,
                    mismatches: int, degraded: bool,
                    positions: np.ndarray | None = None) -> "RberReport":
        bits = pages * page_bits
        rber = 100.0 * mismatches / bits if bits else 0.0
        upper = None
        worn = wear.pe_cycles > 0 or wear.retention_hours > 0
        if mismatches == 0 and worn and bits:
            upper = 100.0 * 3.0 / bits
        return RberReport(opcode, wear, pages, pages, bits, mismatches, rber,
                          rber_upper95_percent=upper, degraded=degraded, positions=positions)


@dataclass
class SweepCurve:
    opcode: str
    reference: str
    offset_steps: list[int]
    rber_percent: list[float]
    zero_window: tuple[int, int] | None

    @staticmethod
    def detect_zero_window(offsets: list[int], rber: list[float]) -> tuple[int, int] | None:
        """Longest contiguous run of exactly-zero points, as (low, high)."""
        best = None
        start = None
        for off, r in zip(list(offsets) + [None], list(rber) + [1.0]):
            if r == 0.0:
                if start is None:
                    start = off
                end = off
            else:
                if start is not None:
                    if best is None or (end - start) > (best[1] - best[0]):
                        best = (start, end)
                    start = None
        return best


def measure_rber(
    device: NandDevice,
    op: OpCode,
    pages: int,
    rng: np.random.Generator,
    bake_hours: float = 0.0,
    collect_positions: bool = False,
) -> RberReport:
    """Write random operands, execute ``op``, diff against the host oracle.

    Blocks are recycled (program, optional bake, execute, erase) so an
    arbitrary page count fits any geometry; recycling ages the blocks by
    one P/E round per pass, which is also how a physical campaign works.
    """
    geo = device.geometry
    if geo.blocks < 1 or geo.wordlines_per_block < 1:
        raise CapacityError("device has no usable wordlines")
    engine = BitwiseEngine(device)
    n_bits = geo.cells_per_wordline
    wear = WearState(device.block_wear(0).pe_cycles, bake_hours)  # wear under test, at entry
    mismatches = 0
    degraded = False
    positions: list[np.ndarray] = []
    done = 0
    block = 0
    while done < pages:
        batch = min(pages - done, geo.wordlines_per_block)
        operands = []
        for w in range(batch):
            a = rng.integers(0, 2, n_bits, dtype=np.uint8).astype(bool)
            if op.kind is OpKind.NOT:
                engine.write_operands(block, w, a, op=op)
                operands.append((a, None))
            else:
                b = rng.integers(0, 2, n_bits, dtype=np.uint8).astype(bool)
                engine.write_operands(block, w, a, b)
                operands.append((a, b))
        if bake_hours:
            device.advance_retention(block, bake_hours)
        for w, (a, b) in enumerate(operands):
            got, deg, _ = engine.execute(block, w, op)
            degraded |= deg
            want = host_op(op.kind, a) if b is None else host_op(op.kind, a, b)
            diff = got != want
            bad = int(diff.sum())
            mismatches += bad
            if collect_positions and bad:
                positions.append(np.flatnonzero(diff))
        device.erase_block(block)
        done += batch
        block = (block + 1) % geo.blocks
    pos = np.concatenate(positions) if positions else (np.array([], dtype=int) if collect_positions else None)
    return RberReport.from_counts(op.kind.value, wear, pages, n_bits, mismatches, degraded, pos)


def sweep_offset(
    device: NandDevice,
    op: OpCode,
    reference: str,
    offsets: list[int] | range,
    pages_per_point: int,
    rng: np.random.Generator,
    bake_hours: float = 0.0,
) -> SweepCurve:
    """Vary one reference offset while holding the rest of the plan fixed.

    The same programmed operand pages are re-read at every sweep point
    (reads are non-destructive). For soft-bit ops the swept config is
    the plus sense. Rejects references the op's read does not sense.
    """
    engine = BitwiseEngine(device)
    plan = engine.planner.plan(op)
    sensed = {"LSB": ("vref1",), "MSB": ("vref0", "vref2"), "SBR": ("vref0", "vref2")}[plan.read_kind]
    if reference not in sensed:
        raise ValueError(f"{op.kind.value} ({plan.read_kind} read) does not sense {reference}")
    geo = device.geometry
    pages_per_point = int(pages_per_point)
    if pages_per_point > geo.wordlines_per_block * geo.blocks:
        raise CapacityError("pages_per_point exceeds device capacity")

    n_bits = geo.cells_per_wordline
    where = []
    expected = []
    per_block = geo.wordlines_per_block
    for i in range(pages_per_point):
        blk, w = divmod(i, per_block)
        a = rng.integers(0, 2, n_bits, dtype=np.uint8).astype(bool)
        if op.kind is OpKind.NOT:
            engine.write_operands(blk, w, a, op=op)
            expected.append(host_op(op.kind, a))
        else:
            b = rng.integers(0, 2, n_bits, dtype=np.uint8).astype(bool)
            engine.write_operands(blk, w, a, b)
            expected.append(host_op(op.kind, a, b))
        where.append((blk, w))
    if bake_hours:
        for blk in sorted({b for b, _ in where}):
            device.advance_retention(blk, bake_hours)

    field = {"vref0": "offset_vref0", "vref1": "offset_vref1", "vref2": "offset_vref2"}[reference]
    rber = []
    steps = [int(o) for o in offsets]
    for off in steps:
        bad = 0
        base = plan.cfg_plus if plan.read_kind == "SBR" else plan.cfg
        cfg = replace(base, **{field: off})
        for (blk, w), want in zip(where, expected):
            if plan.read_kind == "SBR":
                got = device.soft_bit_read(blk, w, cfg, plan.cfg_minus)
            else:
                got = device.read_page(blk, w, plan.read_kind, cfg)
            if plan.invert_output:
                got = ~got
            bad += int((got != want).sum())
        rber.append(100.0 * bad / (pages_per_point * n_bits))
    window = SweepCurve.detect_zero_window(steps, rber)
    return SweepCurve(op.kind.value, reference, steps, rber, window)


def cycle_block(device: NandDevice, block: int, n: int) -> None:
    """Advance a block by n program/erase rounds (content ends erased)."""
    device.advance_pe_cycles(block, n)


def retention_bake(device: NandDevice, block: int, hours: float) -> None:
    """Age a block's stored data by the given retention time."""
    device.advance_retention(block, hours)


# ---------------------------------------------------------------------------
# Analytic error model

_BINARY_OCCUPANCY = (0.25, 0.25, 0.25, 0.25)
_NOT_OCCUPANCY = (0.0, 0.0, 0.5, 0.5)

# Expected per-level outputs are the Boolean function of the Gray pair.
_LSB = np.array(LSB_OF_LEVEL, dtype=bool)
_MSB = np.array(MSB_OF_LEVEL, dtype=bool)


def _expected_per_level(kind: OpKind) -> np.ndarray:
    if kind is OpKind.NOT:
        return ~_MSB
    return host_op(kind, _LSB, _MSB)


class ErrorModel:
    """Closed-form expected error rates from truncated-tail masses."""

    def __init__(self, params: CellParams, planner: OffsetPlanner, ref_window_v: tuple[float, float]):
        self.params = params
        self.planner = planner
        self.window = (float(ref_window_v[0]), float(ref_window_v[1]))

    @classmethod
    def from_config(cls, cfg: dict) -> "ErrorModel":
        planner = OffsetPlanner.from_config(cfg)
        return cls(planner.params, planner, tuple(cfg["references"]["ref_window_v"]))

    def _refs(self, cfg: ReadRefConfig) -> tuple[float, float, float]:
        lo, hi = self.window
        return tuple(min(max(v, lo), hi) for v in cfg.shifted_refs(self.planner.defaults))

    def _decoder(self, plan) -> callable:
        if plan.read_kind == "LSB":
            _, r1, _ = self._refs(plan.cfg)
            base = lambda v: v < r1
        elif plan.read_kind == "MSB":
            r0, _, r2 = self._refs(plan.cfg)
            base = lambda v: (v < r0) or (v >= r2)
        else:
            p0, _, p2 = self._refs(plan.cfg_plus)
            m0, _, m2 = self._refs(plan.cfg_minus)
            base = lambda v: ((v < m0) or (v >= m2)) == ((v < p0) or (v >= p2))
        if plan.invert_output:
            return lambda v: not base(v)
        return base

    def _thresholds(self, plan) -> list[float]:
        if plan.read_kind == "LSB":
            return [self._refs(plan.cfg)[1]]
        if plan.read_kind == "MSB":
            r0, _, r2 = self._refs(plan.cfg)
            return [r0, r2]
        p0, _, p2 = self._refs(plan.cfg_plus)
        m0, _, m2 = self._refs(plan.cfg_minus)
        return [p0, p2, m0, m2]

    def predict(self, op: OpCode, pe_cycles: int, retention_hours: float) -> float:
        """Expected error fraction for uniform random operands."""
        plan = self.planner.plan(op)
        decode = self._decoder(plan)
        thresholds = self._thresholds(plan)
        wear = WearState(pe_cycles, retention_hours)
        expected = _expected_per_level(op.kind)
        occupancy = _NOT_OCCUPANCY if op.kind is OpKind.NOT else _BINARY_OCCUPANCY
        total = 0.0
        k = self.params.k_sigma
        for level in range(4):
            if occupancy[level] == 0.0:
                continue
            d = distribution_params(level, wear, self.params)
            lo, hi = d.mean - k * d.sigma, d.mean + k * d.sigma
            cuts = sorted({lo, hi, *[t for t in thresholds if lo < t < hi]})
            err = 0.0
            for a, b in zip(cuts[:-1], cuts[1:]):
                if decode(0.5 * (a + b)) != bool(expected[level]):
                    err += truncated_mass(a, b, d.mean, d.sigma, k)
            total += occupancy[level] * err
        return total

    def predict_percent(self, op: OpCode, pe_cycles: int, retention_hours: float) -> float:
        return 100.0 * self.predict(op, pe_cycles, retention_hours)


def calibrate(
    cfg: dict,
    targets_percent: dict[str, float] | None = None,
    pe_cycles: int | None = None,
    bake_hours: float | None = None,
) -> tuple[CellParams, dict]:
    """Fit the retention-shift coefficients to cycled error targets.

    Holds the distribution table and sigma-growth coefficients from the
    config fixed; solves the four shift magnitudes by bisection on the
    analytic model, one op at a time in dependency order (NOT -> a3,
    OR -> a2, AND -> a1, XNOR -> a0). Hard constraints are checked, not
    relaxed: the four ops must predict exactly zero when fresh, the
    OR reference window must be gone at the heavy-wear point, and the
    fitted shifts must keep |a3| > |a2| > |a1|.
    """
    rel = cfg["reliability"]
    targets = dict(targets_percent or rel["targets_percent"])
    point_pe = int(rel["calibration_point"]["pe_cycles"] if pe_cycles is None else pe_cycles)
    point_h = float(rel["calibration_point"]["bake_hours"] if bake_hours is None else bake_hours)
    heavy = int(rel["heavy_wear_pe"])
    for name in ("AND", "OR", "XNOR", "NOT"):
        if name not in targets:
            raise CalibrationError(f"missing calibration target for {name}")

    base = CellParams.from_config(cfg)

    def with_shifts(shifts: list[float]) -> CellParams:
        return replace(base, retention_shift_v=tuple(shifts))

    def model(shifts: list[float]) -> ErrorModel:
        params = with_shifts(shifts)
        refs = cfg["references"]
        planner = OffsetPlanner(
            params,
            (refs["vref0_v"], refs["vref1_v"], refs["vref2_v"]),
            dac_step_v=float(refs["dac_step_v"]),
            register_width_bits=int(refs["register_width_bits"]),
            ref_window_v=tuple(refs["ref_window_v"]),
        )
        return ErrorModel(params, planner, tuple(refs["ref_window_v"]))

    def solve(op_name: str, probe, hi: float = 0.5) -> float:
        """Bisect one shift magnitude; ``probe(a)`` builds an
        ordering-consistent shift vector around the trial value."""
        target = targets[op_name] / 100.0
        op = OpCode(OpKind[op_name])
        lo = 0.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            got = model(probe(mid)).predict(op, point_pe, point_h)
            if got < target:
                lo = mid
            else:
                hi = mid
        fitted = 0.5 * (lo + hi)
        achieved = model(probe(fitted)).predict(op, point_pe, point_h)
        if not math.isclose(achieved, target, rel_tol=0.02):
            raise CalibrationError(
                f"cannot reach {op_name} target {target:g} under the ordering "
                f"constraints (best {achieved:g}); targets are infeasible with "
                "the configured sigma-growth coefficients"
            )
        return fitted

    # Dependency order keeps each 1-D solve independent of the shifts
    # not yet fitted: NOT fixes a3, then OR fixes a2 (< a3), then AND
    # fixes a1 (< a2), then XNOR fixes a0.
    eps = 1e-9
    a3 = solve("NOT", lambda a: [eps, a / 4, a / 2, a])
    a2 = solve("OR", lambda a: [eps, a / 2, a, a3], hi=a3 * (1 - 1e-6))
    a1 = solve("AND", lambda a: [eps, a, a2, a3], hi=a2 * (1 - 1e-6))
    a0 = solve("XNOR", lambda a: [a, a1, a2, a3])
    shifts = [a0, a1, a2, a3]

    if not (abs(shifts[3]) > abs(shifts[2]) > abs(shifts[1])):
        raise CalibrationError(
            f"fitted shifts violate |a3|>|a2|>|a1|: {shifts}; targets are infeasible "
            "under the configured sigma-growth coefficients"
        )
    fitted = with_shifts(shifts)
    em = model(shifts)
    fresh = {n: em.predict_percent(OpCode(OpKind[n]), 0, 0.0) for n in ("AND", "OR", "XNOR", "NOT")}
    if any(v != 0.0 for v in fresh.values()):
        raise CalibrationError(f"fresh error rates not zero under fitted params: {fresh}")
    win = valley_window(1, 2, WearState(heavy, 0.0), fitted)
    if win[0] < win[1]:
        raise CalibrationError(
            f"OR reference window still open at {heavy} cycles: {win}; raise sigma growth"
        )
    achieved = {n: em.predict_percent(OpCode(OpKind[n]), point_pe, point_h)
                for n in ("AND", "OR", "XNOR", "NOT")}
    report = {
        "point": {"pe_cycles": point_pe, "bake_hours": point_h},
        "targets_percent": targets,
        "achieved_percent": achieved,
        "retention_shift_v": shifts,
        "fresh_percent": fresh,
        "heavy_window": win,
    }
    return fitted, report


def chi_squared_uniformity(positions: np.ndarray, n_cells: int, bins: int = 16) -> tuple[float, float]:
    """Chi-squared statistic for mismatch positions vs. a uniform layout.

    Returns (statistic, critical value at the 0.01 significance level).
    """
    if bins != 16:
        raise ValueError("critical value tabulated for 16 bins only")
    counts, _ = np.histogram(positions, bins=bins, range=(0, n_cells))
    expected = positions.size / bins
    if expected == 0:
        return 0.0, 30.5779
    stat = float(((counts - expected) ** 2 / expected).sum())
    return stat, 30.5779  # chi-square 0.99 quantile, 15 degrees of freedom


__all__ = [
    "CalibrationError",
    "CapacityError",
    "ErrorModel",
    "RberReport",
    "SweepCurve",
    "calibrate",
    "chi_squared_uniformity",
    "cycle_block",
    "measure_rber",
    "retention_bake",
    "sweep_offset",
]
