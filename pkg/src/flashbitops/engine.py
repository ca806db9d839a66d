"""Bulk bitwise operations on MLC wordlines via planned read offsets.

A two-operand op stores operand A on the LSB page and operand B on the
MSB page of one wordline, then decodes the Boolean function of the two
bits per cell with a single (possibly soft-bit) read whose references
are shifted to engineered positions:

    AND   LSB read, vref1 lowered to the L0/L1 valley
    OR    MSB read, vref0 raised to the L1/L2 valley
    XNOR  soft-bit read: minus sense at defaults, plus sense with
          vref0 at the L1/L2 valley and vref2 above L3 (the plus sense
          then mirrors the LSB page, and the internal XNOR combines it
          with the MSB page)
    NOT   unary; LSB page preloaded all-zero so only L2/L3 occur, then
          an MSB read with vref0 at the L2/L3 valley and vref2 above L3

NAND/NOR/XOR are the complements of AND/OR/XNOR: by default they run
the base plan plus an inverse (complemented) read, which costs nothing
extra and inherits the base op's exact error behavior. They also have
direct constructions that must take vref0 below the erased population;
that target is outside the vendor's offset window, so direct plans come
back flagged degraded and misdecode a large share of erased cells.

Reads never alter the stored operands, so any sequence of ops can be
re-executed over the same wordline.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .cell_physics import CellParams, Level, valley_midpoint
from .nand_device import (
    NandDevice,
    PHASES_LSB,
    PHASES_MSB,
    PHASES_SBR,
    ReadRefConfig,
)


class OpKind(enum.Enum):
    AND = "AND"
    OR = "OR"
    XNOR = "XNOR"
    NOT = "NOT"
    NAND = "NAND"
    NOR = "NOR"
    XOR = "XOR"


# Complement pairs: op -> base op whose plan plus inverse read realizes it.
_INVERSE_BASE = {OpKind.NAND: OpKind.AND, OpKind.NOR: OpKind.OR, OpKind.XOR: OpKind.XNOR}


@dataclass(frozen=True)
class OpCode:
    kind: OpKind
    use_inverse_read: bool | None = None  # None: inverse path where one exists

    def __post_init__(self):
        if self.use_inverse_read and self.kind not in _INVERSE_BASE:
            raise ValueError(f"{self.kind.value} has no inverse-read variant")

    @property
    def inverse(self) -> bool:
        if self.use_inverse_read is None:
            return self.kind in _INVERSE_BASE
        return self.use_inverse_read

    @classmethod
    def parse(cls, name: str, use_inverse_read: bool | None = None) -> "OpCode":
        try:
            kind = OpKind[name.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown opcode {name!r}") from None
        return cls(kind, use_inverse_read)


def host_op(kind: OpKind, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Reference Boolean implementation used as the oracle in checks."""
    if kind is OpKind.NOT:
        if b is not None:
            raise ValueError("NOT is unary")
        return ~a
    assert b is not None
    if kind is OpKind.AND:
        return a & b
    if kind is OpKind.OR:
        return a | b
    if kind is OpKind.XNOR:
        return ~(a ^ b)
    if kind is OpKind.NAND:
        return ~(a & b)
    if kind is OpKind.NOR:
        return ~(a | b)
    if kind is OpKind.XOR:
        return a ^ b
    raise ValueError(kind)


@dataclass(frozen=True)
class OffsetPlan:
    """Concrete read recipe for one opcode."""

    op: OpCode
    read_kind: str  # "LSB" | "MSB" | "SBR"
    cfg: ReadRefConfig | None = None
    cfg_plus: ReadRefConfig | None = None
    cfg_minus: ReadRefConfig | None = None
    sensing_phases: int = 0
    invert_output: bool = False
    degraded: bool = False
    targets_v: dict = None  # requested reference positions, for inspection

    @property
    def primary_cfg(self) -> ReadRefConfig:
        return self.cfg if self.cfg is not None else self.cfg_plus


class OffsetPlanner:
    """Quantizes per-opcode reference targets into DAC-step offsets.

    Plans are computed from the fresh nominal populations (a factory
    calibration view); re-planning per wear point is possible by passing
    different params but is not done automatically.
    """

    def __init__(
        self,
        params: CellParams,
        ref_defaults: tuple[float, float, float],
        dac_step_v: float = 0.03,
        register_width_bits: int = 8,
        ref_window_v: tuple[float, float] = (-2.0, 4.5),
    ):
        self.params = params
        self.defaults = tuple(float(v) for v in ref_defaults)
        self.dac_step_v = float(dac_step_v)
        self.register_width_bits = int(register_width_bits)
        self.ref_window_v = (float(ref_window_v[0]), float(ref_window_v[1]))

    @classmethod
    def from_config(cls, cfg: dict) -> "OffsetPlanner":
        refs = cfg["references"]
        return cls(
            params=CellParams.from_config(cfg),
            ref_defaults=(refs["vref0_v"], refs["vref1_v"], refs["vref2_v"]),
            dac_step_v=float(refs["dac_step_v"]),
            register_width_bits=int(refs["register_width_bits"]),
            ref_window_v=tuple(refs["ref_window_v"]),
        )

    # Edge-crossing targets clear the population's k-sigma edge at full
    # rated wear (sigma grown by the level's coefficient), plus one DAC
    # step, so a crossing reference stays clear over the device lifetime.
    def _above_l3(self) -> float:
        p = self.params
        worn_sigma = p.sigmas_v[3] * (1.0 + p.sigma_growth_coeff[3])
        return p.means_v[3] + p.k_sigma * worn_sigma + self.dac_step_v

    def _below_l0(self) -> float:
        p = self.params
        worn_sigma = p.sigmas_v[0] * (1.0 + p.sigma_growth_coeff[0])
        return p.means_v[0] - p.k_sigma * worn_sigma - self.dac_step_v

    def _quantize(self, ref_index: int, target_v: float) -> tuple[int, bool]:
        """Steps for one reference, clamped into the register and vendor
        window; second element reports whether clamping moved it."""
        default = self.defaults[ref_index]
        steps = round((target_v - default) / self.dac_step_v)
        bound = 2 ** (self.register_width_bits - 1) - 1
        lo_v, hi_v = self.ref_window_v
        min_steps = max(-bound, int(np.ceil((lo_v - default) / self.dac_step_v)))
        max_steps = min(bound, int(np.floor((hi_v - default) / self.dac_step_v)))
        clamped = int(min(max(steps, min_steps), max_steps))
        return clamped, clamped != steps

    def _cfg(self, offsets: dict[int, float]) -> tuple[ReadRefConfig, bool]:
        steps = {0: 0, 1: 0, 2: 0}
        degraded = False
        for idx, target in offsets.items():
            s, clipped = self._quantize(idx, target)
            steps[idx] = s
            degraded |= clipped
        cfg = ReadRefConfig(
            offset_vref0=steps[0],
            offset_vref1=steps[1],
            offset_vref2=steps[2],
            dac_step_v=self.dac_step_v,
            register_width_bits=self.register_width_bits,
        )
        return cfg, degraded

    def plan(self, op: OpCode) -> OffsetPlan:
        """Produce the offset plan for one opcode (never rejects; plans
        that could not reach their targets come back flagged degraded)."""
        kind = op.kind
        if op.inverse:
            base = self.plan(OpCode(_INVERSE_BASE[kind]))
            return OffsetPlan(
                op=op,
                read_kind=base.read_kind,
                cfg=base.cfg,
                cfg_plus=base.cfg_plus,
                cfg_minus=base.cfg_minus,
                sensing_phases=base.sensing_phases,
                invert_output=True,
                degraded=base.degraded,
                targets_v=base.targets_v,
            )

        p = self.params
        v01 = valley_midpoint(Level.L0, Level.L1, p)
        v12 = valley_midpoint(Level.L1, Level.L2, p)
        v23 = valley_midpoint(Level.L2, Level.L3, p)

        if kind is OpKind.AND:
            cfg, deg = self._cfg({1: v01})
            return OffsetPlan(op, "LSB", cfg=cfg, sensing_phases=PHASES_LSB, degraded=deg,
                              targets_v={"vref1": v01})
        if kind is OpKind.OR:
            cfg, deg = self._cfg({0: v12})
            return OffsetPlan(op, "MSB", cfg=cfg, sensing_phases=PHASES_MSB, degraded=deg,
                              targets_v={"vref0": v12})
        if kind is OpKind.NOT:
            cfg, deg = self._cfg({0: v23, 2: self._above_l3()})
            return OffsetPlan(op, "MSB", cfg=cfg, sensing_phases=PHASES_MSB, degraded=deg,
                              targets_v={"vref0": v23, "vref2": self._above_l3()})
        if kind is OpKind.XNOR:
            plus, deg_p = self._cfg({0: v12, 2: self._above_l3()})
            minus, deg_m = self._cfg({})
            return OffsetPlan(op, "SBR", cfg_plus=plus, cfg_minus=minus,
                              sensing_phases=PHASES_SBR, degraded=deg_p or deg_m,
                              targets_v={"plus.vref0": v12, "plus.vref2": self._above_l3()})
        if kind is OpKind.NAND:
            cfg, deg = self._cfg({0: self._below_l0(), 2: v01})
            return OffsetPlan(op, "MSB", cfg=cfg, sensing_phases=PHASES_MSB, degraded=deg,
                              targets_v={"vref0": self._below_l0(), "vref2": v01})
        if kind is OpKind.NOR:
            plus, deg_p = self._cfg({0: v12, 2: self._above_l3()})
            minus, deg_m = self._cfg({0: self._below_l0()})
            return OffsetPlan(op, "SBR", cfg_plus=plus, cfg_minus=minus,
                              sensing_phases=PHASES_SBR, degraded=deg_p or deg_m,
                              targets_v={"plus.vref0": v12, "plus.vref2": self._above_l3(),
                                         "minus.vref0": self._below_l0()})
        if kind is OpKind.XOR:
            plus, deg_p = self._cfg({})
            minus, deg_m = self._cfg({0: self._below_l0(), 2: v12})
            return OffsetPlan(op, "SBR", cfg_plus=plus, cfg_minus=minus,
                              sensing_phases=PHASES_SBR, degraded=deg_p or deg_m,
                              targets_v={"minus.vref0": self._below_l0(), "minus.vref2": v12})
        raise ValueError(kind)

    def plan_table(self, ops: list[OpCode] | None = None) -> str:
        """Per-reference signed DAC steps for each opcode, as text."""
        if ops is None:
            ops = [OpCode(k, use_inverse_read=False) for k in OpKind]
        lines = [f"{'op':<6} {'read':<8} {'vref0':>6} {'vref1':>6} {'vref2':>6} "
                 f"{'vref0-':>7} {'vref2-':>7} {'degraded':>8}"]
        for op in ops:
            plan = self.plan(op)
            read = plan.read_kind + ("+inv" if plan.invert_output else "")
            if plan.read_kind == "SBR":
                cp, cm = plan.cfg_plus, plan.cfg_minus
                lines.append(
                    f"{op.kind.value:<6} {read:<8} {cp.offset_vref0:>6} {cp.offset_vref1:>6} "
                    f"{cp.offset_vref2:>6} {cm.offset_vref0:>7} {cm.offset_vref2:>7} {str(plan.degraded):>8}"
                )
            else:
                c = plan.cfg
                lines.append(
                    f"{op.kind.value:<6} {read:<8} {c.offset_vref0:>6} {c.offset_vref1:>6} "
                    f"{c.offset_vref2:>6} {'':>7} {'':>7} {str(plan.degraded):>8}"
                )
        return "\n".join(lines)


@dataclass(frozen=True)
class AlignmentCost:
    reads: int
    programs: int
    compute_reads: int


class BitwiseEngine:
    """Executes planned ops against one device."""

    def __init__(self, device: NandDevice, planner: OffsetPlanner | None = None):
        self.device = device
        self.planner = planner or OffsetPlanner(
            device.cell_params,
            device.ref_defaults,
            dac_step_v=device.dac_step_v,
            register_width_bits=device.register_width_bits,
            ref_window_v=device.ref_window_v,
        )
        self._last_op: OpCode | None = None

    def write_operands(self, block: int, wordline: int, a: np.ndarray, b: np.ndarray | None = None,
                       op: OpCode | None = None) -> None:
        """Program operands onto the shared pages (A -> LSB, B -> MSB).

        For NOT the LSB page is forced all-zero and the single operand
        goes to the MSB page; all-zero (not all-ones) because clearing
        the wide erased population out of the read path is what makes
        the complementing read reachable.
        """
        a = np.asarray(a, dtype=bool)
        if op is not None and op.kind is OpKind.NOT:
            operand = a if b is None else np.asarray(b, dtype=bool)
            zeros = np.zeros(self.device.geometry.cells_per_wordline, dtype=bool)
            self.device.program_wordline(block, wordline, zeros, operand)
            return
        if b is None:
            raise ValueError("two operands required for binary ops")
        self.device.program_wordline(block, wordline, a, np.asarray(b, dtype=bool))

    def execute(self, block: int, wordline: int, op: OpCode) -> tuple[np.ndarray, bool, int]:
        """Run one op over a programmed wordline.

        Returns (result bits, degraded flag, sensing phases). The stored
        operands are untouched, so repeated executes are permitted.
        """
        if not self.device.is_programmed(block, wordline):
            raise RuntimeError(f"wordline ({block},{wordline}) has no programmed operands")
        plan = self.planner.plan(op)
        if op != self._last_op:
            # feature-register update is charged once per opcode switch
            self.device.set_feature(plan.primary_cfg)
            self._last_op = op
        if plan.read_kind == "SBR":
            bits = self.device.soft_bit_read(block, wordline, plan.cfg_plus, plan.cfg_minus)
        else:
            bits = self.device.read_page(block, wordline, plan.read_kind, plan.cfg)
        if plan.invert_output:
            bits = ~bits
        return bits, plan.degraded, plan.sensing_phases

    def align_operands(self, src_a: tuple[int, int, str], src_b: tuple[int, int, str],
                       dst_block: int, dst_wordline: int) -> AlignmentCost:
        """Co-locate two scattered pages onto one wordline via copyback.

        Two internal reads stage the operands as the destination's
        LSB/MSB pair; the paired program fires when the second arrives.
        The compute read that follows is charged by the caller's timing
        model (reads=2, programs=1, compute_reads=1).
        """
        self.device.copyback(src_a, (dst_block, dst_wordline, "LSB"))
        self.device.copyback(src_b, (dst_block, dst_wordline, "MSB"))
        return AlignmentCost(reads=2, programs=1, compute_reads=1)


__all__ = [
    "AlignmentCost",
    "BitwiseEngine",
    "OffsetPlan",
    "OffsetPlanner",
    "OpCode",
    "OpKind",
    "host_op",
]
