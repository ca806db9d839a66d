"""Analytic SSD-level timing and energy model.

Closed-form per-channel execution timelines for a bulk two-operand
bitwise op over 8 MiB bit vectors striped one page per plane across the
whole drive (channels x dies x planes). Four paradigms:

    OSC            read both operands to the host, compute there
    ISC            compute in the SSD controller, ship only the result
    IFC_ALIGNED    compute in the flash array (operands share wordlines)
    IFC_NONALIGNED in-array compute after a copyback realignment

plus two parameterized in-flash baselines (PARABIT, FLASHCOSMOS) whose
constants are calibrated against reported system results rather than
derived; outputs carry that label.

All transfer terms use binary units (KiB/GiB); the reference totals are
reproduced only with binary units. ``t_dma`` is one die's sense-latch to
controller transfer, ``t_ext`` one controller-to-host wave (all channels
x one die row). Everything here is a pure calculation, freely callable
from concurrent workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .engine import OpCode, OpKind

GIB = 2**30
KIB = 1024

# Sensing phases per opcode (direct constructions; inverse-read variants
# inherit their base op's count).
OP_PHASES = {
    OpKind.AND: 1,
    OpKind.OR: 2,
    OpKind.NOT: 2,
    OpKind.NAND: 2,
    OpKind.XNOR: 4,
    OpKind.NOR: 4,
    OpKind.XOR: 4,
}


class Paradigm(enum.Enum):
    OSC = "OSC"
    ISC = "ISC"
    IFC_ALIGNED = "IFC_ALIGNED"
    IFC_NONALIGNED = "IFC_NONALIGNED"
    PARABIT = "PARABIT"
    FLASHCOSMOS = "FLASHCOSMOS"


@dataclass(frozen=True)
class SsdConfig:
    channels: int = 16
    dies_per_channel: int = 8
    planes_per_die: int = 4
    page_kib: int = 16
    channel_bw_Bps: float = 1.2 * GIB
    host_bw_Bps: float = 8.0 * GIB
    t_R_us: float = 60.0
    t_prog_us: float = 600.0
    t_setfeature_us: float = 10.0
    phase_overhead_us: float = 10.0
    phase_time_us: float = 30.0

    def __post_init__(self):
        for name in ("channels", "dies_per_channel", "planes_per_die", "page_kib"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("channel_bw_Bps", "host_bw_Bps", "t_R_us", "t_prog_us"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def total_planes(self) -> int:
        return self.channels * self.dies_per_channel * self.planes_per_die

    @property
    def page_bytes(self) -> int:
        return self.page_kib * KIB

    @classmethod
    def from_config(cls, cfg: dict) -> "SsdConfig":
        s = cfg["ssd"]
        return cls(
            channels=int(s["channels"]),
            dies_per_channel=int(s["dies_per_channel"]),
            planes_per_die=int(s["planes_per_die"]),
            page_kib=int(s["page_kib"]),
            channel_bw_Bps=float(s["channel_bw_gib_s"]) * GIB,
            host_bw_Bps=float(s["host_bw_gib_s"]) * GIB,
            t_R_us=float(s["t_r_us"]),
            t_prog_us=float(s["t_prog_us"]),
            t_setfeature_us=float(s["t_setfeature_us"]),
            phase_overhead_us=float(s["phase_overhead_us"]),
            phase_time_us=float(s["phase_time_us"]),
        )


@dataclass(frozen=True)
class EnergyModel:
    """Per page read: precharge + phases * sense + discharge (uJ)."""

    e_precharge_uj: float = 50.0
    e_sense_per_phase_uj: float = 17.0
    e_discharge_uj: float = 33.0
    e_prog_uj: float = 1200.0

    @classmethod
    def from_config(cls, cfg: dict) -> "EnergyModel":
        e = cfg["ssd"]["energy"]
        return cls(
            e_precharge_uj=float(e["precharge_uj"]),
            e_sense_per_phase_uj=float(e["sense_per_phase_uj"]),
            e_discharge_uj=float(e["discharge_uj"]),
            e_prog_uj=float(e["program_uj"]),
        )


@dataclass(frozen=True)
class BaselineParams:
    """Calibrated constants for the analytic PARABIT/FLASHCOSMOS stand-ins."""

    parabit_and_us: float
    parabit_or_us: float
    parabit_xor_us: float
    parabit_dram_realloc_us: float
    parabit_latch_chain: bool
    fc_mws_sensing_us: float
    fc_esp_program_us: float
    fc_xor_us: float
    fc_max_operands: int

    @classmethod
    def from_config(cls, cfg: dict) -> "BaselineParams":
        pb = cfg["baselines"]["parabit"]
        fc = cfg["baselines"]["flashcosmos"]
        return cls(
            parabit_and_us=float(pb["and_us"]),
            parabit_or_us=float(pb["or_us"]),
            parabit_xor_us=float(pb["xor_us"]),
            parabit_dram_realloc_us=float(pb["dram_realloc_us"]),
            parabit_latch_chain=bool(pb["latch_chain_accumulate"]),
            fc_mws_sensing_us=float(fc["mws_sensing_us"]),
            fc_esp_program_us=float(fc["esp_program_us"]),
            fc_xor_us=float(fc["xor_us"]),
            fc_max_operands=int(fc["max_operands"]),
        )

    def parabit_op_us(self, kind: OpKind) -> float:
        if kind in (OpKind.AND, OpKind.NAND):
            return self.parabit_and_us
        if kind in (OpKind.OR, OpKind.NOR, OpKind.NOT):
            return self.parabit_or_us
        return self.parabit_xor_us

    def fc_op_us(self, kind: OpKind) -> float:
        if kind in (OpKind.XOR, OpKind.XNOR):
            return self.fc_xor_us
        return self.fc_mws_sensing_us


@dataclass
class Timeline:
    paradigm: Paradigm
    total_us: float
    breakdown: list[tuple[str, float]] = field(default_factory=list)
    calibrated: bool = False

    @staticmethod
    def build(paradigm: Paradigm, phases: list[tuple[str, float]], calibrated: bool = False) -> "Timeline":
        return Timeline(paradigm, sum(t for _, t in phases), list(phases), calibrated)


def transfer_times(cfg: SsdConfig) -> tuple[float, float]:
    """(t_dma, t_ext) in microseconds.

    t_dma: one die's planes to the controller over the channel.
    t_ext: one die row (all channels) from controller to host.
    """
    t_dma = cfg.planes_per_die * cfg.page_bytes / cfg.channel_bw_Bps * 1e6
    t_ext = cfg.channels * cfg.planes_per_die * cfg.page_bytes / cfg.host_bw_Bps * 1e6
    return t_dma, t_ext


def read_latency(
    op: OpCode | OpKind,
    phase_model: tuple[float, float] = (10.0, 30.0),
    switching: bool = False,
    t_setfeature_us: float = 10.0,
) -> float:
    """Per-read latency from the sensing-phase model.

    t = overhead + phases(op) * phase_time, plus the feature-register
    update when the opcode just switched. The defaults put a 1-phase
    read at 40 us and a 2-phase read at 70 us.
    """
    kind = op.kind if isinstance(op, OpCode) else op
    overhead, per_phase = phase_model
    t = overhead + OP_PHASES[kind] * per_phase
    if switching:
        t += t_setfeature_us
    return t


def op_read_us(cfg: SsdConfig, op: OpCode | OpKind | None) -> float:
    """Array-read term for a timeline: the generic page read when no op
    is given (the reference scenario), else the op's phase-model time."""
    if op is None:
        return cfg.t_R_us
    return read_latency(op, (cfg.phase_overhead_us, cfg.phase_time_us))


def timeline(paradigm: Paradigm | str, cfg: SsdConfig, op: OpCode | OpKind | None = None) -> Timeline:
    """Single-channel execution timeline for one bulk op over two 8 MiB
    operands, one page per plane.

    Waves = dies per channel: results stream die by die, transfers
    pipelined behind the array read.
    """
    if isinstance(paradigm, str):
        try:
            paradigm = Paradigm[paradigm.upper()]
        except KeyError:
            raise ValueError(f"unknown paradigm {paradigm!r}") from None
    t_dma, t_ext = transfer_times(cfg)
    waves = cfg.dies_per_channel
    t_r = op_read_us(cfg, op)
    if paradigm is Paradigm.OSC:
        phases = [("array_read", cfg.t_R_us), ("dma", t_dma), ("host_transfer", 2 * waves * t_ext)]
    elif paradigm is Paradigm.ISC:
        phases = [("array_read", cfg.t_R_us), ("dma", (waves + 1) * t_dma), ("host_transfer", waves * t_ext)]
    elif paradigm is Paradigm.IFC_ALIGNED:
        phases = [("compute_read", t_r), ("dma", t_dma), ("host_transfer", waves * t_ext)]
    elif paradigm is Paradigm.IFC_NONALIGNED:
        phases = [
            ("align_reads", 2 * t_r),
            ("align_program", cfg.t_prog_us),
            ("compute_read", t_r),
            ("dma", t_dma),
            ("host_transfer", waves * t_ext),
        ]
    else:
        raise ValueError(f"{paradigm.value} requires baseline_timeline() with calibrated params")
    return Timeline.build(paradigm, phases)


def baseline_timeline(
    paradigm: Paradigm | str,
    cfg: SsdConfig,
    op: OpCode | OpKind,
    params: BaselineParams | None,
    n_operands: int = 2,
    realign: bool = False,
) -> Timeline:
    """Timeline for the calibrated in-flash baselines.

    PARABIT: per-pair latch-orchestrated op; chained results spill to the
    drive DRAM unless latch accumulation applies.
    FLASHCOSMOS: multi-wordline sensing computes up to ``fc_max_operands``
    operands in one sensing cycle.
    """
    if isinstance(paradigm, str):
        paradigm = Paradigm[paradigm.upper()]
    if params is None:
        raise ValueError("baseline timelines need calibrated BaselineParams")
    kind = op.kind if isinstance(op, OpCode) else op
    t_dma, t_ext = transfer_times(cfg)
    waves = cfg.dies_per_channel
    ship = [("dma", t_dma), ("host_transfer", waves * t_ext)]
    if paradigm is Paradigm.PARABIT:
        phases = [("latch_ops", (n_operands - 1) * params.parabit_op_us(kind))]
        if realign and not params.parabit_latch_chain:
            phases.append(("dram_realloc", params.parabit_dram_realloc_us))
        phases += ship
    elif paradigm is Paradigm.FLASHCOSMOS:
        if n_operands > params.fc_max_operands:
            raise ValueError(f"FLASHCOSMOS supports at most {params.fc_max_operands} operands")
        phases = [("mws_sensing", params.fc_op_us(kind))]
        if realign:
            phases.append(("esp_program", params.fc_esp_program_us))
        phases += ship
    else:
        raise ValueError(f"use timeline() for {paradigm.value}")
    return Timeline.build(paradigm, phases, calibrated=True)


def read_energy_uj(op: OpCode | OpKind, em: EnergyModel) -> float:
    kind = op.kind if isinstance(op, OpCode) else op
    return em.e_precharge_uj + OP_PHASES[kind] * em.e_sense_per_phase_uj + em.e_discharge_uj


def energy_per_kb(op: OpCode | OpKind, em: EnergyModel, page_kib: int = 16, aligned: bool = True,
                  generic_read_phases: int = 2) -> float:
    """Energy per kB of result for one op (uJ/kB).

    The non-aligned path adds two operand reads and the page program,
    with the program dominating the increment.
    """
    kind = op.kind if isinstance(op, OpCode) else op
    e = read_energy_uj(kind, em)
    if not aligned:
        e_generic = em.e_precharge_uj + generic_read_phases * em.e_sense_per_phase_uj + em.e_discharge_uj
        e += 2 * e_generic + em.e_prog_uj
    return e / page_kib


__all__ = [
    "BaselineParams",
    "EnergyModel",
    "GIB",
    "KIB",
    "OP_PHASES",
    "Paradigm",
    "SsdConfig",
    "Timeline",
    "baseline_timeline",
    "energy_per_kb",
    "op_read_us",
    "read_energy_uj",
    "read_latency",
    "timeline",
    "transfer_times",
]
