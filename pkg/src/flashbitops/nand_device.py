"""Behavioral raw-NAND chip model.

Blocks of wordlines, each wordline carrying a paired LSB/MSB logical
page over one set of physical cells. The command surface mirrors what a
raw chip offers a storage controller: program, erase, read with signed
read-reference offsets, soft-bit read, inverse read, copyback, and
set/get feature for the offset registers.

Reads are non-destructive and noise-free given the sampled threshold
voltages: error behavior comes entirely from population overlap, not
from sensing noise (a hook for a sensing-noise term would slot into
``_read_bits``). A device instance is a single-owner mutable state
machine; run concurrent experiments on separate instances with separate
seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .cell_physics import (
    CellParams,
    WearState,
    levels_from_pages,
    retention_shift_delta,
    sample_vth_for_levels,
)

PageKind = Literal["LSB", "MSB"]

# Sensing phases per read type; the timing model keys off these.
PHASES_LSB = 1
PHASES_MSB = 2
PHASES_SBR = 4


class AddressError(IndexError):
    """Block or wordline address out of range."""


class ProgramStateError(RuntimeError):
    """Program issued to a wordline that is not erased."""


class OffsetRangeError(ValueError):
    """Offset not representable / outside the allowed window with clamping off."""


@dataclass(frozen=True)
class DeviceGeometry:
    blocks: int = 32
    wordlines_per_block: int = 64
    page_size_bytes: int = 16384

    def __post_init__(self):
        if self.blocks < 1 or self.wordlines_per_block < 1 or self.page_size_bytes < 1:
            raise ValueError("all geometry counts must be >= 1")
        if self.page_size_bytes & (self.page_size_bytes - 1):
            raise ValueError("page size must be a power of two")

    @property
    def cells_per_wordline(self) -> int:
        return self.page_size_bytes * 8

    @classmethod
    def from_config(cls, cfg: dict) -> "DeviceGeometry":
        d = cfg["device"]
        return cls(
            blocks=int(d["blocks"]),
            wordlines_per_block=int(d["wordlines_per_block"]),
            page_size_bytes=int(d["page_size_bytes"]),
        )


@dataclass(frozen=True)
class ReadRefConfig:
    """Signed DAC-step offsets for the three read references.

    The effective reference is default + offset * dac_step. Offsets must
    be representable in ``register_width_bits`` signed bits; whether the
    resulting reference is reachable is a separate, device-level window
    check (see ``NandDevice.set_feature``).
    """

    offset_vref0: int = 0
    offset_vref1: int = 0
    offset_vref2: int = 0
    dac_step_v: float = 0.03
    register_width_bits: int = 8

    def __post_init__(self):
        bound = self.register_bound
        for name in ("offset_vref0", "offset_vref1", "offset_vref2"):
            off = getattr(self, name)
            if not isinstance(off, (int, np.integer)):
                raise OffsetRangeError(f"{name} must be an integer DAC-step count")
            if not (-bound <= off <= bound):
                raise OffsetRangeError(
                    f"{name}={off} not representable in {self.register_width_bits}-bit signed register"
                )

    @property
    def register_bound(self) -> int:
        return 2 ** (self.register_width_bits - 1) - 1

    def shifted_refs(self, defaults: tuple[float, float, float]) -> tuple[float, float, float]:
        return (
            defaults[0] + self.offset_vref0 * self.dac_step_v,
            defaults[1] + self.offset_vref1 * self.dac_step_v,
            defaults[2] + self.offset_vref2 * self.dac_step_v,
        )


@dataclass
class BlockMeta:
    wear: WearState = field(default_factory=WearState)
    erase_count: int = 0
    programmed_since_erase: bool = False


@dataclass
class WordlineImage:
    """One wordline: per-cell levels, sampled analog vth, bookkeeping."""

    levels: np.ndarray  # uint8, cells long
    vth: np.ndarray  # float64, cells long
    programmed: bool
    data_age_hours: float = 0.0


@dataclass
class DeviceCounters:
    reads: int = 0
    programs: int = 0
    erases: int = 0
    set_features: int = 0
    sensing_phases: int = 0
    copyback_reads: int = 0


class NandDevice:
    """A single MLC NAND plane with user-mode command access."""

    def __init__(
        self,
        geometry: DeviceGeometry,
        cell_params: CellParams,
        ref_defaults: tuple[float, float, float],
        rng: np.random.Generator | int | None = None,
        ref_window_v: tuple[float, float] = (-2.0, 4.5),
        clamp_policy: str = "clamp",
        dac_step_v: float = 0.03,
        register_width_bits: int = 8,
    ):
        if clamp_policy not in ("clamp", "error"):
            raise ValueError("clamp_policy must be 'clamp' or 'error'")
        self.geometry = geometry
        self.cell_params = cell_params
        self.ref_defaults = tuple(float(v) for v in ref_defaults)
        self.ref_window_v = (float(ref_window_v[0]), float(ref_window_v[1]))
        self.clamp_policy = clamp_policy
        self.dac_step_v = float(dac_step_v)
        self.register_width_bits = int(register_width_bits)
        if isinstance(rng, np.random.Generator):
            self.rng = rng
        else:
            self.rng = np.random.default_rng(rng)
        self.blocks = [BlockMeta() for _ in range(geometry.blocks)]
        self._wordlines: dict[tuple[int, int], WordlineImage] = {}
        self._copyback_stage: dict[tuple[int, int], dict[str, np.ndarray]] = {}
        self._feature = self.default_feature()
        self.counters = DeviceCounters()

    @classmethod
    def from_config(cls, cfg: dict, rng: np.random.Generator | int | None = None) -> "NandDevice":
        refs = cfg["references"]
        return cls(
            geometry=DeviceGeometry.from_config(cfg),
            cell_params=CellParams.from_config(cfg),
            ref_defaults=(refs["vref0_v"], refs["vref1_v"], refs["vref2_v"]),
            rng=rng,
            ref_window_v=tuple(refs["ref_window_v"]),
            clamp_policy=refs["clamp_policy"],
            dac_step_v=float(refs["dac_step_v"]),
            register_width_bits=int(refs["register_width_bits"]),
        )

    def default_feature(self) -> ReadRefConfig:
        return ReadRefConfig(
            0, 0, 0, dac_step_v=self.dac_step_v, register_width_bits=self.register_width_bits
        )

    # -- address helpers ---------------------------------------------------

    def _check_addr(self, block: int, wordline: int | None = None) -> None:
        if not (0 <= block < self.geometry.blocks):
            raise AddressError(f"block {block} out of range")
        if wordline is not None and not (0 <= wordline < self.geometry.wordlines_per_block):
            raise AddressError(f"wordline {wordline} out of range")

    def _wordline(self, block: int, wordline: int) -> WordlineImage:
        """Materialize a wordline, sampling erased-state vth on first touch."""
        key = (block, wordline)
        wl = self._wordlines.get(key)
        if wl is None:
            n = self.geometry.cells_per_wordline
            levels = np.zeros(n, dtype=np.uint8)
            vth = sample_vth_for_levels(levels, self.blocks[block].wear, self.cell_params, self.rng)
            wl = WordlineImage(levels=levels, vth=vth, programmed=False)
            self._wordlines[key] = wl
        return wl

    # -- erase / program ----------------------------------------------------

    def erase_block(self, block: int) -> None:
        """Reset every wordline to the erased level.

        A completed program->erase round advances the block's P/E count;
        erasing an already-erased block is a content no-op and does not
        age the block.
        """
        self._check_addr(block)
        meta = self.blocks[block]
        if meta.programmed_since_erase:
            meta.wear = replace(meta.wear, pe_cycles=meta.wear.pe_cycles + 1)
            meta.erase_count += 1
            meta.programmed_since_erase = False
        for wl in range(self.geometry.wordlines_per_block):
            self._wordlines.pop((block, wl), None)
            self._copyback_stage.pop((block, wl), None)
        self.counters.erases += 1

    def program_wordline(self, block: int, wordline: int, lsb_page: np.ndarray, msb_page: np.ndarray) -> None:
        """Jointly program both logical pages of a wordline.

        The two pages must be written together because the cell level is
        a joint function of both bits.
        """
        self._check_addr(block, wordline)
        lsb = np.asarray(lsb_page).astype(np.uint8)
        msb = np.asarray(msb_page).astype(np.uint8)
        n = self.geometry.cells_per_wordline
        if lsb.shape != (n,) or msb.shape != (n,):
            raise ValueError(f"page length must be {n} bits")
        existing = self._wordlines.get((block, wordline))
        if existing is not None and existing.programmed:
            raise ProgramStateError(f"wordline ({block},{wordline}) already programmed; erase first")
        meta = self.blocks[block]
        levels = levels_from_pages(lsb, msb)
        program_wear = WearState(meta.wear.pe_cycles, 0.0)  # fresh data has no retention age
        vth = sample_vth_for_levels(levels, program_wear, self.cell_params, self.rng)
        self._wordlines[(block, wordline)] = WordlineImage(levels=levels, vth=vth, programmed=True)
        meta.programmed_since_erase = True
        self.counters.programs += 1

    # -- reads ---------------------------------------------------------------

    def _effective_refs(self, cfg: ReadRefConfig) -> tuple[float, float, float]:
        refs = cfg.shifted_refs(self.ref_defaults)
        lo, hi = self.ref_window_v
        return tuple(min(max(v, lo), hi) for v in refs)

    def read_page(self, block: int, wordline: int, kind: PageKind, cfg: ReadRefConfig | None = None) -> np.ndarray:
        """Sense one logical page; returns a bool bitvector.

        LSB decode (one phase):  bit = vth < vref1'.
        MSB decode (two phases): bit = vth < vref0'  or  vth >= vref2'.
        A cell exactly at a reference decodes on the high side.
        """
        self._check_addr(block, wordline)
        cfg = self._feature if cfg is None else cfg
        wl = self._wordline(block, wordline)
        bits = self._read_bits(wl.vth, kind, cfg)
        self.counters.reads += 1
        self.counters.sensing_phases += PHASES_LSB if kind == "LSB" else PHASES_MSB
        return bits

    def _read_bits(self, vth: np.ndarray, kind: PageKind, cfg: ReadRefConfig) -> np.ndarray:
        v0, v1, v2 = self._effective_refs(cfg)
        if kind == "LSB":
            return vth < v1
        if kind == "MSB":
            return (vth < v0) | (vth >= v2)
        raise ValueError(f"unknown page kind {kind!r}")

    def soft_bit_read(
        self, block: int, wordline: int, cfg_plus: ReadRefConfig, cfg_minus: ReadRefConfig
    ) -> np.ndarray:
        """Two MSB senses combined by the chip's internal bitwise XNOR.

        Four sensing phases total. Intended for flagging marginal cells
        between two reference positions, and reusable as a compute
        primitive by choosing the two configs.
        """
        self._check_addr(block, wordline)
        wl = self._wordline(block, wordline)
        minus = self._read_bits(wl.vth, "MSB", cfg_minus)
        plus = self._read_bits(wl.vth, "MSB", cfg_plus)
        self.counters.reads += 1
        self.counters.sensing_phases += PHASES_SBR
        return ~(minus ^ plus)

    def inverse_read(self, block: int, wordline: int, kind: PageKind, cfg: ReadRefConfig | None = None) -> np.ndarray:
        """Bitwise complement of ``read_page`` with the same arguments."""
        self._check_addr(block, wordline)
        cfg = self._feature if cfg is None else cfg
        wl = self._wordline(block, wordline)
        bits = self._read_bits(wl.vth, kind, cfg)
        self.counters.reads += 1
        self.counters.sensing_phases += PHASES_LSB if kind == "LSB" else PHASES_MSB
        return ~bits

    # -- copyback -------------------------------------------------------------

    def copyback(self, src: tuple[int, int, PageKind], dst: tuple[int, int, PageKind]) -> None:
        """Internal read-then-stage move using the die buffer.

        The source page is read at default references into the internal
        buffer and staged for the destination wordline. The destination
        programs once both of its logical pages are staged (or the
        partner is filled via ``fill_copyback_partner``); it must still
        be erased at that point.
        """
        sb, sw, skind = src
        db, dw, dkind = dst
        self._check_addr(sb, sw)
        self._check_addr(db, dw)
        existing = self._wordlines.get((db, dw))
        if existing is not None and existing.programmed:
            raise ProgramStateError(f"copyback destination ({db},{dw}) is not erased")
        bits = self.read_page(sb, sw, skind, self.default_feature())
        self.counters.copyback_reads += 1
        stage = self._copyback_stage.setdefault((db, dw), {})
        stage[dkind] = bits
        self._complete_copyback_if_ready(db, dw)

    def fill_copyback_partner(self, block: int, wordline: int, kind: PageKind, value: bool = False) -> None:
        """Stage a constant pattern as the missing partner page."""
        self._check_addr(block, wordline)
        stage = self._copyback_stage.setdefault((block, wordline), {})
        stage[kind] = np.full(self.geometry.cells_per_wordline, bool(value))
        self._complete_copyback_if_ready(block, wordline)

    def _complete_copyback_if_ready(self, block: int, wordline: int) -> None:
        stage = self._copyback_stage.get((block, wordline))
        if stage and "LSB" in stage and "MSB" in stage:
            self.program_wordline(block, wordline, stage["LSB"], stage["MSB"])
            del self._copyback_stage[(block, wordline)]

    # -- feature register -------------------------------------------------------

    def set_feature(self, cfg: ReadRefConfig) -> bool:
        """Install read-reference offsets; returns True if the effective
        references had to be clamped into the vendor window.

        Offsets that do not fit the signed register are always an error
        (raised by ReadRefConfig itself). References that leave the
        vendor window follow the clamp policy: 'clamp' stores the config
        unchanged and reports degradation, 'error' raises.
        """
        refs = cfg.shifted_refs(self.ref_defaults)
        lo, hi = self.ref_window_v
        clamped = any(v < lo or v > hi for v in refs)
        if clamped and self.clamp_policy == "error":
            raise OffsetRangeError(f"shifted references {refs} leave the window [{lo}, {hi}]")
        self._feature = cfg
        self.counters.set_features += 1
        return clamped

    def get_feature(self) -> ReadRefConfig:
        return self._feature

    # -- wear -----------------------------------------------------------------

    def block_wear(self, block: int) -> WearState:
        self._check_addr(block)
        return self.blocks[block].wear

    def is_programmed(self, block: int, wordline: int) -> bool:
        self._check_addr(block, wordline)
        wl = self._wordlines.get((block, wordline))
        return wl is not None and wl.programmed

    def advance_pe_cycles(self, block: int, n: int) -> None:
        """Account ``n`` program/erase rounds and leave the block erased.

        Behaviorally equivalent to n rounds of (program random, erase):
        afterwards the content is erased and the wear counter has grown
        by exactly n, so the intermediate page payloads are elided.
        """
        self._check_addr(block)
        if n < 0:
            raise ValueError("cycle count must be >= 0")
        meta = self.blocks[block]
        if n == 0:
            return
        if meta.programmed_since_erase:
            # finish the open round first
            n -= 1
            self.erase_block(block)
            if n == 0:
                return
        meta.wear = replace(meta.wear, pe_cycles=meta.wear.pe_cycles + n)
        meta.erase_count += n
        self.erase_block(block)

    def advance_retention(self, block: int, hours: float) -> None:
        """Age programmed data by ``hours``: stored vth samples shift by
        each level's mean displacement, preserving per-cell identity so
        the same marginal cells stay marginal across reads."""
        self._check_addr(block)
        if hours < 0:
            raise ValueError("hours must be >= 0")
        if hours == 0:
            return
        meta = self.blocks[block]
        meta.wear = replace(meta.wear, retention_hours=meta.wear.retention_hours + hours)
        for (b, _w), wl in self._wordlines.items():
            if b != block or not wl.programmed:
                continue
            age = WearState(meta.wear.pe_cycles, wl.data_age_hours)
            deltas = np.array(
                [retention_shift_delta(lvl, age, hours, self.cell_params) for lvl in range(4)]
            )
            wl.vth += deltas[wl.levels]
            wl.data_age_hours += hours

    # -- debug dumps -------------------------------------------------------------

    def dump_page(self, block: int, wordline: int, kind: PageKind, fmt: str = "bin") -> bytes | str:
        """Default-reference page content as raw bytes or hex text."""
        bits = self.read_page(block, wordline, kind, self.default_feature())
        raw = np.packbits(bits.astype(np.uint8)).tobytes()
        if fmt == "bin":
            return raw
        if fmt == "hex":
            return raw.hex()
        raise ValueError("fmt must be 'bin' or 'hex'")


__all__ = [
    "AddressError",
    "BlockMeta",
    "DeviceCounters",
    "DeviceGeometry",
    "NandDevice",
    "OffsetRangeError",
    "PHASES_LSB",
    "PHASES_MSB",
    "PHASES_SBR",
    "PageKind",
    "ProgramStateError",
    "ReadRefConfig",
    "WordlineImage",
]
