"""Application case studies: image segmentation, image encryption, and
bitmap-index queries.

Each workload is a stream of page-granular two-operand bit ops. Timing
projects the stream onto five paradigms with a streaming (throughput)
cost model built from the SSD model's primitives; one plane-batch is
8 MiB per operand, one page per plane across the drive:

    OSC   every distinct operand plane crosses the host link once, at
          the link's effective (protocol-derated) bandwidth
    ISC   operand planes cross into the controller's DRAM at its ingest
          bandwidth (defaults to the host link's nominal rate)
    IFC   in-array compute: one multi-plane sensing per op; copyback
          keeps the channel free of data traffic. Short chains that
          must realign an intermediate at runtime pay a residual
          program share (t_prog / planes per die); long uniform chains
          absorb staging into idle die slots.
    PARABIT / FLASHCOSMOS
          calibrated analytic baselines (see ssd_model.BaselineParams);
          outputs are labeled calibrated, not derived.

Functional correctness is checked by running a sampled subset of each
workload's op stream on the behavioral simulator against a host oracle
with identical code paths; scale only multiplies counts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import BitwiseEngine, OpCode, OpKind
from .nand_device import NandDevice
from .ssd_model import GIB, BaselineParams, SsdConfig, read_latency, transfer_times

SEGMENTATION = "SEGMENTATION"
ENCRYPTION = "ENCRYPTION"
BITMAP = "BITMAP"

PARADIGMS = ("OSC", "ISC", "IFC", "PARABIT", "FLASHCOSMOS")


@dataclass(frozen=True)
class WorkloadSpec:
    kind: str  # SEGMENTATION | ENCRYPTION | BITMAP
    scale: int  # images, images, or months

    def __post_init__(self):
        if self.kind not in (SEGMENTATION, ENCRYPTION, BITMAP):
            raise ValueError(f"unknown workload kind {self.kind!r}")
        if self.scale < 1:
            raise ValueError("scale must be >= 1")


@dataclass
class WorkloadResult:
    kind: str
    scale: int
    total_us: dict[str, float]
    speedups: dict[str, float]
    functional_checked: bool
    mismatches: int

    @staticmethod
    def build(kind: str, scale: int, total_us: dict[str, float],
              functional_checked: bool, mismatches: int) -> "WorkloadResult":
        ifc = total_us["IFC"]
        speedups = {p: total_us[p] / ifc for p in total_us if p != "IFC"}
        return WorkloadResult(kind, scale, total_us, speedups, functional_checked, mismatches)


class _CostModel:
    """Streaming per-plane-batch costs shared by the three workloads."""

    def __init__(self, cfg: dict):
        self.ssd = SsdConfig.from_config(cfg)
        self.baselines = BaselineParams.from_config(cfg)
        w = cfg["workloads"]
        self.wcfg = w
        t_dma, t_ext = transfer_times(self.ssd)
        waves = self.ssd.dies_per_channel
        ship = waves * t_ext  # one 8 MiB plane-batch over the nominal host link
        self.ship_osc = ship / float(w["host_link_efficiency"])
        ingest = float(w["controller_ingest_gib_s"]) * GIB
        self.ship_isc = ship * (self.ssd.host_bw_Bps / ingest)
        self.batch_bits = self.ssd.total_planes * self.ssd.page_bytes * 8
        self.pop_bw_Bps = float(w["host_popcount_gib_s"]) * GIB
        # residual program share for an intermediate realigned at runtime
        self.staging_residual = self.ssd.t_prog_us / self.ssd.planes_per_die

    def op_us(self, kind: OpKind) -> float:
        return read_latency(kind, (self.ssd.phase_overhead_us, self.ssd.phase_time_us))

    def popcount_us(self, bits: float) -> float:
        return bits / 8.0 / self.pop_bw_Bps * 1e6


def _check_range(scale: int, lo: int, hi: int, what: str) -> None:
    if not (lo <= scale <= hi):
        raise ValueError(f"{what} scale {scale} outside evaluated range [{lo}, {hi}]")


# ---------------------------------------------------------------------------
# Segmentation: per pixel, one of four color classes via chained ANDs of
# per-channel class masks: result_k = C1_k AND C2_k AND C3_k.

def run_segmentation(spec: WorkloadSpec, cfg: dict, rng: np.random.Generator | None = None,
                     functional: bool = True, check_wordlines: int = 8) -> WorkloadResult:
    if spec.kind != SEGMENTATION:
        raise ValueError("spec.kind must be SEGMENTATION")
    m = _CostModel(cfg)
    s = m.wcfg["segmentation"]
    _check_range(spec.scale, int(s["min_images"]), int(s["max_images"]), "segmentation")
    classes = int(s["classes"])
    bits_per_plane = spec.scale * int(s["image_width"]) * int(s["image_height"])
    units = classes * bits_per_plane / m.batch_bits  # class-units of 3 operand planes

    t_and = m.op_us(OpKind.AND)
    # pass 1 on pre-aligned mask pairs; pass 2 realigns the intermediate
    ifc_unit = t_and + (t_and + m.staging_residual)
    pb = m.baselines
    total = {
        "OSC": units * 3 * m.ship_osc,
        "ISC": units * 3 * m.ship_isc,
        "IFC": units * ifc_unit,
        "PARABIT": units * (2 * pb.parabit_and_us + pb.parabit_dram_realloc_us),
        "FLASHCOSMOS": units * pb.fc_mws_sensing_us,  # one 3-operand sensing
    }
    mismatches, checked = 0, False
    if functional:
        mismatches = _check_segmentation(cfg, rng, check_wordlines, classes)
        checked = True
    return WorkloadResult.build(SEGMENTATION, spec.scale, total, checked, mismatches)


def _check_segmentation(cfg: dict, rng: np.random.Generator | None, wordlines: int, classes: int) -> int:
    rng = rng or np.random.default_rng(0)
    device = NandDevice.from_config(cfg, rng=rng)
    engine = BitwiseEngine(device)
    n = device.geometry.cells_per_wordline
    op = OpCode(OpKind.AND)
    bad = 0
    wl = 0
    for _ in range(wordlines):
        # synthetic per-pixel channel values, quantized into class bands
        y, u, v = (rng.integers(0, 256, n, dtype=np.uint8) for _ in range(3))
        k = int(rng.integers(0, classes))
        c1, c2, c3 = ((ch >> 6) == k for ch in (y, u, v))
        engine.write_operands(0, wl, c1, c2)
        r1, _, _ = engine.execute(0, wl, op)
        engine.write_operands(1, wl, r1, c3)
        r2, _, _ = engine.execute(1, wl, op)
        bad += int((r2 != (c1 & c2 & c3)).sum())
        wl += 1
    return bad


# ---------------------------------------------------------------------------
# Encryption: cipher = image XOR key, one op per page pair, cipher kept
# in the drive (programs ride the copyback path behind the sensing
# stream, so the in-array cost is the 4-phase read).

def run_encryption(spec: WorkloadSpec, cfg: dict, rng: np.random.Generator | None = None,
                   functional: bool = True, check_wordlines: int = 8) -> WorkloadResult:
    if spec.kind != ENCRYPTION:
        raise ValueError("spec.kind must be ENCRYPTION")
    m = _CostModel(cfg)
    e = m.wcfg["encryption"]
    _check_range(spec.scale, int(e["min_images"]), int(e["max_images"]), "encryption")
    bits = spec.scale * int(e["image_width"]) * int(e["image_height"]) * int(e["bytes_per_pixel"]) * 8
    batches = bits / m.batch_bits

    pbp = m.baselines
    total = {
        "OSC": batches * 2 * m.ship_osc,
        "ISC": batches * 2 * m.ship_isc,
        "IFC": batches * m.op_us(OpKind.XOR),
        "PARABIT": batches * pbp.parabit_xor_us,
        "FLASHCOSMOS": batches * pbp.fc_xor_us,
    }
    mismatches, checked = 0, False
    if functional:
        mismatches = _check_encryption(cfg, rng, check_wordlines)
        checked = True
    return WorkloadResult.build(ENCRYPTION, spec.scale, total, checked, mismatches)


def _check_encryption(cfg: dict, rng: np.random.Generator | None, wordlines: int) -> int:
    rng = rng or np.random.default_rng(0)
    device = NandDevice.from_config(cfg, rng=rng)
    engine = BitwiseEngine(device)
    n = device.geometry.cells_per_wordline
    xor = OpCode(OpKind.XOR)  # inverse-read XNOR path
    bad = 0
    for wl in range(wordlines):
        image = rng.integers(0, 2, n, dtype=np.uint8).astype(bool)
        key = rng.integers(0, 2, n, dtype=np.uint8).astype(bool)
        engine.write_operands(0, wl, image, key)
        cipher, _, _ = engine.execute(0, wl, xor)
        bad += int((cipher != (image ^ key)).sum())
        # decrypt roundtrip: cipher XOR key restores the image
        engine.write_operands(1, wl, cipher, key)
        plain, _, _ = engine.execute(1, wl, xor)
        bad += int((plain != image).sum())
    return bad


# ---------------------------------------------------------------------------
# Bitmap index: users active every day over m months; a chain of ANDs
# over daily activity vectors, final popcount on the host.

def run_bitmap_index(spec: WorkloadSpec, cfg: dict, rng: np.random.Generator | None = None,
                     functional: bool = True, check_wordlines: int = 4) -> WorkloadResult:
    if spec.kind != BITMAP:
        raise ValueError("spec.kind must be BITMAP")
    m = _CostModel(cfg)
    b = m.wcfg["bitmap"]
    _check_range(spec.scale, int(b["min_months"]), int(b["max_months"]), "bitmap")
    days = spec.scale * int(b["days_per_month"])
    user_bits = int(b["users"])
    batches = user_bits / m.batch_bits  # per day vector
    chain_ops = max(days - 1, 1)  # a 1-day query degenerates to a single read
    pop = m.popcount_us(user_bits)

    t_and = m.op_us(OpKind.AND)
    pbp = m.baselines
    # deep uniform chains: tournament stagings ride idle die slots, so the
    # in-array stream is sensing-limited
    ifc = chain_ops * batches * t_and + pop
    pb_ops = chain_ops * batches * pbp.parabit_and_us
    if not pbp.parabit_latch_chain:
        pb_ops += (days // 2) * batches * pbp.parabit_dram_realloc_us
    fc_groups = chain_ops / (pbp.fc_max_operands - 1)  # 16-ary reduction tree
    total = {
        "OSC": days * batches * m.ship_osc + pop,
        "ISC": days * batches * m.ship_isc + pop,
        "IFC": ifc,
        "PARABIT": pb_ops + pop,
        "FLASHCOSMOS": fc_groups * batches * (pbp.fc_mws_sensing_us + pbp.fc_esp_program_us) + pop,
    }
    mismatches, checked = 0, False
    if functional:
        mismatches = _check_bitmap(cfg, rng, check_wordlines, min(days, 8))
        checked = True
    return WorkloadResult.build(BITMAP, spec.scale, total, checked, mismatches)


def _check_bitmap(cfg: dict, rng: np.random.Generator | None, wordlines: int, days: int) -> int:
    """Run the AND chain on sampled slices; every intermediate result is
    rewritten as an operand of the next op, which is the only way to
    compose ops in-array."""
    rng = rng or np.random.default_rng(0)
    device = NandDevice.from_config(cfg, rng=rng)
    engine = BitwiseEngine(device)
    n = device.geometry.cells_per_wordline
    op = OpCode(OpKind.AND)
    bad = 0
    for wl in range(wordlines):
        vectors = [rng.integers(0, 2, n, dtype=np.uint8).astype(bool) for _ in range(days)]
        if days == 1:
            device.program_wordline(0, wl, vectors[0], np.ones(n, dtype=bool))
            got = device.read_page(0, wl, "LSB", device.default_feature())
        else:
            acc = vectors[0]
            blk = 1
            for nxt in vectors[1:]:
                engine.write_operands(blk, wl, acc, nxt)
                acc, _, _ = engine.execute(blk, wl, op)
                blk = (blk + 1) % device.geometry.blocks or 1
            got = acc
        want = vectors[0].copy()
        for nxt in vectors[1:]:
            want &= nxt
        bad += int((got != want).sum())
        device.erase_block(0)
    return bad


def run_workload(spec: WorkloadSpec, cfg: dict, **kwargs) -> WorkloadResult:
    runner = {
        SEGMENTATION: run_segmentation,
        ENCRYPTION: run_encryption,
        BITMAP: run_bitmap_index,
    }[spec.kind]
    return runner(spec, cfg, **kwargs)


def default_scales(kind: str, cfg: dict) -> list[int]:
    w = cfg["workloads"]
    if kind == SEGMENTATION:
        lo, hi = int(w["segmentation"]["min_images"]), int(w["segmentation"]["max_images"])
        return [lo, 50000, 100000, 150000, hi]
    if kind == ENCRYPTION:
        lo, hi = int(w["encryption"]["min_images"]), int(w["encryption"]["max_images"])
        return [lo, 25000, 50000, 75000, hi]
    if kind == BITMAP:
        return list(range(int(w["bitmap"]["min_months"]), int(w["bitmap"]["max_months"]) + 1))
    raise ValueError(f"unknown workload kind {kind!r}")


def average_speedups(results: list[WorkloadResult]) -> dict[str, float]:
    """Arithmetic mean of per-point speedups across a scale sweep."""
    keys = results[0].speedups.keys()
    return {k: float(np.mean([r.speedups[k] for r in results])) for k in keys}


# ---------------------------------------------------------------------------
# Minimal PGM/PPM import so the demos can run on real images; synthetic
# data is the default everywhere.

def read_pnm(path: str) -> np.ndarray:
    """Read a P2/P3 (ascii) or P5/P6 (binary) image file.

    Returns (H, W) for grayscale or (H, W, 3) for color, dtype uint8.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic = tokens[0].decode()
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval > 255:
        raise ValueError("only 8-bit images supported")
    channels = 3 if magic in ("P3", "P6") else 1
    count = width * height * channels
    if magic in ("P5", "P6"):
        raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos + 1)
    elif magic in ("P2", "P3"):
        raw = np.array(data[pos:].split()[:count], dtype=np.uint8)
    else:
        raise ValueError(f"unsupported format {magic!r}")
    img = raw.reshape((height, width, channels))
    return img[:, :, 0] if channels == 1 else img


__all__ = [
    "BITMAP",
    "ENCRYPTION",
    "PARADIGMS",
    "SEGMENTATION",
    "WorkloadResult",
    "WorkloadSpec",
    "average_speedups",
    "default_scales",
    "read_pnm",
    "run_bitmap_index",
    "run_encryption",
    "run_segmentation",
    "run_workload",
]
