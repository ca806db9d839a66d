"""Behavioral MLC NAND simulator with in-place bulk bitwise operations,
a reliability lab, and an analytic SSD timing/energy model."""

__version__ = "0.1.0"

from .cell_physics import (
    CellParams,
    Level,
    StateDistribution,
    WearState,
    distribution_params,
    sample_vth,
    valley_midpoint,
)
from .config import config_hash, default_config, load_config
from .engine import BitwiseEngine, OffsetPlan, OffsetPlanner, OpCode, OpKind, host_op
from .nand_device import DeviceGeometry, NandDevice, ReadRefConfig
from .reliability import (
    ErrorModel,
    RberReport,
    SweepCurve,
    calibrate,
    cycle_block,
    measure_rber,
    retention_bake,
    sweep_offset,
)
from .ssd_model import (
    BaselineParams,
    EnergyModel,
    Paradigm,
    SsdConfig,
    Timeline,
    baseline_timeline,
    energy_per_kb,
    read_latency,
    timeline,
    transfer_times,
)
from .workloads import (
    WorkloadResult,
    WorkloadSpec,
    average_speedups,
    run_bitmap_index,
    run_encryption,
    run_segmentation,
    run_workload,
)
