# ablate.py
"""Ablation matrix: run modes, BA window strategies and the RD loss switch on one simulated sequence."""
from dataclasses import dataclass, field
import itertools
import os
from typing import Dict, List, Optional, Tuple

from Config import Value, build_settings
from evaluation import MetricsRow, ape, format_table, write_metrics_csv
import logger
from pipeline import RUN_MODES, run_sequence
from simulate import make_scenario, synthesize

log = logger.get_logger()

WINDOWS = ["radius:1", "radius:5", "radius:10", "sliding:2", "sliding:5", "sliding:10", "sliding:inf"]
ABLATION_FILE = "ablation.csv"


@dataclass
class Ablation_Mode:
    name: str
    mode: str = "full"
    overrides: Dict[str, Value] = field(default_factory=dict)

    def key(self) -> Tuple[str, Tuple[Tuple[str, str], ...]]:
        return self.mode, tuple(sorted((k, str(v)) for k, v in self.overrides.items()))


ablation_mode_list = (
    [Ablation_Mode(name=mode, mode=mode) for mode in RUN_MODES]
    + [Ablation_Mode(name=f"full/{window}", overrides={"BA_WINDOW": window}) for window in WINDOWS]
    + [Ablation_Mode(name="full/rd-off", overrides={"USE_RD_LOSS": False})]
)


def full_matrix() -> List[Ablation_Mode]:
    modes = []
    for mode, window, use_rd in itertools.product(RUN_MODES, WINDOWS, (True, False)):
        name = f"{mode}/{window}/{'rd-on' if use_rd else 'rd-off'}"
        modes.append(Ablation_Mode(name=name, mode=mode, overrides={"BA_WINDOW": window, "USE_RD_LOSS": use_rd}))
    return modes


def run_ablation(flat: Dict[str, Value], out_dir: str, modes: Optional[List[Ablation_Mode]] = None,
                 use_pipeline: bool = True) -> List[MetricsRow]:
    """Simulate the configured scenario once, run every mode (default: the full matrix) on the same frames
    and write ablation.csv."""
    modes = modes if modes is not None else full_matrix()
    base = build_settings(flat)
    scenario = make_scenario(base)
    frames = synthesize(scenario)
    scenario_name = f"{base.sim.kind}-seed{base.sim.seed}"

    rows: List[MetricsRow] = []
    finished: Dict[Tuple[str, Tuple[Tuple[str, str], ...]], MetricsRow] = {}
    for ablation in modes:
        cached = finished.get(ablation.key())
        if cached is not None:
            rows.append(MetricsRow(scenario_name, ablation.name, cached.result))
            continue
        log.info(f"Ablation run '{ablation.name}'")
        settings = build_settings({**flat, **ablation.overrides})
        session = run_sequence(frames, settings, ablation.mode, use_pipeline)
        row = MetricsRow(scenario_name, ablation.name, ape(session.trajectory(), scenario.gt_trajectory))
        finished[ablation.key()] = row
        rows.append(row)
        log.info(f"Ablation run '{ablation.name}': APE {row.result.trans_rmse:.4f} m / {row.result.rot_rmse:.4f} deg",
                 extra={"mode": ablation.name, "trans_rmse": row.result.trans_rmse, "rot_rmse": row.result.rot_rmse})

    os.makedirs(out_dir, exist_ok=True)
    write_metrics_csv(rows, os.path.join(out_dir, ABLATION_FILE))
    print(format_table(rows))
    return rows
