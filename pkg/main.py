# main.py
import argparse
import csv
import os
import sys
from typing import Dict, List, NoReturn, Optional, Sequence

import numpy as np
import torch

from ablate import ablation_mode_list, run_ablation
from Config import Value, build_settings, load_settings
from data import LossRecord, Pose2, Vel2
from errors import ConfigError, RadarBAError
from evaluation import MetricsRow, ape, format_table, read_tum, write_metrics_csv, write_tum
import logger
from measurements import read_measurements, scenario_config, write_measurements, write_pgm
import metrics
from pipeline import RUN_MODES, run_sequence
from renderer import render_doppler_map, render_ra, render_rd
from scene import load_scene, save_scene
from simulate import make_scenario

log = logger.get_logger()

EXIT_OK = 0
EXIT_USAGE = 1


class CliParser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 1."""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_overrides(items: Optional[Sequence[str]]) -> Dict[str, Value]:
    overrides: Dict[str, Value] = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got '{item}'")
        overrides[key.strip().upper()] = value.strip()
    return overrides


def parse_floats(text: str, count: int, name: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        values = []
    if len(values) != count:
        raise ConfigError(f"{name} expects {count} comma-separated numbers, got '{text}'")
    return values


def write_losses(records: Sequence[LossRecord], path: str) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame_id", "stage", "iteration", "loss"])
        for r in records:
            writer.writerow([r.frame_id, r.stage, r.iteration, repr(r.loss)])


def cmd_simulate(args: argparse.Namespace) -> int:
    flat = load_settings(args.config, parse_overrides(args.set))
    scenario = make_scenario(build_settings(flat))
    write_measurements(scenario, args.out, flat)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    config = args.config if args.config is not None else scenario_config(args.data)
    settings = build_settings(load_settings(config, parse_overrides(args.set)))
    frames = read_measurements(args.data)
    session = run_sequence(frames, settings, args.mode, use_pipeline=not args.no_pipeline)

    os.makedirs(args.out, exist_ok=True)
    write_tum(session.trajectory(), os.path.join(args.out, "trajectory.tum"))
    write_tum(session.frontend_trajectory, os.path.join(args.out, "frontend.tum"))
    save_scene(session.scene, os.path.join(args.out, "scene.txt"))
    write_losses(session.loss_log, os.path.join(args.out, "losses.csv"))
    log.info(f"Run '{args.mode}' finished: {len(frames)} frames, {len(session.keyframes)} keyframes, "
             f"{len(session.scene)} Gaussians; results in {args.out}")
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    result = ape(read_tum(args.est), read_tum(args.gt), args.max_gap)
    rows = [MetricsRow(args.scenario, args.mode, result)]
    print(format_table(rows))
    if result.dropped:
        print(f"({result.dropped} unmatched poses dropped, {result.matched} matched)")
    if args.out:
        write_metrics_csv(rows, args.out)
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    settings = build_settings(load_settings(args.config, parse_overrides(args.set)))
    pose = Pose2(*parse_floats(args.pose, 3, "--pose"))
    velocity = Vel2(*parse_floats(args.velocity, 2, "--velocity"))
    scene = load_scene(args.scene, settings.scene.max_gaussians)
    ra = render_ra(scene, pose, settings.radar)
    rd = render_rd(ra, render_doppler_map(velocity, settings.radar), settings.radar)

    os.makedirs(args.out, exist_ok=True)
    for name, image in (("ra", ra.data), ("rd", rd.data)):
        np.savetxt(os.path.join(args.out, f"{name}.csv"), image, delimiter=",", fmt="%.17g")
        write_pgm(image, os.path.join(args.out, f"{name}.pgm"))
    log.info(f"Rendered {len(scene)} Gaussians at ({pose.x}, {pose.y}, {pose.yaw}) into {args.out}")
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    flat = load_settings(args.config, parse_overrides(args.set))
    modes = ablation_mode_list if args.reduced else None
    run_ablation(flat, args.out, modes, use_pipeline=not args.no_pipeline)
    return EXIT_OK


def build_parser() -> CliParser:
    parser = CliParser(prog="radar-ba", description="Radar Gaussian-splatting bundle adjustment on simulated sequences")
    parser.add_argument("--log-level", default=None, help="override the console/file log level (DEBUG, INFO, ...)")
    parser.add_argument("--deterministic", action="store_true", help="single-threaded, deterministic torch kernels")
    parser.add_argument("--metrics-port", type=int, default=None, help="serve prometheus metrics on this port")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    def with_config(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", default=None, help="KEY=VALUE configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")

    p = sub.add_parser("simulate", help="write a synthetic measurement directory")
    with_config(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("run", help="estimate the trajectory of a measurement directory")
    with_config(p)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", default="full", choices=RUN_MODES)
    p.add_argument("--no-pipeline", action="store_true", help="process frames in-process instead of through stream_pipeline")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", help="absolute pose error of an estimated TUM trajectory")
    p.add_argument("--est", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", default=None, help="metrics CSV")
    p.add_argument("--scenario", default="scenario")
    p.add_argument("--mode", default="full")
    p.add_argument("--max-gap", type=float, default=None, help="association gap in seconds (default: half a frame period)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", help="render RA/RD images of a scene file")
    with_config(p)
    p.add_argument("--scene", required=True)
    p.add_argument("--pose", required=True, help="x,y,yaw")
    p.add_argument("--velocity", default="0,0", help="vx,vy in the sensor frame")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("ablate", help="run every mode x window x RD combination on one simulated scenario")
    with_config(p)
    p.add_argument("--out", required=True)
    p.add_argument("--reduced", action="store_true",
                   help="only the run modes, the window strategies and the RD-off row, each against the full default")
    p.add_argument("--no-pipeline", action="store_true")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logger.setup_logging(level=args.log_level)
    if args.deterministic:
        torch.set_num_threads(1)
        torch.use_deterministic_algorithms(True)
    try:
        if args.metrics_port is not None:
            metrics.start_metrics_server(args.metrics_port)
        return int(args.func(args))
    except RadarBAError as e:
        log.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
