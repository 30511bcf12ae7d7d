"""
Command-line front end.

    python -m app.cli analyze  INPUT.wav            [--out DIR]
    python -m app.cli enhance  NOISY.wav CLEAN.wav  [--out DIR] [--mask SPEC]
    python -m app.cli metrics  ESTIMATE.wav REFERENCE.wav [--csv PATH]
    python -m app.cli matrix   [--out FILE] [--format bin|csv]

Exit codes: 0 success, 2 usage error, 3 input-format error, 4 numeric failure.
"""

import argparse
import logging
import sys
import time
from pathlib import Path
from typing import List, Optional, Sequence

from app import pipeline
from app.core.config import PipelineConfig, load_config
from app.core.errors import HarmonicGateError, UsageError
from app.core.logging_config import configure_logging
from app.core.reports import RunManifest
from app.dsp import harmonic
from app.dsp.audio_io import read_wav, write_wav
from app.dsp.gating import VrdState
from app.dsp.matrix_io import save_matrix, save_matrix_csv, save_pitch_csv
from app.dsp.providers import get_mask_provider

MANIFEST_NAME = "manifest.json"

CSV_HELP = """
output files:
  pitch.csv         frame,time_s,candidate,pitch_hz,significance
                    time_s = frame * hop / sample_rate; candidate is the row
                    index (pitch = 60 + candidate / 10 Hz); candidate and
                    pitch_hz are empty for unvoiced frames
  gates.bin         T x F gate, binary matrix format
  significance.bin  T x 3600 candidate significance, binary matrix format
  report.csv        l_hb,l_apc_coarse,l_apc_refined,l_focal,total,
                    apc_snr_coarse_db,apc_snr_refined_db
  manifest.json     command, inputs, outputs, config hash, tool version;
                    per-stage timings go to the log at INFO level

binary matrix format: 16-byte little-endian header (magic 'HGMX', rows u32,
cols u32, reserved u32) followed by rows*cols little-endian float32 values.
"""


# --- Argument parsing ---
def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="key=value configuration file")
    common.add_argument("--band", choices=["wb", "fb"], help="wb: 16 kHz wide-band; fb: 48 kHz split into WB and HB")
    common.add_argument("--mask", help="mask provider: oracle | identity | constant:<v> | file:<dir>")
    common.add_argument("--vrd-state", type=Path, help="persisted voiced-region moving average, read and updated in place")
    common.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (default: $LOG_LEVEL or INFO)")

    parser = argparse.ArgumentParser(
        prog="harmonic-gate",
        description="Harmonic-gated speech enhancement toolkit: pitch analysis, oracle-mask enhancement and scoring.",
        epilog=CSV_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", parents=[common], help="pitch track, significance and gate of one recording")
    analyze.add_argument("input", type=Path)
    analyze.add_argument("--out", type=Path, default=Path("."), help="output directory")

    enhance = commands.add_parser("enhance", parents=[common], help="run the mask pipeline on a noisy/clean pair")
    enhance.add_argument("noisy", type=Path)
    enhance.add_argument("clean", type=Path)
    enhance.add_argument("--out", type=Path, default=Path("."), help="output directory")
    enhance.add_argument("--no-gate", action="store_true", help="disable harmonic compensation (gate forced to zero)")

    score = commands.add_parser("metrics", parents=[common], help="score an estimate against a reference")
    score.add_argument("estimate", type=Path)
    score.add_argument("reference", type=Path)
    score.add_argument("--csv", type=Path, help="also write the report as CSV")

    matrix = commands.add_parser("matrix", parents=[common], help="build and export the integral matrix")
    matrix.add_argument("--out", type=Path, default=Path("integral_matrix.bin"), help="output file")
    matrix.add_argument("--format", choices=["bin", "csv"], default="bin")
    return parser


def config_from_args(args: argparse.Namespace) -> PipelineConfig:
    overrides = {"band_mode": args.band, "mask_provider": args.mask}
    return load_config(args.config, overrides)


def _load_vrd_state(args, config: PipelineConfig) -> Optional[VrdState]:
    if args.vrd_state is None:
        return None
    return VrdState.load(args.vrd_state, alpha=config.vrd_alpha)


def _log_timings(command: str, timings: dict) -> None:
    stages = ", ".join(f"{name}={seconds:.4f}s" for name, seconds in timings.items())
    logging.info(f"{command} stage timings: {stages}")


def _write_manifest(out_dir: Path, command: str, inputs: Sequence[Path], outputs: List[Path],
                    config: PipelineConfig) -> Path:
    path = out_dir / MANIFEST_NAME
    manifest = RunManifest(
        command=command,
        inputs=[str(p) for p in inputs],
        outputs=[str(p) for p in outputs] + [str(path)],
        config_hash=config.config_hash(),
    )
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    logging.info(f"Wrote manifest {path} ({len(manifest.outputs)} outputs)")
    return path


def _print_report(report) -> None:
    for line in report.as_lines():
        print(line)


# --- Commands ---
def cmd_analyze(args: argparse.Namespace, config: PipelineConfig) -> int:
    audio = read_wav(args.input)
    state = _load_vrd_state(args, config)
    result = pipeline.analyze(audio, config, state)

    args.out.mkdir(parents=True, exist_ok=True)
    outputs = [
        save_pitch_csv(args.out / "pitch.csv", result.track, result.spectrum.frame_hop, audio.sample_rate),
        save_matrix(args.out / "gates.bin", result.gate.values),
        save_matrix(args.out / "significance.bin", result.significance.values),
    ]
    if args.vrd_state is not None:
        result.vrd_state.save(args.vrd_state)
        outputs.append(args.vrd_state)
    _log_timings("analyze", result.timings)
    _write_manifest(args.out, "analyze", [args.input], outputs, config)
    print(f"frames={result.track.n_frames}")
    print(f"voiced={int(result.vrd_flags.sum())}")
    print(f"gate_density={result.gate.density:.10g}")
    return 0


def cmd_enhance(args: argparse.Namespace, config: PipelineConfig) -> int:
    noisy = read_wav(args.noisy)
    clean = read_wav(args.clean)
    provider = get_mask_provider(config)
    state = _load_vrd_state(args, config)
    result = pipeline.enhance(noisy, clean, config, provider, state, gate_enabled=not args.no_gate)

    args.out.mkdir(parents=True, exist_ok=True)
    outputs = [write_wav(args.out / "enhanced.wav", result.audio)]
    report_path = args.out / "report.csv"
    report_path.write_text(result.report.as_csv(), encoding="utf-8")
    outputs.append(report_path)
    if args.vrd_state is not None:
        result.vrd_state.save(args.vrd_state)
        outputs.append(args.vrd_state)
    _log_timings("enhance", result.timings)
    _write_manifest(args.out, "enhance", [args.noisy, args.clean], outputs, config)
    _print_report(result.report)
    print(f"apc_snr_noisy_db={result.noisy_apc_snr_db:.10g}")
    return 0


def cmd_metrics(args: argparse.Namespace, config: PipelineConfig) -> int:
    report = pipeline.score(read_wav(args.estimate), read_wav(args.reference), config)
    if args.csv is not None:
        args.csv.write_text(report.as_csv(), encoding="utf-8")
        logging.info(f"Wrote report {args.csv}")
    _print_report(report)
    return 0


def cmd_matrix(args: argparse.Namespace, config: PipelineConfig) -> int:
    start = time.perf_counter()
    matrix = pipeline.integral_matrix_for(config)
    try:
        if args.format == "csv":
            save_matrix_csv(args.out, matrix.values)
        else:
            save_matrix(args.out, matrix.values)
    except OSError as e:
        raise UsageError(f"Could not write {args.out}: {e}") from e
    logging.info(f"Integral matrix ready in {time.perf_counter() - start:.3f} s")
    print(f"rows={matrix.values.shape[0]}")
    print(f"cols={matrix.n_bins}")
    print(f"nnz={matrix.nnz}")
    print(f"candidates_hz={harmonic.candidate_hz(0):.1f}-{harmonic.candidate_hz(harmonic.CANDIDATE_COUNT - 1):.1f}")
    return 0


COMMANDS = {
    "analyze": cmd_analyze,
    "enhance": cmd_enhance,
    "metrics": cmd_metrics,
    "matrix": cmd_matrix,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on bad usage, which is already our usage code.
        return int(e.code or 0)
    configure_logging(args.log_level)
    try:
        config = config_from_args(args)
        return COMMANDS[args.command](args, config)
    except HarmonicGateError as e:
        logging.error(f"{args.command} failed: {e}")
        return e.exit_code
    except (ValueError, OSError) as e:
        logging.error(f"{args.command} failed: {e}")
        return UsageError.exit_code


if __name__ == "__main__":
    sys.exit(main())
