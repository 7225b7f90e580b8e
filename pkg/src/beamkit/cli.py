"""Command line interface: scene simulation, beamforming, evaluation.

Diagnostics go to standard output as one key=value record per line so runs
are greppable and diffable. BEAMKIT_THREADS caps internal parallelism
(0 or unset means automatic); it is applied before numpy loads, which is
why the heavy imports live inside the command handlers.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

_BLAS_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
    "VECLIB_MAXIMUM_THREADS",
)

_ROLE_FLAGS = {
    "target": "--target-mask",
    "interference": "--interference-mask",
    "noise": "--noise-mask",
    "enhancement": "--se-mask",
}


def _configure_threads() -> None:
    raw = os.environ.get("BEAMKIT_THREADS", "").strip()
    if not raw:
        return
    try:
        count = int(raw)
    except ValueError:
        print(f"warning: ignoring non-integer BEAMKIT_THREADS={raw!r}", file=sys.stderr)
        return
    if count > 0:
        for var in _BLAS_VARS:
            os.environ.setdefault(var, str(count))


def _bool_flag(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="beamkit",
        description="Mask-driven multichannel beamforming toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    beamform = sub.add_parser("beamform", help="enhance a multichannel WAV file")
    beamform.add_argument("--input", required=True, help="input multichannel WAV")
    beamform.add_argument("--output", required=True, help="enhanced single-channel WAV")
    beamform.add_argument("--config", help="key=value run configuration file")
    beamform.add_argument(
        "--beamformer", choices=["das", "mvdr", "cgmm2", "cgmm2-noinit", "cgmm3"]
    )
    beamform.add_argument("--prior", type=_bool_flag, metavar="{true,false}")
    beamform.add_argument("--early-ss", type=_bool_flag, metavar="{true,false}")
    beamform.add_argument("--early-se", type=_bool_flag, metavar="{true,false}")
    beamform.add_argument("--later-ss", choices=["off", "input", "post-em"])
    beamform.add_argument("--mvdr-mask", choices=["enhancement", "target"])
    beamform.add_argument("--block-frames", type=int)
    beamform.add_argument("--iterations", type=int)
    beamform.add_argument("--loading", type=float)
    beamform.add_argument("--reference-channel", type=int)
    beamform.add_argument("--channel-reduce", choices=["mean", "max"])
    beamform.add_argument("--target-mask", help="MSK1 file for the target-speaker mask")
    beamform.add_argument("--interference-mask", help="MSK1 file for the interference mask")
    beamform.add_argument("--noise-mask", help="MSK1 file for the noise mask")
    beamform.add_argument("--se-mask", help="MSK1 file for the enhancement (speech) mask")
    beamform.set_defaults(func=_cmd_beamform)

    simulate = sub.add_parser("simulate", help="generate a synthetic scene with oracle masks")
    simulate.add_argument("--out-dir", required=True)
    simulate.add_argument("--mics", type=int, default=4)
    simulate.add_argument("--speakers", type=int, default=2)
    simulate.add_argument("--mic-spacing", type=float, default=0.05, help="meters")
    simulate.add_argument(
        "--azimuths", default="60,-60", help="comma-separated degrees from broadside"
    )
    simulate.add_argument("--snr-db", type=float, default=5.0)
    simulate.add_argument("--sample-rate", type=int, default=16000)
    simulate.add_argument("--duration", type=float, default=10.0, help="seconds")
    simulate.add_argument("--seed", type=int, default=0)
    simulate.add_argument("--noise", choices=["white", "diffuse"], default="diffuse")
    simulate.set_defaults(func=_cmd_simulate)

    evaluate = sub.add_parser("eval", help="score an enhanced file or render masks")
    evaluate.add_argument("--ref", help="reference WAV")
    evaluate.add_argument("--est", help="estimate WAV")
    evaluate.add_argument("--ref-channel", type=int, default=0)
    evaluate.add_argument("--est-channel", type=int, default=0)
    evaluate.add_argument("--mask", help="MSK1 file to render")
    evaluate.add_argument("--mask-png", help="output PNG (components stacked vertically)")
    evaluate.set_defaults(func=_cmd_eval)

    return parser


# Flag name (argparse dest) per PipelineConfig field handled by `beamform`.
PIPELINE_FLAG_MAP = {
    "beamformer": "beamformer",
    "prior": "prior",
    "early_se": "early_se",
    "early_ss": "early_ss",
    "later_ss": "later_ss",
    "mvdr_mask": "mvdr_mask",
    "block_frames": "block_frames",
    "iterations": "iterations",
    "loading": "loading",
    "reference_channel": "reference_channel",
    "channel_reduce": "channel_reduce",
    "target_mask": "target_mask",
    "interference_mask": "interference_mask",
    "noise_mask": "noise_mask",
    "se_mask": "se_mask",
}

# Flag dest per SceneConfig field handled by `simulate`.
SCENE_FLAG_MAP = {
    "mics": "mics",
    "speakers": "speakers",
    "mic_spacing": "mic_spacing",
    "azimuths": "azimuths",
    "snr_db": "snr_db",
    "sample_rate": "sample_rate",
    "duration_s": "duration",
    "seed": "seed",
    "noise_kind": "noise",
}

_LATER_SS_ALIASES = {"input": "input-mask", "post-em": "post-em-mask"}


def _load_role_mask(bkio, pipeline, path: str, reduce_mode: str):
    loaded = bkio.read_mask(path)
    if isinstance(loaded, list):
        if len(loaded) == 1:
            return loaded[0]
        import numpy as np

        return pipeline.reduce_channels(np.stack(loaded), reduce_mode)
    return loaded


def _print_block_record(info: dict) -> None:
    parts = [
        f"block={info['index']}",
        f"start_frame={info['start']}",
        f"frames={info['frames']}",
    ]
    if "loglik" in info:
        parts.append("loglik=" + ",".join(f"{v:.6g}" for v in info["loglik"]))
    if "mvdr_fallback_bins" in info:
        parts.append(f"mvdr_fallback_bins={info['mvdr_fallback_bins']}")
    print(" ".join(parts))


def _cmd_beamform(args) -> int:
    from . import io as bkio
    from . import pipeline
    from .spectral import StftConfig

    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            config = bkio.parse_config(handle.read())
    else:
        config = pipeline.PipelineConfig()
    for field, dest in PIPELINE_FLAG_MAP.items():
        value = getattr(args, dest)
        if value is not None:
            if field == "later_ss":
                value = _LATER_SS_ALIASES.get(value, value)
            setattr(config, field, value)
    config.validate()

    audio = bkio.read_wav(args.input)
    masks = {
        role: _load_role_mask(bkio, pipeline, path, config.channel_reduce)
        for role, path in config.mask_paths().items()
    }
    missing = sorted(pipeline.required_mask_roles(config) - set(masks))
    if missing:
        flags = ", ".join(_ROLE_FLAGS[role] for role in missing)
        print(
            f"error: beamformer={config.beamformer} needs {flags} (or the matching "
            f"config keys)",
            file=sys.stderr,
        )
        return 1

    start = time.perf_counter()
    enhanced = pipeline.run_pipeline(
        audio,
        config,
        masks,
        StftConfig(sample_rate=audio.sample_rate),
        on_block=_print_block_record,
    )
    wall = time.perf_counter() - start
    bkio.write_wav(args.output, enhanced)
    print(
        f"audio_seconds={audio.duration:.3f} wall_seconds={wall:.3f} "
        f"rtf={wall / audio.duration:.3f}"
    )
    return 0


def _cmd_simulate(args) -> int:
    import numpy as np

    from . import io as bkio
    from .simulate import SceneConfig, oracle_irm, synthesize_scene
    from .spectral import StftConfig

    azimuths = tuple(float(part) for part in args.azimuths.split(",") if part.strip())
    scene_config = SceneConfig(
        mics=args.mics,
        speakers=args.speakers,
        mic_spacing=args.mic_spacing,
        azimuths=azimuths,
        snr_db=args.snr_db,
        sample_rate=args.sample_rate,
        duration_s=args.duration,
        seed=args.seed,
        noise_kind=args.noise,
    )
    scene = synthesize_scene(scene_config)
    stft_config = StftConfig(sample_rate=scene_config.sample_rate)
    masks = oracle_irm(scene, stft_config)

    os.makedirs(args.out_dir, exist_ok=True)

    def _emit(name: str) -> str:
        return os.path.join(args.out_dir, name)

    written = []
    bkio.write_wav(_emit("mixture.wav"), scene.mixture)
    written.append("mixture.wav")
    for k, image in enumerate(scene.source_images):
        bkio.write_wav(_emit(f"source_{k}.wav"), image)
        written.append(f"source_{k}.wav")
    bkio.write_wav(_emit("noise.wav"), scene.noise_image)
    written.append("noise.wav")

    ordered_roles = [role for role in ("target", "interference", "noise") if role in masks]
    bkio.write_mask(_emit("masks.msk"), [masks[role] for role in ordered_roles])
    written.append("masks.msk")
    for role in ordered_roles:
        bkio.write_mask(_emit(f"{role}.msk"), masks[role])
        written.append(f"{role}.msk")
    enhancement = np.clip(1.0 - masks["noise"], 0.0, 1.0)
    bkio.write_mask(_emit("enhancement.msk"), enhancement)
    written.append("enhancement.msk")

    manifest_lines = [
        "# synthetic scene manifest",
        f"mics={scene_config.mics}",
        f"speakers={scene_config.speakers}",
        f"mic_spacing={scene_config.mic_spacing}",
        "azimuths=" + ",".join(str(a) for a in scene_config.azimuths),
        f"snr_db={scene_config.snr_db}",
        f"sample_rate={scene_config.sample_rate}",
        f"duration_s={scene_config.duration_s}",
        f"seed={scene_config.seed}",
        f"noise_kind={scene_config.noise_kind}",
        f"stft_window_ms={stft_config.window_ms}",
        f"stft_hop_ms={stft_config.hop_ms}",
        "mask_components=" + ",".join(ordered_roles),
        "files=" + ",".join(written),
    ]
    with open(_emit("manifest.cfg"), "w", encoding="utf-8") as handle:
        handle.write("\n".join(manifest_lines) + "\n")
    written.append("manifest.cfg")

    for name in written:
        print(f"wrote={os.path.join(args.out_dir, name)}")
    return 0


def _cmd_eval(args) -> int:
    from . import io as bkio

    acted = False
    if args.ref or args.est:
        if not (args.ref and args.est):
            print("error: --ref and --est must be given together", file=sys.stderr)
            return 1
        from .simulate import si_snr

        ref = bkio.read_wav(args.ref)
        est = bkio.read_wav(args.est)
        if ref.sample_rate != est.sample_rate:
            print(
                f"error: sample rates differ ({ref.sample_rate} vs {est.sample_rate})",
                file=sys.stderr,
            )
            return 1
        for name, audio, channel in (("ref", ref, args.ref_channel), ("est", est, args.est_channel)):
            if not 0 <= channel < audio.num_channels:
                print(
                    f"error: --{name}-channel {channel} out of range for "
                    f"{audio.num_channels} channels",
                    file=sys.stderr,
                )
                return 1
        value = si_snr(ref.samples[args.ref_channel], est.samples[args.est_channel])
        print(f"si_snr_db={value:.2f}")
        acted = True

    if args.mask_png:
        if not args.mask:
            print("error: --mask-png requires --mask", file=sys.stderr)
            return 1
        import numpy as np
        from PIL import Image

        loaded = bkio.read_mask(args.mask)
        layers = loaded if isinstance(loaded, list) else [loaded]
        # Low frequencies at the bottom, components stacked top to bottom
        # with a thin separator line.
        separator = np.full((2, layers[0].shape[1]), 0.5)
        rows = []
        for index, layer in enumerate(layers):
            if index:
                rows.append(separator)
            rows.append(np.flipud(layer))
        sheet = np.concatenate(rows, axis=0)
        image = Image.fromarray(np.round(sheet * 255.0).astype(np.uint8), mode="L")
        image.save(args.mask_png)
        print(f"wrote={args.mask_png}")
        acted = True

    if not acted:
        print("error: nothing to do; pass --ref/--est or --mask/--mask-png", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _configure_threads()
    from .errors import BeamkitError

    try:
        return args.func(args)
    except (BeamkitError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
