"""Command-line front end.

Three subcommands:

* ``stylize`` — optimize a content SVG toward a style image and write the
  stylized SVG (plus optional snapshots and a loss history CSV).
* ``gradcheck`` — finite-difference validation of the differentiable
  rasterizer's gradients on a scene.
* ``weights-info`` — inspect and validate a ``VNSTW1`` weights file.

Exit codes: 0 success; 2 invalid arguments; 3 parse/format errors (the
message names the file and, where known, the location); 4 numerical abort;
5 gradient-check failure.  ``VECSTYLE_THREADS`` caps internal worker threads
(0 or unset = automatic).
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from .engine import OptimConfig, prepare_style_image, run, working_resolution
from .errors import (
    DimensionError,
    NumericalAbortError,
    SvgParseError,
    UnsupportedSvgFeatureError,
    VecstyleError,
    WeightFormatError,
)
from .features import TrunkSpec, load_weights
from .losses import LossConfig
from .raster import RenderConfig, backward, render
from .scene import ParamGroups, Scene, apply_params, extract_params
from .svg_io import load_svg, save_svg

__all__ = ["main"]

_GRADCHECK_TOLERANCE = 1e-2


class _Fail(Exception):
    """Internal: abort the command with a message and an exit code."""

    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {value}")
    return value


def _non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number {text!r}")
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vecstyle",
        description="Neural style transfer for vector images: optimize SVG shape "
        "parameters so the render matches a style image while outlines survive.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stylize", help="optimize a content SVG toward a style image")
    p.add_argument("--content", required=True, metavar="PATH.svg", help="content SVG to stylize")
    p.add_argument("--style", required=True, metavar="PATH", help="style image (PNG/JPEG) or SVG")
    p.add_argument("--weights", required=True, metavar="PATH", help="feature-trunk weights (VNSTW1)")
    p.add_argument("--out", required=True, metavar="PATH.svg", help="where to write the stylized SVG")
    p.add_argument("--iters", type=_non_negative_int, default=150, help="optimization iterations (default 150)")
    p.add_argument(
        "--lambda",
        dest="contour_weight",
        type=_non_negative_float,
        default=100.0,
        help="contour term weight (default 100)",
    )
    p.add_argument("--seed", type=_non_negative_int, default=0, help="RNG seed (default 0)")
    p.add_argument(
        "--snapshot-every",
        type=_non_negative_int,
        default=0,
        help="write an SVG/PNG snapshot every K iterations (0 = off)",
    )
    p.add_argument("--snapshot-dir", metavar="DIR", help="directory for snapshots and history.csv")
    p.add_argument("--contour", choices=("l1", "l2"), default="l1", help="contour distance (default l1)")
    p.add_argument(
        "--no-color-scale",
        action="store_true",
        help="disable the random intensity rescaling of the perceptual distance",
    )
    p.add_argument(
        "--resolution-cap",
        type=_positive_int,
        default=512,
        help="long-side cap on the working resolution (default 512)",
    )
    p.set_defaults(func=_cmd_stylize)

    p = sub.add_parser("gradcheck", help="finite-difference check of rasterizer gradients")
    p.add_argument("--scene", required=True, metavar="PATH.svg", help="scene to check")
    p.add_argument("--size", type=_positive_int, default=48, help="render size in pixels (default 48)")
    p.add_argument("--eps", type=_positive_float, default=1e-3, help="finite-difference step (default 1e-3)")
    p.add_argument("--samples", type=_positive_int, default=100, help="parameters to sample (default 100)")
    p.add_argument("--seed", type=_non_negative_int, default=0, help="RNG seed (default 0)")
    p.set_defaults(func=_cmd_gradcheck)

    p = sub.add_parser("weights-info", help="inspect and validate a VNSTW1 weights file")
    p.add_argument("--weights", required=True, metavar="PATH", help="weights file to inspect")
    p.set_defaults(func=_cmd_weights_info)

    return parser


def _apply_thread_env() -> None:
    raw = os.environ.get("VECSTYLE_THREADS")
    if raw is None:
        return
    try:
        n = int(raw)
    except ValueError:
        raise _Fail(2, f"VECSTYLE_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise _Fail(2, f"VECSTYLE_THREADS must be >= 0, got {n}")
    if n > 0:
        import torch

        torch.set_num_threads(n)


def _load_scene(path: str) -> Scene:
    try:
        return load_svg(path)
    except FileNotFoundError:
        raise _Fail(3, f"{path}: file not found")
    except (SvgParseError, UnsupportedSvgFeatureError, VecstyleError) as exc:
        raise _Fail(3, f"{path}: {exc}")


def _cmd_stylize(args) -> int:
    if args.snapshot_every > 0 and not args.snapshot_dir:
        raise _Fail(2, "--snapshot-every requires --snapshot-dir")
    content = _load_scene(args.content)
    width, height = working_resolution(content, args.resolution_cap)
    try:
        style = prepare_style_image(args.style, width, height)
    except FileNotFoundError:
        raise _Fail(3, f"{args.style}: file not found")
    except (VecstyleError, OSError) as exc:
        raise _Fail(3, f"{args.style}: {exc}")
    try:
        net = load_weights(args.weights)
    except FileNotFoundError:
        raise _Fail(3, f"{args.weights}: file not found")
    except WeightFormatError as exc:
        raise _Fail(3, f"{args.weights}: {exc}")

    optim = OptimConfig(
        iterations=args.iters,
        snapshot_every=args.snapshot_every,
        snapshot_dir=args.snapshot_dir,
        rng_seed=args.seed,
    )
    loss = LossConfig(
        contour_weight=args.contour_weight,
        contour_variant=args.contour,
        color_scale_transform=not args.no_color_scale,
        rng_seed=args.seed,
    )
    final, history = run(content, style, optim, loss, net)
    save_svg(final, args.out)
    first, last = history[0], history[-1]
    print(f"working resolution: {width}x{height}")
    print(
        f"initial: total={first.total:.9g} lpips={first.lpips_term:.9g} "
        f"contour={first.contour_term:.9g}"
    )
    print(
        f"final:   total={last.total:.9g} lpips={last.lpips_term:.9g} "
        f"contour={last.contour_term:.9g}  ({args.iters} iterations)"
    )
    print(f"wrote {args.out}")
    return 0


def _fd_value(scene: Scene, groups: ParamGroups, config: RenderConfig, probe: np.ndarray) -> float:
    image, _ = render(apply_params(scene, groups), config)
    return float(np.sum(image.data * probe))


_CLAMP_MARGIN_SCALE = 2.0  # skip FD across a clamp boundary within 2*eps


def _boundary_clamped(group: str, value: float, eps: float) -> bool:
    margin = _CLAMP_MARGIN_SCALE * eps
    if group == "colors":
        return value < margin or value > 1.0 - margin
    if group == "widths":
        return value < margin
    return False


def _gradcheck_scene(
    scene: Scene, size: int, eps: float, samples: int, seed: int
) -> tuple[dict[str, tuple[float, int, int]], tuple[str, int, float]]:
    """Returns per-group (max rel err, n checked, n skipped) and the overall
    worst (group, index, err)."""
    config = RenderConfig(out_width=size, out_height=size)
    rng = np.random.default_rng(seed)
    probe = rng.standard_normal((size, size, 4))

    image, tape = render(scene, config)
    analytic = backward(tape, probe)
    groups = extract_params(scene)

    pool = [
        (name, i)
        for name in ("points", "colors", "widths")
        for i in range(getattr(groups, name).shape[0])
    ]
    if len(pool) > samples:
        chosen = rng.choice(len(pool), size=samples, replace=False)
        pool = [pool[int(k)] for k in chosen]

    # Scale for relative error: largest analytic magnitude per group, so
    # parameters with (near-)zero true gradient do not divide by zero.
    scales = {
        name: max(float(np.max(np.abs(getattr(analytic, name)), initial=0.0)), 1e-8)
        for name in ("points", "colors", "widths")
    }

    stats: dict[str, tuple[float, int, int]] = {}
    per_group: dict[str, list[tuple[int, float]]] = {"points": [], "colors": [], "widths": []}
    skipped = {"points": 0, "colors": 0, "widths": 0}
    for name, idx in pool:
        base = getattr(groups, name)
        if _boundary_clamped(name, float(base[idx]), eps):
            skipped[name] += 1
            continue
        plus = ParamGroups(groups.points.copy(), groups.colors.copy(), groups.widths.copy())
        minus = ParamGroups(groups.points.copy(), groups.colors.copy(), groups.widths.copy())
        getattr(plus, name)[idx] += eps
        getattr(minus, name)[idx] -= eps
        fd = (_fd_value(scene, plus, config, probe) - _fd_value(scene, minus, config, probe)) / (
            2.0 * eps
        )
        an = float(getattr(analytic, name)[idx])
        err = abs(fd - an) / max(abs(fd), abs(an), scales[name])
        per_group[name].append((idx, err))

    worst = ("", -1, 0.0)
    for name in ("points", "colors", "widths"):
        entries = per_group[name]
        if entries:
            idx, err = max(entries, key=lambda e: e[1])
            stats[name] = (err, len(entries), skipped[name])
            if err > worst[2]:
                worst = (name, idx, err)
        else:
            stats[name] = (0.0, 0, skipped[name])
    return stats, worst


def _cmd_gradcheck(args) -> int:
    scene = _load_scene(args.scene)
    stats, worst = _gradcheck_scene(scene, args.size, args.eps, args.samples, args.seed)
    for name in ("points", "colors", "widths"):
        err, checked, skipped = stats[name]
        note = f" ({skipped} skipped at clamp boundary)" if skipped else ""
        print(f"group {name}: max rel err {err:.3e} over {checked} samples{note}")
    if worst[2] > _GRADCHECK_TOLERANCE:
        print(
            f"FAIL: worst parameter {worst[0]}[{worst[1]}] rel err {worst[2]:.3e} "
            f"> {_GRADCHECK_TOLERANCE:g}",
            file=sys.stderr,
        )
        return 5
    print(f"OK (tolerance {_GRADCHECK_TOLERANCE:g})")
    return 0


def _cmd_weights_info(args) -> int:
    try:
        store = load_weights(args.weights)
    except FileNotFoundError:
        raise _Fail(3, f"{args.weights}: file not found")
    except WeightFormatError as exc:
        raise _Fail(3, f"{args.weights}: {exc}")
    spec = TrunkSpec.canonical()
    total_elements = 0
    for name, tensor in store.tensors.items():
        shape = "x".join(str(d) for d in tensor.shape)
        total_elements += tensor.size
        print(f"{name}  {shape}  ({tensor.size} values)")
    print(f"tensors: {len(store.tensors)}")
    print(f"total values: {total_elements}")
    print(f"conv trunk parameters: {spec.n_parameters}")
    for name in store.unknown_names(spec):
        print(f"warning: unknown tensor {name!r}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse has printed its own message
        return int(exc.code or 0)
    try:
        _apply_thread_env()
        return args.func(args)
    except _Fail as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except NumericalAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (SvgParseError, UnsupportedSvgFeatureError, WeightFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DimensionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
