"""Command-line front end.

    mixlens explain  --audio clip.wav --stems stems/ --predictor CMD --target melodiousness
    mixlens effects  --audio clip.wav --predictor CMD --emotion valence
    mixlens chain    --audio clip.wav --stems stems/ --predictor CMD --emotion valence
    mixlens baseline --d 5
    mixlens debug    --manifest data.jsonl --predictor CMD --emotion valence \
                     --tag hiphop --out-dir reports/

``--predictor`` takes a full command line for a process speaking the wire
protocol, e.g. ``"python -m mixlens.serving config.json"``. Exit codes:
0 success, 1 usage error, 2 predictor failure, 3 data error. Outputs are
deterministic for fixed flags and seed, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .audio import AudioClip, load_wav
from .dataset import load_manifest
from .debugging import run_debug_bundle
from .decompose import BandSplitConfig, StemLayout, band_decompose, stem_decompose, time_decompose
from .effects import effects as compute_effects
from .effects import two_level_explain
from .errors import MixlensError, PredictorError
from .metrics import random_baseline
from .predictors import Predictor, connect_external
from .surrogate import SurrogateConfig, explain

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PREDICTOR = 2
EXIT_DATA = 3


class _Parser(argparse.ArgumentParser):
    """argparse's default error exit is 2; the CLI reserves that for predictors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _kernel_arg(value: str) -> tuple[str, float | None]:
    if value == "uniform":
        return ("uniform", None)
    if value.startswith("exp:"):
        try:
            width = float(value[4:])
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad kernel width in {value!r}")
        if width <= 0:
            raise argparse.ArgumentTypeError("kernel width must be > 0")
        return ("exponential", width)
    raise argparse.ArgumentTypeError(
        f"kernel must be 'uniform' or 'exp:<width>', got {value!r}"
    )


def _add_surrogate_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=0, help="mask sampling seed")
    sub.add_argument(
        "--samples", type=int, default=1000, help="mask count when sampling (d too large to enumerate)"
    )
    sub.add_argument("--lambda", dest="ridge_lambda", type=float, default=1e-6,
                     help="ridge penalty on the surrogate coefficients")
    sub.add_argument("--kernel", type=_kernel_arg, default=("uniform", None),
                     metavar="uniform|exp:W", help="mask weighting kernel")


def _surrogate_config(ns: argparse.Namespace) -> SurrogateConfig:
    kernel, width = ns.kernel
    return SurrogateConfig(
        n_samples=ns.samples,
        ridge_lambda=ns.ridge_lambda,
        kernel=kernel,
        kernel_width=width,
        seed=ns.seed,
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _json_doc(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _decomposition(ns: argparse.Namespace, clip: AudioClip):
    if ns.stems is not None:
        return stem_decompose(StemLayout(ns.stems), clip)
    if ns.bands is not None:
        return band_decompose(clip, BandSplitConfig(n_bands=ns.bands))
    return time_decompose(clip, ns.segments)


def _require_output(handle: Predictor, name: str, what: str) -> None:
    if name not in handle.output_names:
        raise _Usage(
            f"{what} {name!r} is not declared by the predictor; "
            f"available: {', '.join(handle.output_names)}"
        )


class _Usage(Exception):
    pass


def _cmd_explain(ns: argparse.Namespace) -> int:
    clip = load_wav(ns.audio)
    config = _surrogate_config(ns)
    with connect_external(ns.predictor) as handle:
        _require_output(handle, ns.target, "target")
        decomp = _decomposition(ns, clip)
        result = explain(handle, decomp, ns.target, config)
    _emit(_json_doc(result.to_dict()), ns.out)
    return EXIT_OK


def _cmd_effects(ns: argparse.Namespace) -> int:
    clip = load_wav(ns.audio)
    with connect_external(ns.predictor) as handle:
        head = handle.fetch_head()
        if ns.emotion not in head.emotions:
            raise _Usage(
                f"emotion {ns.emotion!r} is not a head row; "
                f"available: {', '.join(head.emotions)}"
            )
        vec = compute_effects(handle.predict(clip), head, ns.emotion)
    text = vec.to_csv() if ns.format == "csv" else _json_doc(vec.to_dict())
    _emit(text, ns.out)
    return EXIT_OK


def _cmd_chain(ns: argparse.Namespace) -> int:
    clip = load_wav(ns.audio)
    config = _surrogate_config(ns)
    with connect_external(ns.predictor) as handle:
        if ns.emotion not in handle.emotion_names:
            raise _Usage(
                f"emotion {ns.emotion!r} is not declared by the predictor; "
                f"available: {', '.join(handle.emotion_names)}"
            )
        decomp = stem_decompose(StemLayout(ns.stems), clip)
        result = two_level_explain(handle, decomp, ns.emotion, config, explain_all=ns.all_features)
    _emit(_json_doc(result.to_dict()), ns.out)
    return EXIT_OK


def _cmd_baseline(ns: argparse.Namespace) -> int:
    stats = random_baseline(ns.d, n=ns.n, seed=ns.seed)
    _emit(_json_doc(stats.to_dict()), ns.out)
    return EXIT_OK


def _cmd_debug(ns: argparse.Namespace) -> int:
    entries = load_manifest(ns.manifest)
    config = _surrogate_config(ns)
    with connect_external(ns.predictor) as handle:
        _require_output(handle, ns.emotion, "emotion")
        run_debug_bundle(
            handle,
            entries,
            ns.emotion,
            ns.tag,
            ns.out_dir,
            k=ns.quantiles,
            feature=ns.feature,
            config=config,
            strict=ns.strict,
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mixlens", description="Explain black-box audio regression models.")
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("explain", help="component attributions for one output",
                        description="Fit a surrogate over masked remixes and print attributions.")
    p.add_argument("--audio", required=True, help="input WAV file")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--stems", help="directory of instrument stems")
    group.add_argument("--bands", type=int, help="split into N frequency bands")
    group.add_argument("--segments", type=int, help="split into N time segments")
    p.add_argument("--predictor", required=True, help="predictor command line")
    p.add_argument("--target", required=True, help="output name to explain")
    p.add_argument("--out", help="write JSON here instead of stdout")
    _add_surrogate_flags(p)
    p.set_defaults(func=_cmd_explain)

    p = subs.add_parser("effects", help="per-feature effects on an emotion",
                        description="Mid-level feature values times head weights for one emotion.")
    p.add_argument("--audio", required=True)
    p.add_argument("--predictor", required=True)
    p.add_argument("--emotion", required=True)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_effects)

    p = subs.add_parser("chain", help="two-level explanation of an emotion",
                        description="Select the top-effect feature and explain it from stems.")
    p.add_argument("--audio", required=True)
    p.add_argument("--stems", required=True)
    p.add_argument("--predictor", required=True)
    p.add_argument("--emotion", required=True)
    p.add_argument("--all-features", action="store_true",
                   help="also explain every other mid-level feature")
    p.add_argument("--out")
    _add_surrogate_flags(p)
    p.set_defaults(func=_cmd_chain)

    p = subs.add_parser("baseline", help="random-attribution complexity baseline")
    p.add_argument("--d", type=int, required=True, help="attribution vector length")
    p.add_argument("--n", type=int, default=1000, help="number of random draws")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_baseline)

    p = subs.add_parser("debug", help="dataset-wide error and bias reports",
                        description="Signed errors, tag-enrichment quantiles, group effects, "
                        "and top-source histograms, written as CSV/JSON files.")
    p.add_argument("--manifest", required=True, help="JSON-lines dataset manifest")
    p.add_argument("--predictor", required=True)
    p.add_argument("--emotion", required=True)
    p.add_argument("--tag", required=True, help="focus tag for group comparisons")
    p.add_argument("--quantiles", type=int, default=10)
    p.add_argument("--feature", help="mid-level feature for the source report "
                   "(default: the tagged group's top-effect feature)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--strict", action="store_true",
                   help="fail on the first per-entry error instead of skipping")
    _add_surrogate_flags(p)
    p.set_defaults(func=_cmd_debug)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except _Usage as exc:
        print(f"mixlens: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"mixlens: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PredictorError as exc:
        print(f"mixlens: predictor failure: {exc}", file=sys.stderr)
        return EXIT_PREDICTOR
    except MixlensError as exc:
        print(f"mixlens: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
