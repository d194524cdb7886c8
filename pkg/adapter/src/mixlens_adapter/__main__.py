import argparse
import sys

from .model import ConfigError, SpectralStatsModel, load_config
from .serving import serve


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mixlens-adapter",
        description="Serve the spectral-statistics predictor over stdin/stdout.",
    )
    parser.add_argument("config", help="JSON config: sample_rate, head_file, features")
    ns = parser.parse_args(argv)
    try:
        model = SpectralStatsModel(load_config(ns.config))
    except ConfigError as exc:
        print(f"mixlens-adapter: {exc}", file=sys.stderr)
        return 1
    return serve(model, sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
