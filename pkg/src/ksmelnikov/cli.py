"""Command-line entry point.

Diagnostics go to stderr through logging; data goes to files.  Exit codes:
0 success, 2 configuration error, 3 numerical failure, 4 best-effort
orbit written but the return tolerance was not met.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import PRESETS, parse_config, preset
from .errors import ConfigError, KsmError
from .pipeline import VERBS, Pipeline, run_all_figure_presets


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="ksmelnikov",
        description="Adjoint-based Melnikov analysis of the Kuramoto-Sivashinsky equation",
    )
    p.add_argument("verb", choices=VERBS, help="pipeline stage to run")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in table preset")
    src.add_argument("--config", help="path to an INI run configuration")
    p.add_argument("--output", help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="parallelism cap for sweep/ensemble stages")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    log = logging.getLogger("ksmelnikov.cli")
    try:
        if args.verb == "figures" and args.config is None and args.preset is None:
            bundle = run_all_figure_presets(args.output or "out", threads=args.threads)
        else:
            if args.config is not None:
                with open(args.config, "r", encoding="utf-8") as fh:
                    cfg = parse_config(fh.read())
            else:
                cfg = preset(args.preset or "fig1")
            pipe = Pipeline(cfg, output_dir=args.output, threads=args.threads)
            bundle = pipe.run(args.verb)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return 2
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 2
    except KsmError as exc:
        log.error("numerical failure: %s", exc)
        return 3
    for name, meta in bundle.files.items():
        log.info("wrote %s -> %s", name, meta["path"])
    if bundle.not_converged:
        log.warning("orbit did not meet the return tolerance; outputs are best-effort (exit 4)")
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
