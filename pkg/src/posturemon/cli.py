"""``posturemon`` command line.

Every subcommand accepts ``--config FILE`` (``key = value`` lines); flags
given on the command line override file values, and unknown keys are
rejected. Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
1 validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields

from . import features, traceio
from .calibration import CalibrationProfile, calibrate
from .detection import DetectorConfig, events_csv, run
from .errors import PostureError
from .evaluation import format_stats, from_counts, match_events, stats_csv
from .pipeline import repro_report
from .sensor_models import generate_trace, slouch_intervals


class UnknownConfigKey(PostureError):
    pass


class BadConfigValue(PostureError):
    pass


@dataclass
class RunConfig:
    angle_threshold_deg: float = 20.0
    flex_threshold_ohms: float = 33_000.0
    debounce_ms: int = 3000
    hysteresis_deg: float = 2.0
    idle_timeout_ms: int | None = None
    flex_relative_ohms: float | None = None
    script: str | None = None
    seed: int = 0
    rate_hz: float = 100.0
    noise_deg: float = 0.0
    drift_dps: float = 0.0
    window_ms: int = 10_000
    max_spread_deg: float = 5.0
    slack_ms: int = 1000
    top_k: int = 6
    out: str | None = None
    truth_out: str | None = None
    series_out: str | None = None

    def detector(self) -> DetectorConfig:
        return DetectorConfig(
            angle_threshold_deg=self.angle_threshold_deg,
            flex_threshold_ohms=self.flex_threshold_ohms,
            debounce_ms=self.debounce_ms,
            hysteresis_deg=self.hysteresis_deg,
            idle_timeout_ms=self.idle_timeout_ms,
            flex_relative_ohms=self.flex_relative_ohms,
        )


_CASTS = {"float": float, "int": int, "str": str}


def _cast(name: str, raw: str):
    f = next(f for f in fields(RunConfig) if f.name == name)
    kind = str(f.type).split("|")[0].strip()
    if raw.strip().lower() in ("", "none") and "None" in str(f.type):
        return None
    try:
        return _CASTS[kind](raw.strip())
    except ValueError:
        raise BadConfigValue(f"{name}: cannot parse {raw!r} as {kind}") from None


def load_config_text(text: str) -> dict:
    known = {f.name for f in fields(RunConfig)}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise BadConfigValue(f"config line {lineno}: expected 'key = value'")
        if key not in known:
            raise UnknownConfigKey(f"config line {lineno}: unknown key {key!r}")
        values[key] = _cast(key, val)
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            values.update(load_config_text(f.read()))
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig(**values)


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", newline="") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    cfg = resolve_config(args)
    if not cfg.script:
        raise BadConfigValue("gen needs --script")
    if not cfg.out:
        raise BadConfigValue("gen needs --out")
    with open(cfg.script) as f:
        script = traceio.loads_script(f.read())
    trace = generate_trace(script, cfg.rate_hz, cfg.noise_deg, cfg.drift_dps, cfg.seed)
    traceio.write_csv(trace, cfg.out)
    truth_path = cfg.truth_out or _sibling(cfg.out, ".truth.csv")
    truth = slouch_intervals(script, cfg.angle_threshold_deg, cfg.debounce_ms)
    _emit(traceio.dumps_truth(truth), truth_path)
    print(f"wrote {len(trace)} samples to {cfg.out}, {len(truth)} truth intervals to "
          f"{truth_path}", file=sys.stderr)
    return 0


def _sibling(path: str, suffix: str) -> str:
    return path[:-4] + suffix if path.endswith(".csv") else path + suffix


def cmd_calibrate(args) -> int:
    cfg = resolve_config(args)
    trace = traceio.read_csv(args.trace)
    profile = calibrate(trace, cfg.window_ms, cfg.max_spread_deg)
    _emit(profile.to_text(), cfg.out)
    return 0


def cmd_detect(args) -> int:
    cfg = resolve_config(args)
    trace = traceio.read_csv(args.trace)
    if args.profile:
        with open(args.profile) as f:
            profile = CalibrationProfile.from_text(f.read())
    else:
        profile = calibrate(trace, cfg.window_ms, cfg.max_spread_deg)
        print("no --profile given; calibrated on the first "
              f"{cfg.window_ms} ms of the trace", file=sys.stderr)
    events, angles = run(trace, cfg.detector(), profile)
    _emit(events_csv(events), cfg.out)
    if cfg.series_out:
        rows = [
            f"{t},{a:.6f},{x:.9g}"
            for t, a, x in zip(
                trace.timestamp_ms.tolist(), angles.tolist(), trace.flex_ohms.tolist()
            )
        ]
        with open(cfg.series_out, "w", newline="") as f:
            f.write("timestamp_ms,angle_deg,flex_ohms\n" + "".join(r + "\n" for r in rows))
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    if args.counts:
        tp, fp, fn = args.counts
        stats = from_counts(tp, fp, fn, args.positives)
    else:
        if not (args.events and args.truth):
            raise BadConfigValue("eval needs --events and --truth, or --counts TP FP FN")
        with open(args.events) as f:
            events = traceio.loads_events(f.read())
        with open(args.truth) as f:
            truth = traceio.loads_truth(f.read())
        stats = match_events(events, truth, cfg.slack_ms)
    _emit(stats_csv(stats) if args.csv else format_stats(stats) + "\n", cfg.out)
    return 0


def cmd_pca(args) -> int:
    cfg = resolve_config(args)
    trace = traceio.read_csv(args.trace)
    attrs = [a.strip() for a in args.attributes.split(",")] if args.attributes else None
    m = features.trace_features(trace, attrs)
    result = features.pca(m, standardize=args.standardize)
    k = min(cfg.top_k, len(result.eigenvalues))
    ranking = features.rank_attributes(result, k)
    if args.csv:
        _emit(features.ranking_csv(ranking), cfg.out)
    else:
        _emit(features.format_pca_table(result, ranking, k) + "\n", cfg.out)
    return 0


def cmd_repro(args) -> int:
    cfg = resolve_config(args)
    _emit(repro_report(cfg.seed, cfg.rate_hz), cfg.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="posturemon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--out", help="output path (default stdout)")
        return sp

    def detector_flags(sp):
        sp.add_argument("--angle-threshold-deg", dest="angle_threshold_deg", type=float)
        sp.add_argument("--flex-threshold-ohms", dest="flex_threshold_ohms", type=float)
        sp.add_argument("--debounce-ms", dest="debounce_ms", type=int)
        sp.add_argument("--hysteresis-deg", dest="hysteresis_deg", type=float)
        sp.add_argument("--idle-timeout-ms", dest="idle_timeout_ms", type=int)
        sp.add_argument(
            "--flex-relative-ohms", dest="flex_relative_ohms", type=float,
            help="bent when flex >= calibrated baseline + this (overrides the absolute threshold)",
        )

    sp = common(sub.add_parser("gen", help="generate a synthetic trace from a motion script"))
    sp.add_argument("--script")
    sp.add_argument("--rate", dest="rate_hz", type=float)
    sp.add_argument("--noise", dest="noise_deg", type=float)
    sp.add_argument("--drift", dest="drift_dps", type=float)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--truth-out", dest="truth_out")
    detector_flags(sp)
    sp.set_defaults(func=cmd_gen)

    sp = common(sub.add_parser("calibrate", help="build an upright calibration profile"))
    sp.add_argument("--trace", required=True)
    sp.add_argument("--window-ms", dest="window_ms", type=int)
    sp.add_argument("--max-spread-deg", dest="max_spread_deg", type=float)
    sp.set_defaults(func=cmd_calibrate)

    sp = common(sub.add_parser("detect", help="run the detector, print events as CSV"))
    sp.add_argument("--trace", required=True)
    sp.add_argument("--profile")
    sp.add_argument("--series-out", dest="series_out", help="per-sample angle series CSV")
    sp.add_argument("--window-ms", dest="window_ms", type=int)
    sp.add_argument("--max-spread-deg", dest="max_spread_deg", type=float)
    detector_flags(sp)
    sp.set_defaults(func=cmd_detect)

    sp = common(sub.add_parser("eval", help="score events against truth intervals"))
    sp.add_argument("--events")
    sp.add_argument("--truth")
    sp.add_argument("--slack-ms", dest="slack_ms", type=int)
    sp.add_argument("--counts", nargs=3, type=int, metavar=("TP", "FP", "FN"))
    sp.add_argument("--positives", type=int)
    sp.add_argument("--csv", action="store_true")
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("pca", help="rank trace attributes by PCA"))
    sp.add_argument("--trace", required=True)
    sp.add_argument("--attributes", help="comma-separated attribute names")
    sp.add_argument("--top-k", dest="top_k", type=int)
    sp.add_argument("--standardize", action="store_true")
    sp.add_argument("--csv", action="store_true")
    sp.set_defaults(func=cmd_pca)

    sp = common(sub.add_parser("repro", help="one-shot slouch/bend scenario report"))
    sp.add_argument("--seed", type=int)
    sp.add_argument("--rate", dest="rate_hz", type=float)
    sp.set_defaults(func=cmd_repro)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PostureError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
