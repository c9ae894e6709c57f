"""Command-line front end: simulate | serve | record | analyze | plot | monitor | export.

Exit codes: 0 success, 1 usage error, 2 data or I/O error. Diagnostics go
to stderr; data goes to files or stdout. Set GRIPSTREAM_LOG=debug|info|...
for chattier logs.
"""

import argparse
import csv
import logging
import os
import socket
import sys
import threading
from datetime import datetime
from pathlib import Path

from gripstream.alerting import AlertPolicy, GripMonitor, format_alert, monitor_session
from gripstream.analytics import (
    AnovaResult,
    TwoWayAnova,
    anova_from_sessions,
    contribution_shares,
    population_average,
    sensor_profile,
)
from gripstream.core import (
    Calibration,
    Dominance,
    GloveConfig,
    Hand,
    Side,
    force_from_voltage,
    load_config,
)
from gripstream.errors import GripstreamError
from gripstream.ingest import (
    SENSOR_IDS,
    SessionBuilder,
    export_csv,
    load_sessions,
    record_session,
    session_summary,
)
from gripstream.simulate import (
    PRESETS,
    SessionPlan,
    WAVEFORMS,
    condition_gain,
    emit_frames,
    encode_session,
    get_preset,
    synthesize_session,
)
from gripstream.svgplot import render_profile_svg

log = logging.getLogger("gripstream")

DEFAULT_PORT = 7332


class CliUsageError(Exception):
    """Bad invocation; rendered as usage text with exit code 1."""

    def __init__(self, message: str, usage: str = ""):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    # argparse exits with code 2 on bad flags; this tool reserves 2 for
    # data errors, so route usage problems through an exception instead
    def error(self, message):
        raise CliUsageError(message, self.format_usage())


def _setup_logging() -> None:
    name = os.environ.get("GRIPSTREAM_LOG", "warning").upper()
    level = getattr(logging, name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")


def _now() -> str:
    return datetime.now().isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# flag parsing helpers (validate everything before touching any file)

def _parse_side(text: str) -> Side:
    try:
        return Side(text.upper())
    except ValueError:
        raise CliUsageError(f"hand must be L or R, got {text!r}") from None


def _parse_sides(text: str) -> list[Side]:
    key = text.upper()
    if key in ("BOTH", "LR", "RL"):
        return [Side.LEFT, Side.RIGHT]
    return [_parse_side(key)]


def _parse_sensor_list(text: str) -> list[int]:
    out = []
    for token in text.split(","):
        token = token.strip().upper().lstrip("S")
        try:
            sid = int(token)
        except ValueError:
            raise CliUsageError(f"bad sensor id {token!r}; use forms like S2 or 2") from None
        if sid not in SENSOR_IDS:
            raise CliUsageError(f"sensor id {sid} outside 1..12")
        if sid in out:
            raise CliUsageError(f"sensor S{sid} listed twice")
        out.append(sid)
    return out


def _parse_factors(text: str) -> list[str]:
    factors = [t.strip() for t in text.split(",") if t.strip()]
    if not 1 <= len(factors) <= 2:
        raise CliUsageError("--anova takes one or two of: hand, sensor, condition")
    return factors


def _load_setup(args) -> tuple[GloveConfig, Calibration]:
    if getattr(args, "config", None):
        return load_config(args.config)
    return GloveConfig(), Calibration()


def _policy_from_args(args) -> AlertPolicy:
    scope = frozenset(_parse_sensor_list(args.sensors)) if args.sensors else None
    try:
        return AlertPolicy(
            threshold_n=args.threshold,
            hysteresis_n=args.hysteresis,
            debounce=args.debounce,
            sensor_scope=scope,
        )
    except GripstreamError as exc:
        raise CliUsageError(str(exc)) from None


def _open_out(args):
    """Destination text stream for tabular/SVG output; '-' or unset = stdout."""
    if getattr(args, "out", None) in (None, "-"):
        return sys.stdout, False
    return open(args.out, "w", encoding="utf-8", newline=""), True


def _writer(fh) -> csv.writer:
    return csv.writer(fh, lineterminator="\n")


# ---------------------------------------------------------------------------
# subcommands

def _cmd_simulate(args) -> int:
    cfg, cal = _load_setup(args)
    try:
        preset = get_preset(args.preset)
    except GripstreamError as exc:
        raise CliUsageError(str(exc)) from None
    sides = _parse_sides(args.hand)
    dominant = _parse_side(args.dominant)
    if not args.out and not args.raw:
        raise CliUsageError("simulate needs --out DIR and/or --raw FILE")
    profile = preset.with_gains(
        condition=condition_gain(args.condition),
        noise_sd_mv=args.noise_sd,
    )
    plan = SessionPlan(
        profiles={side: profile for side in sides},
        duration_s=args.duration,
        seed=args.seed,
        dominant=dominant,
        waveform=args.waveform,
    )
    started = _now()
    trajectories = synthesize_session(plan, cal, cfg)
    for side, traj in trajectories.items():
        frames = emit_frames(traj, cal, cfg, side=side)
        blob = encode_session(frames)
        if args.raw:
            raw_path = Path(args.raw)
            if len(sides) > 1:
                raw_path = raw_path.with_name(f"{raw_path.stem}_{side.value}{raw_path.suffix}")
            raw_path.write_bytes(blob)
            log.info("wrote %d raw bytes to %s", len(blob), raw_path)
        if args.out:
            dominance = Dominance.DOMINANT if side is dominant else Dominance.NON_DOMINANT
            builder = SessionBuilder(
                subject=args.subject,
                condition=args.condition,
                hand=Hand(side=side, dominance=dominance),
                started_at=started,
            )
            builder.feed(blob)
            manifest = record_session(builder.session(), args.out)
            print(f"recorded {manifest.meta_path}", file=sys.stderr)
    return 0


def _serve_connection(conn, args, cfg, cal, policy, started, failures, lock) -> None:
    builder = SessionBuilder(
        subject=args.subject,
        condition=args.condition,
        dominant_side=_parse_side(args.dominant),
        started_at=started,
    )
    monitor = None
    cursor = 0
    watched = [sid for sid in SENSOR_IDS if policy.watches(sid)]
    try:
        with conn:
            while True:
                chunk = conn.recv(4096)
                if not chunk:
                    break
                _, events = builder.feed(chunk)
                for ev in events:
                    log.info("stream event %s at byte %d", ev.kind.name, ev.at_byte_offset)
                if monitor is None and builder.hand is not None:
                    monitor = GripMonitor(policy, glove=builder.hand.side)
                while cursor < builder.frames:
                    ts, volts = builder.frame_samples(cursor)
                    for sid in watched:
                        force = force_from_voltage(volts[sid - 1], cal, cfg)
                        for alert in monitor.step(sid, ts, force):
                            with lock:
                                print("\a" + format_alert(alert), file=sys.stderr, flush=True)
                    cursor += 1
        session = builder.session()
        summary = session_summary(session)
        if args.out:
            manifest = record_session(session, args.out)
            with lock:
                print(f"recorded {manifest.meta_path}", file=sys.stderr)
        with lock:
            print(
                f"session {session.stem}: {summary.frames} frames, "
                f"{summary.gap_count} gap(s), battery {summary.battery_final_mv} mV",
                file=sys.stderr,
            )
    except Exception as exc:  # surfaced after join; threads must not die silently
        with lock:
            failures.append(exc)


def _cmd_serve(args) -> int:
    cfg, cal = _load_setup(args)
    policy = _policy_from_args(args)
    _parse_side(args.dominant)
    if not 1 <= args.sessions <= 2:
        raise CliUsageError("--sessions must be 1 or 2 (one per glove)")
    with socket.create_server(("127.0.0.1", args.port)) as server:
        host, port = server.getsockname()
        print(f"listening on {host}:{port}", file=sys.stderr, flush=True)
        lock = threading.Lock()
        failures: list[Exception] = []
        threads = []
        for _ in range(args.sessions):
            conn, addr = server.accept()
            log.info("connection from %s:%d", *addr)
            t = threading.Thread(
                target=_serve_connection,
                args=(conn, args, cfg, cal, policy, _now(), failures, lock),
            )
            t.start()
            threads.append(t)
        for t in threads:
            t.join()
    if failures:
        raise failures[0]
    return 0


def _cmd_record(args) -> int:
    cfg, cal = _load_setup(args)
    dominant = _parse_side(args.dominant)
    if args.infile == "-":
        data = sys.stdin.buffer.read()
    else:
        data = Path(args.infile).read_bytes()
    builder = SessionBuilder(
        subject=args.subject,
        condition=args.condition,
        dominant_side=dominant,
        started_at=_now(),
    )
    appended, events = builder.feed(data)
    session = builder.session()
    manifest = record_session(session, args.out)
    print(f"recorded {manifest.meta_path}", file=sys.stderr)
    print(
        f"{session.frame_count} frames, {appended} samples, {len(events)} event(s)"
        + (f", {builder.pending_bytes} byte(s) of trailing partial frame" if builder.pending_bytes else ""),
        file=sys.stderr,
    )
    for ev in events:
        log.info("stream event %s at byte %d", ev.kind.name, ev.at_byte_offset)
    return 0


def _anova_rows(result) -> list[list]:
    def row(effect: str, r: AnovaResult) -> list:
        return [effect, f"{r.f_stat:.6g}", r.df_between, r.df_within, f"{r.p_value:.6g}"]

    if isinstance(result, TwoWayAnova):
        return [row(name, r) for name, r in result.effects.items()]
    return [row("group", result)]


def _cmd_analyze(args) -> int:
    cfg, cal = _load_setup(args)
    modes = [m for m in ("anova", "shares", "population") if getattr(args, m)]
    if len(modes) > 1:
        raise CliUsageError(f"pick one of --anova/--shares/--population, got {modes}")
    factors = _parse_factors(args.anova) if args.anova else None
    share_ids = _parse_sensor_list(args.shares) if args.shares else None
    pop_keys = _parse_factors(args.population) if args.population else None
    obs_sensors = _parse_sensor_list(args.sensors) if args.sensors else None

    sessions = load_sessions(args.indir)
    fh, own = _open_out(args)
    try:
        w = _writer(fh)
        if factors:
            result = anova_from_sessions(sessions, factors, cal, cfg, sensors=obs_sensors)
            w.writerow(["effect", "f_stat", "df_between", "df_within", "p_value"])
            w.writerows(_anova_rows(result))
        elif share_ids:
            w.writerow(["subject", "hand", "condition", "sensor", "share_pct"])
            for s in sessions:
                shares = contribution_shares(s, share_ids, cal, cfg)
                for sid in share_ids:
                    w.writerow(
                        [s.subject, s.hand.side.value, s.condition, f"S{sid}", f"{shares[sid]:.4f}"]
                    )
        elif pop_keys:
            keys = [k for k in ("hand", "sensor", "condition") if k in pop_keys]
            averages = population_average(sessions, keys, cal, cfg)
            w.writerow(keys + ["mean_force_n"])
            for key, value in averages.items():
                w.writerow(list(key) + [f"{value:.6g}"])
        else:
            w.writerow(
                ["subject", "hand", "condition", "frames", "duration_s", "gap_count",
                 "missing_frames", "min_voltage_mv", "max_voltage_mv", "battery_final_mv"]
            )
            for s in sessions:
                m = session_summary(s)
                w.writerow(
                    [m.subject, m.hand.side.value, m.condition, m.frames, f"{m.duration_s:.3f}",
                     m.gap_count, m.missing_frames, m.min_voltage_mv, m.max_voltage_mv,
                     m.battery_final_mv]
                )
    finally:
        if own:
            fh.close()
    return 0


def _cmd_plot(args) -> int:
    cfg, cal = _load_setup(args)
    sensor_ids = _parse_sensor_list(args.sensor)
    if args.units not in ("n", "mv"):
        raise CliUsageError("--units must be n or mv")
    sessions = load_sessions(args.indir)
    series = []
    for s in sessions:
        for sid in sensor_ids:
            label = f"{s.subject} {s.condition} {s.hand.side.value} S{sid}"
            if args.units == "n":
                series.append((label, sensor_profile(s, sid, cal, cfg).points))
            else:
                series.append((label, s.samples[sid]))
    y_label = "force (N)" if args.units == "n" else "voltage (mV)"
    svg = render_profile_svg(series, y_label=y_label, title=args.title)
    fh, own = _open_out(args)
    try:
        fh.write(svg)
    finally:
        if own:
            fh.close()
    log.info("plotted %d series", len(series))
    return 0


def _cmd_monitor(args) -> int:
    cfg, cal = _load_setup(args)
    policy = _policy_from_args(args)
    sessions = load_sessions(args.indir)
    fh, own = _open_out(args)
    total = 0
    try:
        for session in sessions:
            for alert in monitor_session(session, policy, cal, cfg):
                print(format_alert(alert), file=fh)
                total += 1
    finally:
        if own:
            fh.close()
    print(f"{total} alert(s) across {len(sessions)} session(s)", file=sys.stderr)
    return 0


def _cmd_export(args) -> int:
    _load_setup(args)  # validates --config even though export stays in millivolts
    sessions = load_sessions(args.indir)
    if args.out in (None, "-"):
        rows = export_csv(sessions, sys.stdout)
    else:
        rows = export_csv(sessions, args.out)
    print(f"exported {rows} row(s) from {len(sessions)} session(s)", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser assembly

def _add_policy_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threshold", type=float, default=8.0, help="alert threshold in newtons")
    p.add_argument("--hysteresis", type=float, default=0.5, help="release band in newtons")
    p.add_argument("--debounce", type=int, default=2, help="consecutive samples over threshold")
    p.add_argument("--sensors", help="comma-separated sensor scope, e.g. S2,S4")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="glove configuration file (key = value lines)")

    parser = _Parser(
        prog="gripstream",
        description="Grip-force glove telemetry toolkit: emulate, record, analyze.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("simulate", parents=[common],
                       help="synthesize sessions and write recordings/raw captures")
    p.add_argument("--preset", default="steady",
                   help=f"force profile preset ({', '.join(sorted(PRESETS))})")
    p.add_argument("--condition", default="quiet", help="condition label (soft, hardrock, ...)")
    p.add_argument("--hand", default="R", help="L, R, or both")
    p.add_argument("--dominant", default="R", help="which side is the dominant hand")
    p.add_argument("--subject", default="anon", help="subject id used in file names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--duration", type=float, default=10.0, help="task length in seconds")
    p.add_argument("--waveform", choices=WAVEFORMS, default="hold")
    p.add_argument("--noise-sd", dest="noise_sd", type=float, default=None,
                   help="sensor noise sd in millivolts (preset default if omitted)")
    p.add_argument("--out", help="directory for session files")
    p.add_argument("--raw", help="file for raw wire bytes (per side when --hand both)")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("serve", parents=[common],
                       help="listen on loopback, ingest live glove streams, alert, record")
    p.add_argument("--port", type=int, default=DEFAULT_PORT, help="TCP port (0 = ephemeral)")
    p.add_argument("--sessions", type=int, default=1, help="connections to accept (1 or 2)")
    p.add_argument("--subject", default="anon")
    p.add_argument("--condition", default="quiet")
    p.add_argument("--dominant", default="R")
    p.add_argument("--out", help="directory for session files")
    _add_policy_flags(p)
    p.set_defaults(handler=_cmd_serve)

    p = sub.add_parser("record", parents=[common],
                       help="decode a raw capture file into session files")
    p.add_argument("--in", dest="infile", required=True, help="capture file, or - for stdin")
    p.add_argument("--out", required=True, help="directory for session files")
    p.add_argument("--subject", default="anon")
    p.add_argument("--condition", default="quiet")
    p.add_argument("--dominant", default="R")
    p.set_defaults(handler=_cmd_record)

    p = sub.add_parser("analyze", parents=[common],
                       help="summaries, contribution shares, population means, ANOVA")
    p.add_argument("--in", dest="indir", required=True, help="directory of recorded sessions")
    p.add_argument("--anova", help="factor(s): one or two of hand,sensor,condition")
    p.add_argument("--shares", help="sensor subset for contribution shares, e.g. S2,S3,S4,S5")
    p.add_argument("--population", help="group keys for population means")
    p.add_argument("--sensors", help="restrict ANOVA observations to these sensors")
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.set_defaults(handler=_cmd_analyze)

    p = sub.add_parser("plot", parents=[common], help="render profiles as an SVG chart")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--sensor", default="S2,S4", help="sensors to plot")
    p.add_argument("--units", default="n", help="n (newtons) or mv (raw millivolts)")
    p.add_argument("--title", default="grip force profiles")
    p.add_argument("--out", help="SVG destination (default stdout)")
    p.set_defaults(handler=_cmd_plot)

    p = sub.add_parser("monitor", parents=[common],
                       help="replay recordings through the over-force monitor")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--out", help="alert log destination (default stdout)")
    _add_policy_flags(p)
    p.set_defaults(handler=_cmd_monitor)

    p = sub.add_parser("export", parents=[common], help="flatten recordings into one CSV")
    p.add_argument("--in", dest="indir", required=True)
    p.add_argument("--out", help="CSV destination (default stdout)")
    p.set_defaults(handler=_cmd_export)

    return parser


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.usage:
            print(exc.usage, end="", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except CliUsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GripstreamError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
