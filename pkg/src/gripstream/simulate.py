"""Glove emulator: force trajectories, frame emission, paced streaming.

A SessionPlan describes one recording session for one or two gloves. Each
glove gets a ProfilePreset: 12 per-sensor base forces plus gain knobs for
the experimental condition (music) and hand dominance. Trajectories are
base * condition_gain * hand_gain * waveform(t) plus seeded Gaussian sensor
noise, clamped to the 0..20 N range the sensors are characterized for.

Noise is specified in millivolts (it is sensor-front-end noise) and mapped
into force units through the calibration anchor slope. The PRNG is numpy
PCG64 seeded via SeedSequence([seed, glove_index]) and spawned once per
sensor, so trajectories are reproducible and independent per channel.
"""

import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from gripstream.core import Calibration, GloveConfig, Side, parse_kv_text, voltage_from_force
from gripstream.errors import ConfigError, GripstreamError
from gripstream.protocol import BATTERY_LIMIT_MV, Frame, encode_frame

FORCE_CEILING_N = 20.0

WAVEFORM_HOLD = "hold"
WAVEFORM_LIFT = "lift"
WAVEFORMS = (WAVEFORM_HOLD, WAVEFORM_LIFT)

PACE_FAST = "fast"
PACE_REALTIME = "realtime"

# fingertip channel for each long finger in the standard layout
FINGERTIP_SENSOR = {"index": 2, "middle": 3, "ring": 4, "little": 5}

# condition label -> grip effort multiplier; aggressive music drives harder grips
CONDITION_GAINS = {"quiet": 1.0, "soft": 1.0, "hardrock": 1.3}

DOMINANT_HAND_GAIN = 1.15


def condition_gain(label: str) -> float:
    return CONDITION_GAINS.get(label, 1.0)


@dataclass(frozen=True)
class ProfilePreset:
    """Per-sensor force shape for one glove."""

    name: str
    base_force_n: tuple[float, ...]
    contribution: dict[str, float] | None = None
    condition_gain: float = 1.0
    hand_gain: float = DOMINANT_HAND_GAIN
    noise_sd_mv: float = 5.0
    duration_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "base_force_n", tuple(float(f) for f in self.base_force_n))
        if len(self.base_force_n) != 12:
            raise ConfigError(f"preset needs 12 base forces, got {len(self.base_force_n)}")
        for f in self.base_force_n:
            if not 0.0 <= f <= FORCE_CEILING_N:
                raise ConfigError(f"base force {f} N outside [0, {FORCE_CEILING_N}]")
        if self.condition_gain < 0 or self.hand_gain < 0:
            raise ConfigError("gains must be non-negative")
        if self.noise_sd_mv < 0:
            raise ConfigError("noise sd must be non-negative")
        if self.duration_scale <= 0:
            raise ConfigError("duration scale must be positive")
        if self.contribution is not None:
            total = sum(self.contribution.values())
            # reference tables arrive rounded, so the sum can miss 100 slightly
            if not 98.0 <= total <= 102.0:
                raise ConfigError(f"contribution shares must sum to ~100, got {total}")

    def scaled(self, factor: float) -> "ProfilePreset":
        """Same profile with base forces scaled (e.g. per-subject strength)."""
        if factor < 0:
            raise ConfigError("scale factor must be non-negative")
        scaled = tuple(min(f * factor, FORCE_CEILING_N) for f in self.base_force_n)
        return replace(self, base_force_n=scaled)

    def with_gains(self, condition: float | None = None, hand: float | None = None,
                   noise_sd_mv: float | None = None) -> "ProfilePreset":
        kw = {}
        if condition is not None:
            kw["condition_gain"] = condition
        if hand is not None:
            kw["hand_gain"] = hand
        if noise_sd_mv is not None:
            kw["noise_sd_mv"] = noise_sd_mv
        return replace(self, **kw)


def _bases(per_sensor: dict[int, float], default: float) -> tuple[float, ...]:
    return tuple(per_sensor.get(sid, default) for sid in range(1, 13))


def contribution_preset(
    name: str,
    shares: dict[str, float],
    fingertip_total_n: float = 12.0,
    thumb_force_n: float = 3.0,
    support_force_n: float = 0.5,
    **kwargs,
) -> ProfilePreset:
    """Preset whose long-finger fingertip forces follow a percentage table.

    shares maps finger name (index/middle/ring/little) to its percentage of
    the summed fingertip force. Base forces are proportional to the table,
    so a noise-free run recovers the (normalized) table as its shares.
    """
    unknown = set(shares) - set(FINGERTIP_SENSOR)
    if unknown:
        raise ConfigError(f"unknown fingers in share table: {sorted(unknown)}")
    per_sensor = {FINGERTIP_SENSOR[f]: fingertip_total_n * pct / 100.0 for f, pct in shares.items()}
    per_sensor[1] = thumb_force_n
    return ProfilePreset(
        name=name,
        base_force_n=_bases(per_sensor, support_force_n),
        contribution=dict(shares),
        **kwargs,
    )


def _builtin_presets() -> dict[str, ProfilePreset]:
    presets = [
        # flat mid-range grip, handy for smoke tests
        ProfilePreset("steady", _bases({1: 3.0, 2: 2.0, 3: 2.0, 4: 2.0, 5: 2.0}, 1.0)),
        # five-finger precision lifting: index-dominated share table
        contribution_preset(
            "precision_lift",
            {"index": 42.0, "middle": 27.4, "ring": 17.6, "little": 12.9},
            fingertip_total_n=20.0,
        ),
        # power grip strength survey: middle/ring carry the load
        contribution_preset(
            "power_grip",
            {"index": 17.0, "middle": 22.0, "ring": 31.0, "little": 29.0},
            fingertip_total_n=20.0,
        ),
        # trained operator: subtle little-finger control, light gross force,
        # finishes the task faster
        ProfilePreset(
            "expert",
            _bases({1: 2.0, 2: 2.2, 3: 2.0, 4: 2.5, 5: 3.0, 10: 1.5, 11: 1.2}, 0.8),
            duration_scale=0.7,
        ),
        # first-time operator: gross middle-finger force, little finger idle
        ProfilePreset(
            "novice",
            _bases({1: 3.5, 2: 3.0, 3: 3.5, 4: 2.0, 5: 1.5, 10: 2.5, 11: 2.0}, 1.0),
        ),
    ]
    return {p.name: p for p in presets}


PRESETS = _builtin_presets()


def get_preset(name: str) -> ProfilePreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


@dataclass
class SessionPlan:
    """One or two gloves, a duration, a waveform, and a seed."""

    profiles: dict[Side, ProfilePreset]
    duration_s: float = 10.0
    seed: int = 0
    dominant: Side = Side.RIGHT
    waveform: str = WAVEFORM_HOLD
    lift_period_s: float = 2.0

    def __post_init__(self):
        if not self.profiles or len(self.profiles) > 2:
            raise ConfigError("plan needs a profile for one or two gloves")
        if self.duration_s <= 0:
            raise ConfigError("duration must be positive")
        if self.waveform not in WAVEFORMS:
            raise ConfigError(f"waveform must be one of {WAVEFORMS}, got {self.waveform!r}")
        if self.lift_period_s <= 0:
            raise ConfigError("lift period must be positive")

    @property
    def gloves(self) -> int:
        return len(self.profiles)


def waveform_envelope(kind: str, lift_period_s: float, t_s: np.ndarray) -> np.ndarray:
    """Unitless 0..1 force envelope over time."""
    if kind == WAVEFORM_HOLD:
        return np.ones_like(t_s)
    # raised cosine per lift: zero at cycle boundaries, peak mid-lift
    return 0.5 * (1.0 - np.cos(2.0 * math.pi * t_s / lift_period_s))


def synthesize_session(
    plan: SessionPlan,
    cal: Calibration | None = None,
    cfg: GloveConfig | None = None,
) -> dict[Side, np.ndarray]:
    """Per-glove (12, n) arrays of forces in newtons, one column per tick.

    Deterministic for a given plan and seed; noise-free when the profile's
    noise_sd_mv is zero.
    """
    cal = cal or Calibration()
    cfg = cfg or GloveConfig()
    out: dict[Side, np.ndarray] = {}
    for glove_index, side in enumerate((Side.LEFT, Side.RIGHT)):
        profile = plan.profiles.get(side)
        if profile is None:
            continue
        n = round(plan.duration_s * profile.duration_scale * 1000.0 / cfg.sample_period_ms)
        if n <= 0:
            raise ConfigError("plan produces no samples; increase duration")
        t_s = np.arange(n) * (cfg.sample_period_ms / 1000.0)
        envelope = waveform_envelope(plan.waveform, plan.lift_period_s, t_s)
        gain = profile.condition_gain * (profile.hand_gain if side is plan.dominant else 1.0)
        forces = np.asarray(profile.base_force_n)[:, None] * gain * envelope[None, :]
        if profile.noise_sd_mv > 0:
            sd_n = profile.noise_sd_mv * cal.anchor_force_n / cal.anchor_voltage_mv
            children = np.random.SeedSequence([plan.seed, glove_index]).spawn(12)
            for s in range(12):
                forces[s] += np.random.default_rng(children[s]).normal(0.0, sd_n, n)
        np.clip(forces, 0.0, FORCE_CEILING_N, out=forces)
        out[side] = forces
    return out


def emit_frames(
    trajectories: np.ndarray,
    cal: Calibration | None = None,
    cfg: GloveConfig | None = None,
    side: Side = Side.RIGHT,
    battery_start_mv: int = 4200,
    battery_drain_mv_per_s: float = 1.0,
) -> list[Frame]:
    """Quantize a (12, n) force trajectory into n wire frames.

    Frame k is stamped k * sample_period with sequence k mod 65536; forces
    outside the calibrated range raise before anything is emitted.
    """
    cal = cal or Calibration()
    cfg = cfg or GloveConfig()
    traj = np.asarray(trajectories, dtype=float)
    if traj.ndim != 2 or traj.shape[0] != 12:
        raise ConfigError(f"trajectories must be shaped (12, n), got {traj.shape}")
    frames = []
    for k in range(traj.shape[1]):
        ts = round(k * cfg.sample_period_ms)
        volts = tuple(
            int(round(voltage_from_force(float(traj[s, k]), cal, cfg))) for s in range(12)
        )
        battery = int(round(battery_start_mv - battery_drain_mv_per_s * ts / 1000.0))
        battery = min(max(battery, 0), BATTERY_LIMIT_MV)
        frames.append(
            Frame(
                glove=side,
                seq=k & 0xFFFF,
                timestamp_ms=ts,
                battery_mv=battery,
                voltages_mv=volts,
            )
        )
    return frames


@dataclass
class EmissionReport:
    frames_sent: int = 0
    bytes_sent: int = 0
    elapsed_s: float = 0.0
    max_jitter_ms: float | None = None


class EmissionError(GripstreamError):
    """Transport failed mid-stream; .report covers what was sent."""

    def __init__(self, message: str, report: EmissionReport):
        super().__init__(message)
        self.report = report


def stream_session(frames, sink, pace: str = PACE_FAST) -> EmissionReport:
    """Write encoded frames to a byte sink, optionally paced in real time.

    In realtime pace each frame is scheduled at its own timestamp relative
    to the first; the report records the worst deviation from that schedule.
    """
    if pace not in (PACE_FAST, PACE_REALTIME):
        raise ConfigError(f"pace must be '{PACE_FAST}' or '{PACE_REALTIME}', got {pace!r}")
    report = EmissionReport(max_jitter_ms=0.0 if pace == PACE_REALTIME else None)
    start = time.monotonic()
    base_ts = None
    for frame in frames:
        data = encode_frame(frame)
        if pace == PACE_REALTIME:
            if base_ts is None:
                base_ts = frame.timestamp_ms
            due = start + (frame.timestamp_ms - base_ts) / 1000.0
            delay = due - time.monotonic()
            if delay > 0:
                time.sleep(delay)
            jitter = abs(time.monotonic() - due) * 1000.0
            report.max_jitter_ms = max(report.max_jitter_ms, jitter)
        try:
            sink.write(data)
        except OSError as exc:
            report.elapsed_s = time.monotonic() - start
            raise EmissionError(f"transport failed after {report.frames_sent} frames: {exc}", report)
        report.frames_sent += 1
        report.bytes_sent += len(data)
    flush = getattr(sink, "flush", None)
    if flush is not None:
        try:
            flush()
        except OSError as exc:
            report.elapsed_s = time.monotonic() - start
            raise EmissionError(f"transport failed on flush: {exc}", report)
    report.elapsed_s = time.monotonic() - start
    return report


def encode_session(frames) -> bytes:
    """Concatenated wire bytes for a frame sequence (file capture form)."""
    buf = io.BytesIO()
    stream_session(frames, buf, PACE_FAST)
    return buf.getvalue()


def load_plan_file(path: str | Path) -> dict[str, str]:
    """Raw key-value pairs of a plan file; interpretation is up to the CLI."""
    return parse_kv_text(Path(path).read_text(encoding="utf-8"))
