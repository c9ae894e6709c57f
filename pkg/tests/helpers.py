"""Shared fixtures-by-hand for the test suite."""

import random

from gripstream.core import Dominance, Hand, Side
from gripstream.ingest import Session, SessionBuilder
from gripstream.protocol import BATTERY_LIMIT_MV, VOLTAGE_LIMIT_MV, Frame, encode_frame


def random_frame(rng: random.Random, glove: Side | None = None, seq: int | None = None,
                 timestamp_ms: int | None = None) -> Frame:
    return Frame(
        glove=glove if glove is not None else rng.choice((Side.LEFT, Side.RIGHT)),
        seq=rng.randrange(0x10000) if seq is None else seq,
        timestamp_ms=rng.randrange(2**32) if timestamp_ms is None else timestamp_ms,
        battery_mv=rng.randrange(BATTERY_LIMIT_MV + 1),
        voltages_mv=tuple(rng.randrange(VOLTAGE_LIMIT_MV) for _ in range(12)),
    )


def frame_run(rng: random.Random, count: int, glove: Side = Side.RIGHT,
              start_seq: int = 0, period_ms: int = 20) -> list[Frame]:
    """`count` well-ordered frames: consecutive seq, strictly increasing time."""
    return [
        Frame(
            glove=glove,
            seq=(start_seq + k) & 0xFFFF,
            timestamp_ms=k * period_ms,
            battery_mv=4200 - k // 50,
            voltages_mv=tuple(rng.randrange(VOLTAGE_LIMIT_MV) for _ in range(12)),
        )
        for k in range(count)
    ]


def wire(frames) -> bytes:
    return b"".join(encode_frame(f) for f in frames)


def build_session(frames, subject: str = "anon", condition: str = "quiet",
                  dominance: Dominance = Dominance.DOMINANT) -> Session:
    glove = frames[0].glove if frames else Side.RIGHT
    builder = SessionBuilder(
        subject=subject,
        condition=condition,
        hand=Hand(side=glove, dominance=dominance),
        started_at="2026-01-05T09:00:00",
    )
    builder.feed(wire(frames))
    return builder.session()
