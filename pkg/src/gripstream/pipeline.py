"""End-to-end glue: plan -> synthesized frames -> wire bytes -> Session.

This is the same path a live capture takes (encode then decode), so
anything asserted on these sessions holds for the transport pipeline too.
"""

from gripstream.core import Calibration, Dominance, GloveConfig, Hand, Side
from gripstream.ingest import Session, SessionBuilder
from gripstream.simulate import SessionPlan, emit_frames, encode_session, synthesize_session


def run_plan(
    plan: SessionPlan,
    subject: str = "anon",
    condition: str = "quiet",
    cal: Calibration | None = None,
    cfg: GloveConfig | None = None,
    started_at: str = "",
) -> dict[Side, Session]:
    """Execute a session plan through the full codec round trip."""
    cal = cal or Calibration()
    cfg = cfg or GloveConfig()
    trajectories = synthesize_session(plan, cal, cfg)
    sessions: dict[Side, Session] = {}
    for side, traj in trajectories.items():
        frames = emit_frames(traj, cal, cfg, side=side)
        blob = encode_session(frames)
        dominance = Dominance.DOMINANT if side is plan.dominant else Dominance.NON_DOMINANT
        builder = SessionBuilder(
            subject=subject,
            condition=condition,
            hand=Hand(side=side, dominance=dominance),
            started_at=started_at,
        )
        builder.feed(blob)
        sessions[side] = builder.session()
    return sessions
