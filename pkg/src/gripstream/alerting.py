"""Real-time over-force alerting with debounce and hysteresis.

A GripMonitor watches converted forces sample by sample. An alert opens
once `debounce` consecutive samples exceed the threshold (so a single noisy
spike stays quiet) and closes only when force drops below threshold minus
hysteresis (so values rattling around the threshold cannot flap). At most
one alert is open per sensor at a time.

AlertEvent objects are handed out the moment an alert opens and are updated
in place as the episode evolves: peak_force_n grows while the alert is open
and cleared_timestamp_ms is filled in on release. Holding the returned
event therefore always shows the current state of that episode.
"""

from dataclasses import dataclass

from gripstream.core import Calibration, GloveConfig, Side
from gripstream.errors import ConfigError, GripstreamError
from gripstream.ingest import SENSOR_IDS, Session


class SequencingError(GripstreamError):
    """A sensor's samples arrived out of time order."""


@dataclass(frozen=True)
class AlertPolicy:
    threshold_n: float = 8.0
    hysteresis_n: float = 0.5
    debounce: int = 2
    sensor_scope: frozenset[int] | None = None

    def __post_init__(self):
        if self.hysteresis_n < 0:
            raise ConfigError("hysteresis must be >= 0")
        if self.threshold_n <= self.hysteresis_n:
            raise ConfigError(
                f"threshold ({self.threshold_n} N) must exceed hysteresis ({self.hysteresis_n} N)"
            )
        if self.debounce < 1:
            raise ConfigError("debounce must be >= 1")
        if self.sensor_scope is not None:
            scope = frozenset(int(s) for s in self.sensor_scope)
            bad = [s for s in scope if s not in SENSOR_IDS]
            if bad:
                raise ConfigError(f"sensor scope has unknown ids {sorted(bad)}")
            if not scope:
                raise ConfigError("sensor scope must be None or non-empty")
            object.__setattr__(self, "sensor_scope", scope)

    def watches(self, sensor: int) -> bool:
        return self.sensor_scope is None or sensor in self.sensor_scope

    @property
    def clear_level_n(self) -> float:
        return self.threshold_n - self.hysteresis_n


@dataclass
class AlertEvent:
    glove: Side
    sensor: int
    onset_timestamp_ms: int
    peak_force_n: float
    cleared_timestamp_ms: int | None = None

    @property
    def open(self) -> bool:
        return self.cleared_timestamp_ms is None


def format_alert(event: AlertEvent) -> str:
    return (
        f"ALERT glove={event.glove.value} sensor=S{event.sensor} "
        f"onset={event.onset_timestamp_ms} peak={event.peak_force_n:.2f}"
    )


@dataclass
class _SensorState:
    last_ts: int | None = None
    run_count: int = 0
    run_peak: float = 0.0
    active: AlertEvent | None = None


class GripMonitor:
    """Per-glove alert state machine; feed samples in time order per sensor."""

    def __init__(self, policy: AlertPolicy | None = None, glove: Side = Side.RIGHT):
        self.policy = policy or AlertPolicy()
        self.glove = glove
        self.alerts: list[AlertEvent] = []
        self._states: dict[int, _SensorState] = {sid: _SensorState() for sid in SENSOR_IDS}

    @property
    def open_alerts(self) -> list[AlertEvent]:
        return [a for a in self.alerts if a.open]

    def step(self, sensor: int, timestamp_ms: int, force_n: float) -> list[AlertEvent]:
        """Advance one sample; returns alerts that opened at this sample.

        Peak updates and clears mutate previously returned events rather
        than producing new ones, so len(monitor.alerts) counts episodes.
        """
        state = self._states.get(sensor)
        if state is None:
            raise ConfigError(f"unknown sensor id {sensor}")
        if state.last_ts is not None and timestamp_ms <= state.last_ts:
            raise SequencingError(
                f"sensor S{sensor} sample at {timestamp_ms} ms not after {state.last_ts} ms"
            )
        state.last_ts = timestamp_ms
        if not self.policy.watches(sensor):
            return []
        pol = self.policy
        if state.active is not None:
            alert = state.active
            alert.peak_force_n = max(alert.peak_force_n, force_n)
            if force_n < pol.clear_level_n:
                alert.cleared_timestamp_ms = timestamp_ms
                state.active = None
            return []
        if force_n > pol.threshold_n:
            state.run_count += 1
            state.run_peak = max(state.run_peak, force_n)
            if state.run_count >= pol.debounce:
                alert = AlertEvent(
                    glove=self.glove,
                    sensor=sensor,
                    onset_timestamp_ms=timestamp_ms,
                    peak_force_n=state.run_peak,
                )
                state.active = alert
                state.run_count = 0
                state.run_peak = 0.0
                self.alerts.append(alert)
                return [alert]
        else:
            state.run_count = 0
            state.run_peak = 0.0
        return []


def monitor_session(
    session: Session,
    policy: AlertPolicy | None = None,
    cal: Calibration | None = None,
    cfg: GloveConfig | None = None,
) -> list[AlertEvent]:
    """Replay a recorded session through a monitor; returns all episodes.

    Events still open at the end of the session keep cleared=None.
    """
    from gripstream.analytics import sensor_profile

    policy = policy or AlertPolicy()
    monitor = GripMonitor(policy, glove=session.hand.side)
    watched = [sid for sid in SENSOR_IDS if policy.watches(sid)]
    profiles = {sid: sensor_profile(session, sid, cal, cfg).points for sid in watched}
    for i in range(session.frame_count):
        for sid in watched:
            ts, force = profiles[sid][i]
            monitor.step(sid, ts, force)
    return monitor.alerts
