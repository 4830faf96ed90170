"""Energy metering over monotonically wrapping hardware counters.

The sysfs backend reads Intel RAPL zones exposed by the Linux powercap
framework (``intel-rapl:N`` package zones, ``intel-rapl:N:M`` subzones);
the simulated backend draws a constant configurable wattage against an
injectable clock so tests and deterministic runs need no hardware at all.

Counters are cumulative microjoule registers that wrap at a per-zone
maximum, so consumption across one wrap is recovered as
``(end - start + max) mod max``.
"""

from __future__ import annotations

import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterator, Optional

RAPL_ROOT_ENV = "PET_RAPL_ROOT"
DEFAULT_RAPL_ROOT = "/sys/class/powercap"


class UnsupportedPlatformError(RuntimeError):
    """No usable energy counters on this machine."""


class PermissionDeniedError(RuntimeError):
    """Counters exist but are not readable by this process."""


class SessionOverlapError(RuntimeError):
    """A meter can only time one unit of work at a time."""


def consumed_microjoules(start: int, end: int, max_energy: int) -> int:
    """Microjoules consumed between two counter readings, wrap-corrected.

    Assumes at most one wrap between the readings; more cannot be detected
    from two samples of a modular counter.
    """
    if max_energy <= 0:
        raise ValueError("max_energy must be positive")
    if not (0 <= start < max_energy and 0 <= end < max_energy):
        raise ValueError("counter readings must lie within [0, max_energy)")
    return (end - start + max_energy) % max_energy


@dataclass(frozen=True)
class CounterReading:
    energy_uj: int
    max_energy_uj: int
    timestamp: float


@dataclass(frozen=True)
class EnergySample:
    """One metered unit of work: total joules, per-domain breakdown, duration."""

    label: str
    backend: str
    joules: float
    duration_s: float
    domains: dict[str, float]
    wrapped: bool
    t_start: float
    t_end: float
    adjusted_joules: Optional[float] = None
    idle_watts: Optional[float] = None
    clamped: bool = False


@dataclass(frozen=True)
class IdleBaseline:
    watts: float
    duration_s: float
    joules: float
    backend: str


@dataclass(frozen=True)
class SysfsRapl:
    """Powercap sysfs backend config; root defaults to $PET_RAPL_ROOT or
    /sys/class/powercap."""

    root: Optional[str] = None


@dataclass(frozen=True)
class SimulatedPower:
    """Constant-draw backend: joules are watts times elapsed clock seconds."""

    watts: float
    clock: Optional[Callable[[], float]] = None  # None = wall clock


class VirtualClock:
    """Deterministic clock advancing a fixed step per reading."""

    def __init__(self, step: float = 1.0, start: float = 0.0):
        self.step = float(step)
        self.t = float(start)

    def __call__(self) -> float:
        self.t += self.step
        return self.t


class ManualClock:
    """Clock that only moves when the caller advances it (for tests)."""

    def __init__(self, start: float = 0.0):
        self.t = float(start)

    def advance(self, dt: float) -> None:
        self.t += float(dt)

    def __call__(self) -> float:
        return self.t


class MeasureHandle:
    """Filled with the finished sample when a measuring session exits."""

    sample: Optional[EnergySample] = None


class Meter:
    """Base meter: one active measuring session at a time."""

    backend_name = "abstract"

    def __init__(self):
        self._active: Optional[str] = None

    @property
    def domains(self) -> tuple[str, ...]:
        raise NotImplementedError

    def _now(self) -> float:
        raise NotImplementedError

    def _read_domains(self) -> dict[str, list[tuple[int, int]]]:
        """Per-domain list of (counter_uj, max_uj) zone readings."""
        raise NotImplementedError

    @contextmanager
    def session(self, label: str) -> Iterator[MeasureHandle]:
        if self._active is not None:
            raise SessionOverlapError(
                f"measurement {self._active!r} is still running; nested sessions "
                "on one meter are not allowed"
            )
        self._active = label
        handle = MeasureHandle()
        t0 = self._now()
        start = self._read_domains()
        try:
            yield handle
        finally:
            t1 = self._now()
            end = self._read_domains()
            self._active = None
            handle.sample = self._build_sample(label, t0, t1, start, end)

    def measure(self, label: str, work: Callable[[], object]) -> EnergySample:
        """Run ``work`` and return the energy sample; its return value is dropped."""
        with self.session(label) as handle:
            work()
        return handle.sample

    def _build_sample(self, label, t0, t1, start, end) -> EnergySample:
        domains: dict[str, float] = {}
        wrapped = False
        for domain, start_zones in start.items():
            end_zones = end[domain]
            uj = 0
            for (s, max_uj), (e, _) in zip(start_zones, end_zones):
                if e < s:
                    wrapped = True
                uj += consumed_microjoules(s, e, max_uj)
            domains[domain] = uj / 1e6
        total = float(sum(domains.values()))
        return EnergySample(
            label=label,
            backend=self.backend_name,
            joules=total,
            duration_s=t1 - t0,
            domains=domains,
            wrapped=wrapped,
            t_start=t0,
            t_end=t1,
        )

    def idle_baseline(self, duration_s: float) -> IdleBaseline:
        """Average draw while deliberately doing nothing for ``duration_s``."""
        if duration_s < 1.0:
            raise ValueError("idle measurement needs at least one second to be meaningful")
        sample = self.measure("idle", lambda: self._idle_wait(duration_s))
        watts = sample.joules / sample.duration_s if sample.duration_s > 0 else 0.0
        return IdleBaseline(
            watts=watts,
            duration_s=sample.duration_s,
            joules=sample.joules,
            backend=self.backend_name,
        )

    def _idle_wait(self, duration_s: float) -> None:
        time.sleep(duration_s)


class SysfsRaplMeter(Meter):
    backend_name = "powercap-sysfs"

    def __init__(self, zones: dict[str, list[tuple[Path, int]]]):
        super().__init__()
        self._zones = zones  # domain -> [(energy_uj path, max_uj)]

    @property
    def domains(self) -> tuple[str, ...]:
        return tuple(self._zones)

    def _now(self) -> float:
        return time.monotonic()

    def _read_domains(self) -> dict[str, list[tuple[int, int]]]:
        out: dict[str, list[tuple[int, int]]] = {}
        for domain, zones in self._zones.items():
            out[domain] = [(_read_counter(path), max_uj) for path, max_uj in zones]
        return out


class SimulatedMeter(Meter):
    backend_name = "simulated"

    def __init__(self, watts: float, clock: Optional[Callable[[], float]] = None):
        super().__init__()
        if watts < 0:
            raise ValueError("watts must be non-negative")
        self.watts = float(watts)
        self._clock = clock or time.monotonic
        self._max_uj = 1 << 60
        self._pending_t: Optional[float] = None

    @property
    def domains(self) -> tuple[str, ...]:
        return ("package",)

    def _now(self) -> float:
        # one clock reading serves both the timestamp and the counter value
        self._pending_t = self._clock()
        return self._pending_t

    def _read_domains(self) -> dict[str, list[tuple[int, int]]]:
        t = self._pending_t if self._pending_t is not None else self._clock()
        uj = int(round(self.watts * t * 1e6)) % self._max_uj
        return {"package": [(uj, self._max_uj)]}

    def idle_baseline(self, duration_s: float) -> IdleBaseline:
        # constant draw by definition: no need to actually wait
        if duration_s < 1.0:
            raise ValueError("idle measurement needs at least one second to be meaningful")
        return IdleBaseline(
            watts=self.watts,
            duration_s=float(duration_s),
            joules=self.watts * duration_s,
            backend=self.backend_name,
        )


def _read_counter(path: Path) -> int:
    try:
        return int(path.read_text().strip())
    except PermissionError as exc:
        raise PermissionDeniedError(
            f"cannot read {path}: energy counters usually need elevated permissions; "
            "either relax the sysfs ACLs or use the simulated backend"
        ) from exc


def _zone_name(zone_dir: Path) -> str:
    try:
        return (zone_dir / "name").read_text().strip()
    except PermissionError as exc:
        raise PermissionDeniedError(
            f"cannot read {zone_dir / 'name'}: energy counters usually need elevated "
            "permissions; either relax the sysfs ACLs or use the simulated backend"
        ) from exc


def open_meter(backend: SysfsRapl | SimulatedPower) -> Meter:
    """Build a meter for the chosen backend, enumerating its energy domains.

    Sysfs package zones aggregate into the ``package`` domain, ``dram``
    subzones into ``memory``.  A package domain is required; memory is
    optional.
    """
    if isinstance(backend, SimulatedPower):
        return SimulatedMeter(backend.watts, backend.clock)
    if not isinstance(backend, SysfsRapl):
        raise TypeError(f"unknown backend {backend!r}")

    root = Path(backend.root or os.environ.get(RAPL_ROOT_ENV) or DEFAULT_RAPL_ROOT)
    if not root.is_dir():
        raise UnsupportedPlatformError(
            f"{root} does not exist: no powercap support here; "
            "use the simulated backend instead"
        )
    zones: dict[str, list[tuple[Path, int]]] = {}
    for zone_dir in sorted(root.iterdir()):
        name = zone_dir.name
        if not name.startswith("intel-rapl:") or ":" in name.split("intel-rapl:", 1)[1]:
            continue  # only top-level zones here; subzones handled below
        if _zone_name(zone_dir).startswith("package"):
            _add_zone(zones, "package", zone_dir)
            for sub_dir in sorted(zone_dir.iterdir()):
                if sub_dir.is_dir() and sub_dir.name.startswith(name + ":"):
                    if _zone_name(sub_dir) == "dram":
                        _add_zone(zones, "memory", sub_dir)
    if "package" not in zones:
        raise UnsupportedPlatformError(
            f"no intel-rapl package zone under {root}; "
            "this machine has no RAPL counters, use the simulated backend"
        )
    return SysfsRaplMeter(zones)


def _add_zone(zones: dict, domain: str, zone_dir: Path) -> None:
    max_uj = _read_counter(zone_dir / "max_energy_range_uj")
    zones.setdefault(domain, []).append((zone_dir / "energy_uj", max_uj))


def measure(meter: Meter, label: str, work: Callable[[], object]) -> EnergySample:
    return meter.measure(label, work)


def measure_idle(meter: Meter, duration_s: float) -> IdleBaseline:
    return meter.idle_baseline(duration_s)


def adjust(sample: EnergySample, baseline: IdleBaseline) -> EnergySample:
    """Subtract the idle draw over the sample's duration, clamping at zero.

    Returns a copy carrying both the raw and the adjusted joules.
    """
    idle_joules = baseline.watts * sample.duration_s
    adjusted = sample.joules - idle_joules
    clamped = adjusted < 0.0
    return replace(
        sample,
        adjusted_joules=max(0.0, adjusted),
        idle_watts=baseline.watts,
        clamped=clamped,
    )
