"""Top-level wiring: one facility, its engines, and the simulated clock.

advance_to() interleaves exact storage-transfer events, outage calendar
boundaries, and scheduler ticks in time order, which is what makes whole
runs deterministic.
"""

from fractions import Fraction

from .auth import AuthConfig, AuthService
from .errors import SfError
from .eventlog import EventLog
from .facility import Facility, SystemKind
from .scheduler import Scheduler, SchedulerConfig
from .storage import StorageEngine


class Superfacility:
    def __init__(self, scheduler_config: SchedulerConfig | None = None,
                 auth_config: AuthConfig | None = None, seed: int = 0):
        self.log = EventLog()
        self.facility = Facility(log=self.log)
        self.storage = StorageEngine(self.facility)
        self.auth = AuthService(self.facility, auth_config, seed=seed)
        self.scheduler_config = scheduler_config or SchedulerConfig()
        self.schedulers: dict[str, Scheduler] = {}
        # named commands the utilities endpoint may execute
        self.commands: dict[str, callable] = {}

    @property
    def now(self):
        return self.facility.now

    def add_compute(self, descriptor, pool, config: SchedulerConfig | None = None) -> Scheduler:
        self.facility.register_system(descriptor, pool)
        sched = Scheduler(self.facility, descriptor.name, config or self.scheduler_config)
        self.schedulers[descriptor.name] = sched
        return sched

    def scheduler(self, system: str | None = None) -> Scheduler:
        if system is not None:
            s = self.schedulers.get(system)
            if s is None:
                raise SfError("unknown-system", f"no compute system {system}")
            return s
        if not self.schedulers:
            raise SfError("unknown-system", "no compute system registered")
        return next(iter(self.schedulers.values()))

    def register_command(self, name: str, fn):
        self.commands[name] = fn

    def _next_tick(self, sched: Scheduler):
        if sched.last_tick is None:
            return self.now  # first tick fires immediately
        return sched.last_tick + sched.config.quantum_seconds

    def run_due(self):
        """Run every scheduler tick due at or before the current instant."""
        for sched in self.schedulers.values():
            while self._next_tick(sched) <= self.now:
                sched.tick(self._next_tick(sched))

    def advance_step(self, t):
        """Advance one clock step toward t (the next tick, outage boundary,
        or exact transfer event, whichever is earliest). Returns the new now.
        Stepwise advancement lets callers react at exact event instants."""
        self.run_due()
        if self.now >= t:
            return self.now
        candidates = [Fraction(t)]
        for sched in self.schedulers.values():
            candidates.append(Fraction(self._next_tick(sched)))
        for b in self.facility.outage_boundaries(self.now, t):
            candidates.append(Fraction(b))
            break
        candidates.append(Fraction(self.storage.next_event_time(Fraction(t))))
        nxt = min(c for c in candidates if c > self.now)
        self.storage.advance(nxt)
        step = int(nxt) if nxt.denominator == 1 else nxt
        self.facility.apply_time(step)
        self.run_due()
        return self.now

    def advance_to(self, t):
        """Advance simulated time to t, firing everything due on the way."""
        if t < self.now:
            raise SfError("out-of-order-tick", "clock may not run backwards")
        self.run_due()
        while self.now < t:
            self.advance_step(t)
