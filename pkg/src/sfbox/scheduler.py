"""Deterministic discrete-event batch scheduler.

Implements priority queuing with EASY backfill, a real-time QOS backed by a
reserved node pool, advance reservations with assigned node sets, and
preemptible jobs that may fill idle reservation nodes until the owner needs
them (vacating within a grace period).

The engine is strictly single-threaded: all scheduling happens inside
tick(), which callers drive at a fixed quantum. Identical inputs produce
bit-identical decision logs.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import SfError
from .eventlog import plain_time
from .facility import Facility, NodeState, SystemState

QOS_REGULAR = "regular"
QOS_DEBUG = "debug"
QOS_REALTIME = "realtime"
QOS_PREEMPTIBLE = "preemptible"
ALL_QOS = (QOS_REGULAR, QOS_DEBUG, QOS_REALTIME, QOS_PREEMPTIBLE)


@dataclass
class SchedulerConfig:
    quantum_seconds: int = 30
    qos_priority: dict = field(default_factory=lambda: {
        QOS_REALTIME: 100, QOS_DEBUG: 50, QOS_REGULAR: 10, QOS_PREEMPTIBLE: 0,
    })
    default_grace_seconds: int = 120
    realtime_target_wait_seconds: int = 300
    # projects allowed to use the realtime QOS; None disables the check
    realtime_projects: list | None = None

    def __post_init__(self):
        p = self.qos_priority
        if not (p[QOS_REALTIME] > p[QOS_DEBUG] > p[QOS_REGULAR] > p[QOS_PREEMPTIBLE]):
            raise SfError("schema-violation", "qos priorities must be strictly ordered")


@dataclass
class JobSpec:
    project: str
    account: str
    qos: str
    nodes: int
    walltime_limit: int
    submit_time: int = 0
    deadline: int | None = None
    requeue_on_preempt: bool = False
    reservation: str | None = None
    payload_tag: str = ""
    # scenario-declared actual runtime; defaults to the walltime limit
    runtime_seconds: int | None = None

    def __post_init__(self):
        if self.nodes < 1:
            raise SfError("schema-violation", "nodes must be >= 1")
        if self.walltime_limit < 1:
            raise SfError("schema-violation", "walltime_limit must be >= 1")
        if self.runtime_seconds is None:
            self.runtime_seconds = self.walltime_limit
        if self.runtime_seconds > self.walltime_limit:
            raise SfError("schema-violation", "declared runtime exceeds walltime limit")


JOB_TERMINAL = {"completed", "preempted_killed", "cancelled", "failed"}


@dataclass
class Job:
    spec: JobSpec
    id: int
    state: str = "pending"  # pending|held|running|preempting|completed|preempted_killed|requeued|cancelled|failed
    start_time: object = None
    end_time: object = None
    preempt_notice_time: object = None
    assigned_nodes: set = field(default_factory=set)
    kill_at: object = None
    cancel_requested: bool = False

    def queue_key(self, priority: dict):
        return (-priority[self.spec.qos], self.spec.submit_time, self.id)


@dataclass
class Reservation:
    name: str
    project: str
    node_count: int
    start: int
    end: int
    allow_preemptible: bool = False
    grace_seconds: int = 120
    state: str = "pending"  # pending|active|expired|cancelled
    nodes: set = field(default_factory=set)

    def __post_init__(self):
        if not self.start < self.end:
            raise SfError("schema-violation", "reservation start must precede end")


class Scheduler:
    """Scheduler for one compute system's node pool."""

    def __init__(self, facility: Facility, system: str, config: SchedulerConfig | None = None):
        self.facility = facility
        self.system = system
        self.pool = facility.pools[system]
        self.config = config or SchedulerConfig()
        self.jobs: dict[int, Job] = {}
        self.reservations: dict[str, Reservation] = {}
        self.next_job_id = 1
        self.last_tick = None
        # completed placement intervals: (job_id, qos, node frozenset, start, end)
        self.busy_intervals: list[tuple] = []
        self.log = facility.log
        self.grace_violations = 0
        self.charged_node_hours = Fraction(0)
        facility.state_listeners.append(self._on_system_state)

    # -- node partitions ---------------------------------------------------

    def _reserve_nodes(self) -> list[int]:
        n = self.pool.total_nodes
        return list(range(n - self.pool.realtime_reserve, n))

    def _general_nodes(self) -> list[int]:
        return list(range(self.pool.total_nodes - self.pool.realtime_reserve))

    def _fences(self, node: int) -> list[Reservation]:
        """Reservations (pending or active) that fence this node."""
        return [r for r in self.reservations.values()
                if r.state in ("pending", "active") and node in r.nodes]

    def _active_reservation_for(self, node: int) -> Reservation | None:
        for r in self.reservations.values():
            if r.state == "active" and node in r.nodes:
                return r
        return None

    # -- submission --------------------------------------------------------

    def submit(self, spec: JobSpec) -> int:
        project = self.facility.get_project(spec.project)
        if spec.nodes > self.pool.total_nodes:
            raise SfError("nodes-exceed-pool",
                          f"{spec.nodes} nodes requested on {self.pool.total_nodes}-node pool")
        if spec.qos == QOS_REALTIME and self.config.realtime_projects is not None \
                and spec.project not in self.config.realtime_projects:
            raise SfError("realtime-not-allowed",
                          f"project {spec.project} is not on the realtime allowlist")
        if spec.reservation is not None:
            r = self.reservations.get(spec.reservation)
            if r is None or r.state in ("expired", "cancelled"):
                raise SfError("unknown-reservation", f"no reservation {spec.reservation}")
            owner = r.project == spec.project
            filler = spec.qos == QOS_PREEMPTIBLE and r.allow_preemptible
            if not (owner or filler):
                raise SfError("permission-denied",
                              f"reservation {r.name} belongs to {r.project}")
            if spec.nodes > r.node_count:
                raise SfError("nodes-exceed-pool",
                              f"{spec.nodes} nodes exceed reservation of {r.node_count}")
        if spec.deadline is not None and spec.deadline <= spec.submit_time:
            raise SfError("schema-violation", "deadline must follow submit time")

        job = Job(spec=spec, id=self.next_job_id)
        self.next_job_id += 1
        if self.facility.allocation_exhausted(spec.project):
            job.state = "held"
        self.jobs[job.id] = job
        self.log.append(self.facility.now, "job_submitted", job=job.id,
                        qos=spec.qos, nodes=spec.nodes, project=spec.project,
                        state=job.state, tag=spec.payload_tag)
        return job.id

    # -- reservations ------------------------------------------------------

    def create_reservation(self, name: str, project: str, node_count: int,
                           start: int, end: int, allow_preemptible: bool = False,
                           grace_seconds: int | None = None) -> Reservation:
        self.facility.get_project(project)
        if name in self.reservations:
            raise SfError("duplicate-name", f"reservation {name} already exists")
        if start <= self.facility.now:
            raise SfError("reservation-infeasible",
                          f"window must start in the future (now={plain_time(self.facility.now)})")
        res = Reservation(name=name, project=project, node_count=node_count,
                          start=start, end=end,
                          allow_preemptible=allow_preemptible,
                          grace_seconds=grace_seconds if grace_seconds is not None
                          else self.config.default_grace_seconds)
        usable = self._general_nodes()
        if node_count > len(usable):
            raise SfError("reservation-infeasible",
                          f"conflict at t={start}: {node_count} nodes exceed "
                          f"{len(usable)} reservable nodes")
        chosen = []
        for n in usable:
            if any(r.start < end and start < r.end for r in self._fences(n)):
                continue
            running = self._running_job_on(n)
            if running is not None and running.spec.qos != QOS_PREEMPTIBLE:
                if running.start_time + running.spec.walltime_limit > start:
                    continue
            chosen.append(n)
            if len(chosen) == node_count:
                break
        if len(chosen) < node_count:
            conflict_t = self._first_conflict_instant(node_count, start, end)
            raise SfError("reservation-infeasible",
                          f"conflict at t={plain_time(conflict_t)}: cannot fence "
                          f"{node_count} nodes over [{start}, {end})")
        res.nodes = set(chosen)
        self.reservations[name] = res
        self.log.append(self.facility.now, "reservation_created", name=name,
                        project=project, nodes=sorted(res.nodes),
                        start=start, end=end)
        return res

    def _first_conflict_instant(self, node_count: int, start: int, end: int):
        usable = len(self._general_nodes())
        points = sorted({start} | {r.start for r in self.reservations.values()
                                   if r.state in ("pending", "active")
                                   and r.start < end and start < r.end})
        for t in points:
            if t < start:
                t = start
            demand = node_count + sum(
                r.node_count for r in self.reservations.values()
                if r.state in ("pending", "active") and r.start <= t < r.end)
            if demand > usable:
                return t
        return start

    def _running_job_on(self, node: int) -> Job | None:
        for job in self.jobs.values():
            if job.state in ("running", "preempting") and node in job.assigned_nodes:
                return job
        return None

    # -- cancel ------------------------------------------------------------

    def cancel(self, ident) -> None:
        """Cancel a job (by id) or a reservation (by name)."""
        if isinstance(ident, int) or (isinstance(ident, str) and ident.isdigit()):
            job = self.jobs.get(int(ident))
            if job is None:
                raise SfError("unknown-job", f"no job {ident}")
            if job.state in JOB_TERMINAL:
                raise SfError("already-terminal", f"job {ident} is {job.state}")
            if job.state in ("pending", "held", "requeued"):
                job.state = "cancelled"
                self.log.append(self.facility.now, "job_cancelled", job=job.id)
            else:
                job.cancel_requested = True  # freed at the next tick
            return
        res = self.reservations.get(ident)
        if res is None:
            raise SfError("unknown-reservation", f"no reservation {ident}")
        if res.state in ("expired", "cancelled"):
            raise SfError("already-terminal", f"reservation {ident} is {res.state}")
        if res.state == "active":
            for n in res.nodes:
                if self.pool.nodes[n] == NodeState.RESERVED_IDLE:
                    self.pool.nodes[n] = NodeState.IDLE
        res.state = "cancelled"
        self.log.append(self.facility.now, "reservation_cancelled", name=res.name)

    # -- outage handling ---------------------------------------------------

    def _on_system_state(self, system: str, state: SystemState):
        if system != self.system:
            return
        if state in (SystemState.DOWN, SystemState.MAINTENANCE):
            for job in list(self.jobs.values()):
                if job.state in ("running", "preempting"):
                    if job.spec.requeue_on_preempt:
                        self._vacate(job, self.facility.now, "requeued")
                        self.log.append(self.facility.now, "job_requeued", job=job.id,
                                        reason="outage")
                    else:
                        self._vacate(job, self.facility.now, "failed")
                        self.log.append(self.facility.now, "job_failed", job=job.id,
                                        reason="outage")
            for n in range(self.pool.total_nodes):
                self.pool.nodes[n] = NodeState.DOWN
        elif state == SystemState.UP:
            for n in range(self.pool.total_nodes):
                if self.pool.nodes[n] == NodeState.DOWN:
                    self.pool.nodes[n] = NodeState.IDLE
            # active reservations re-fence on the next tick

    # -- tick --------------------------------------------------------------

    def tick(self, now) -> list[dict]:
        if self.last_tick is not None and now != self.last_tick + self.config.quantum_seconds:
            raise SfError("out-of-order-tick",
                          f"expected tick at {plain_time(self.last_tick + self.config.quantum_seconds)}, "
                          f"got {plain_time(now)}")
        self.last_tick = now
        decisions: list[dict] = []

        self._complete_elapsed(now, decisions)
        self._update_reservations(now, decisions)
        self._release_held_jobs(now)
        up = self.facility.is_up(self.system)
        if up:
            self._preempt_for_owners(now, decisions)
        self._kill_overdue(now, decisions)
        if up:
            self._place(now, decisions)
        self.pool.check_conservation()
        return decisions

    # (1) completions and deferred cancellations
    def _complete_elapsed(self, now, decisions):
        for job in list(self.jobs.values()):
            if job.state not in ("running", "preempting"):
                continue
            done_at = job.start_time + job.spec.runtime_seconds
            if job.cancel_requested:
                end = min(done_at, now)
                state = "completed" if done_at <= now else "cancelled"
                self._vacate(job, end, state)
                decisions.append(self.log.append(now, "job_cancelled" if state == "cancelled"
                                                 else "job_complete", job=job.id, end=end,
                                                 tag=job.spec.payload_tag))
            elif done_at <= now:
                self._vacate(job, done_at, "completed")
                decisions.append(self.log.append(now, "job_complete", job=job.id,
                                                 end=done_at, qos=job.spec.qos,
                                                 deadline=job.spec.deadline,
                                                 tag=job.spec.payload_tag))

    def _vacate(self, job: Job, end, new_state: str):
        """Free a placement, record its busy interval, and charge allocation."""
        if job.state == "preempting" and new_state in ("preempted_killed", "requeued"):
            if end > job.kill_at:
                self.grace_violations += 1
        job.end_time = end
        elapsed = end - job.start_time
        self.busy_intervals.append((job.id, job.spec.qos, frozenset(job.assigned_nodes),
                                    job.start_time, end))
        charge = Fraction(len(job.assigned_nodes)) * Fraction(elapsed) / 3600
        self.charged_node_hours += charge
        self.facility.charge_allocation(job.spec.project, charge, force=True)
        for n in job.assigned_nodes:
            if self.pool.nodes[n] == NodeState.DOWN:
                continue
            res = self._active_reservation_for(n)
            self.pool.nodes[n] = NodeState.RESERVED_IDLE if res else NodeState.IDLE
        job.assigned_nodes = set()
        job.state = new_state
        job.preempt_notice_time = None
        job.kill_at = None
        if new_state == "requeued":
            job.start_time = None
            job.end_time = None

    # (2) reservation lifecycle
    def _update_reservations(self, now, decisions):
        for res in self.reservations.values():
            if res.state == "pending" and res.start <= now < res.end:
                res.state = "active"
                decisions.append(self.log.append(now, "reservation_active", name=res.name))
            if res.state == "active":
                if now >= res.end:
                    res.state = "expired"
                    for n in res.nodes:
                        if self.pool.nodes[n] == NodeState.RESERVED_IDLE:
                            self.pool.nodes[n] = NodeState.IDLE
                    decisions.append(self.log.append(now, "reservation_expired", name=res.name))
                else:
                    for n in res.nodes:
                        if self.pool.nodes[n] == NodeState.IDLE:
                            self.pool.nodes[n] = NodeState.RESERVED_IDLE

    def _release_held_jobs(self, now):
        for job in self.jobs.values():
            if job.state == "held" and not self.facility.allocation_exhausted(job.spec.project):
                job.state = "pending"
                self.log.append(now, "job_released", job=job.id)
            elif job.state == "pending" and self.facility.allocation_exhausted(job.spec.project):
                job.state = "held"
                self.log.append(now, "job_held", job=job.id)

    # (3) preemption for reservation owners
    def _preempt_for_owners(self, now, decisions):
        queue = self._queue()
        for res in sorted(self.reservations.values(), key=lambda r: r.name):
            if res.state != "active":
                continue
            demand = sum(j.spec.nodes for j in queue
                         if j.spec.reservation == res.name and j.spec.project == res.project)
            if demand == 0:
                continue
            free = sum(1 for n in res.nodes if self.pool.nodes[n] == NodeState.RESERVED_IDLE)
            freeing = sum(len(j.assigned_nodes & res.nodes) for j in self.jobs.values()
                          if j.state == "preempting")
            shortfall = min(demand, res.node_count) - free - freeing
            if shortfall <= 0:
                continue
            victims = [j for j in self.jobs.values()
                       if j.state == "running" and j.spec.qos == QOS_PREEMPTIBLE
                       and j.assigned_nodes & res.nodes]
            victims.sort(key=lambda j: (-j.start_time, -j.id))  # newest start first
            for victim in victims:
                if shortfall <= 0:
                    break
                victim.state = "preempting"
                victim.preempt_notice_time = now
                victim.kill_at = now + res.grace_seconds
                shortfall -= len(victim.assigned_nodes & res.nodes)
                decisions.append(self.log.append(now, "preempt_notice", job=victim.id,
                                                 reservation=res.name,
                                                 kill_at=victim.kill_at))

    def _kill_overdue(self, now, decisions):
        for job in list(self.jobs.values()):
            if job.state == "preempting" and now >= job.kill_at:
                if job.spec.requeue_on_preempt:
                    self._vacate(job, now, "requeued")
                    decisions.append(self.log.append(now, "job_requeued", job=job.id,
                                                     reason="preempted"))
                else:
                    self._vacate(job, now, "preempted_killed")
                    decisions.append(self.log.append(now, "job_killed", job=job.id,
                                                     reason="preempted"))

    # (4)+(5) placement with EASY backfill
    def _queue(self) -> list[Job]:
        pending = [j for j in self.jobs.values() if j.state in ("pending", "requeued")]
        pending.sort(key=lambda j: j.queue_key(self.config.qos_priority))
        return pending

    def _place(self, now, decisions):
        blocked = None
        shadow = None
        for job in self._queue():
            idle = self._eligible_idle(job, now)
            if blocked is None:
                if len(idle) >= job.spec.nodes:
                    self._start(job, idle[:job.spec.nodes], now, decisions, backfill=False)
                else:
                    blocked = job
                    shadow = self._projected_start(blocked, now)
            else:
                if len(idle) < job.spec.nodes:
                    continue
                chosen = idle[:job.spec.nodes]
                tentative = {n: now + job.spec.walltime_limit for n in chosen}
                new_shadow = self._projected_start(blocked, now, extra_busy=tentative)
                safe = (shadow is None and new_shadow is None) or \
                       (shadow is not None and new_shadow is not None and new_shadow <= shadow)
                if safe:
                    self._start(job, chosen, now, decisions, backfill=True)
                    # backfill safety: the projection must not have worsened
                    check = self._projected_start(blocked, now)
                    assert shadow is None or (check is not None and check <= shadow), \
                        "backfill delayed the blocked job's projected start"

    def _start(self, job: Job, nodes: list[int], now, decisions, backfill: bool):
        job.state = "running"
        job.start_time = now
        job.assigned_nodes = set(nodes)
        for n in nodes:
            self.pool.nodes[n] = NodeState.BUSY
        decisions.append(self.log.append(now, "job_start", job=job.id, nodes=sorted(nodes),
                                         qos=job.spec.qos, wait=now - job.spec.submit_time,
                                         backfill=backfill, tag=job.spec.payload_tag,
                                         project=job.spec.project))

    # -- eligibility and projection ---------------------------------------

    def _fence_conflict(self, node: int, t, walltime: int) -> bool:
        """True if [t, t+walltime) overlaps a fence window on this node."""
        for r in self._fences(node):
            if t < r.end and r.start < t + walltime:
                return True
        return False

    def _eligible_idle(self, job: Job, now) -> list[int]:
        spec = job.spec
        if spec.reservation is not None:
            r = self.reservations.get(spec.reservation)
            if r is None or r.state != "active":
                return []
            return sorted(n for n in r.nodes if self.pool.nodes[n] == NodeState.RESERVED_IDLE)
        out: list[int] = []
        if spec.qos == QOS_REALTIME:
            out.extend(n for n in self._reserve_nodes() if self.pool.nodes[n] == NodeState.IDLE)
            out.extend(n for n in self._general_nodes()
                       if self.pool.nodes[n] == NodeState.IDLE
                       and not self._fence_conflict(n, now, spec.walltime_limit))
        elif spec.qos == QOS_PREEMPTIBLE:
            out.extend(n for n in self._general_nodes() if self.pool.nodes[n] == NodeState.IDLE)
            for r in sorted(self.reservations.values(), key=lambda r: r.name):
                if r.state == "active" and r.allow_preemptible:
                    out.extend(n for n in sorted(r.nodes)
                               if self.pool.nodes[n] == NodeState.RESERVED_IDLE)
        else:
            out.extend(n for n in self._general_nodes()
                       if self.pool.nodes[n] == NodeState.IDLE
                       and not self._fence_conflict(n, now, spec.walltime_limit))
        return out

    def _universe(self, job: Job) -> list[int]:
        spec = job.spec
        if spec.reservation is not None:
            r = self.reservations.get(spec.reservation)
            return sorted(r.nodes) if r and r.state in ("pending", "active") else []
        if spec.qos == QOS_REALTIME:
            return self._reserve_nodes() + self._general_nodes()
        if spec.qos == QOS_PREEMPTIBLE:
            out = self._general_nodes()
            for r in sorted(self.reservations.values(), key=lambda r: r.name):
                if r.state == "active" and r.allow_preemptible:
                    out.extend(sorted(r.nodes))
            return out
        return self._general_nodes()

    def _projected_start(self, job: Job, now, extra_busy: dict | None = None):
        """Earliest start for `job` given running jobs' walltime limits,
        preemption kill deadlines, and reservation fence windows."""
        spec = job.spec
        running_on: dict[int, object] = {}
        for j in self.jobs.values():
            if j.state == "running":
                release = j.start_time + j.spec.walltime_limit
            elif j.state == "preempting":
                release = min(j.start_time + j.spec.walltime_limit, j.kill_at)
            else:
                continue
            for n in j.assigned_nodes:
                running_on[n] = release
        if extra_busy:
            running_on.update(extra_busy)

        fence_check = spec.reservation is None and spec.qos != QOS_PREEMPTIBLE
        res = self.reservations.get(spec.reservation) if spec.reservation else None
        releases = []
        for pos, n in enumerate(self._universe(job)):
            if self.pool.nodes[n] == NodeState.DOWN:
                continue
            t = max(now, running_on.get(n, now))
            if res is not None:
                t = max(t, res.start)
                if t >= res.end:
                    continue
            if fence_check:
                # push past fence windows that would overlap the run
                for r in sorted(self._fences(n), key=lambda r: (r.start, r.name)):
                    if t < r.end and r.start < t + spec.walltime_limit:
                        t = r.end
            releases.append((t, pos))
        if len(releases) < spec.nodes:
            return None
        releases.sort()
        return releases[spec.nodes - 1][0]

    # -- queries and reporting --------------------------------------------

    def query_job(self, job_id: int) -> dict:
        job = self.jobs.get(job_id)
        if job is None:
            raise SfError("unknown-job", f"no job {job_id}")
        queue_pos = None
        if job.state in ("pending", "requeued"):
            queue_pos = self._queue().index(job)
        return {
            "id": job.id, "state": job.state, "qos": job.spec.qos,
            "project": job.spec.project, "account": job.spec.account,
            "nodes": job.spec.nodes,
            "assigned_nodes": sorted(job.assigned_nodes),
            "submit_time": plain_time(job.spec.submit_time),
            "start_time": plain_time(job.start_time) if job.start_time is not None else None,
            "end_time": plain_time(job.end_time) if job.end_time is not None else None,
            "deadline": job.spec.deadline,
            "reservation": job.spec.reservation,
            "queue_position": queue_pos,
            "tag": job.spec.payload_tag,
        }

    def query_queue(self) -> list[dict]:
        return [self.query_job(j.id) for j in self._queue()]

    def query_reservation(self, name: str) -> dict:
        res = self.reservations.get(name)
        if res is None:
            raise SfError("unknown-reservation", f"no reservation {name}")
        busy = sum(1 for n in res.nodes if self.pool.nodes[n] == NodeState.BUSY)
        return {
            "name": res.name, "project": res.project, "state": res.state,
            "node_count": res.node_count, "nodes": sorted(res.nodes),
            "start": res.start, "end": res.end,
            "allow_preemptible": res.allow_preemptible,
            "grace_seconds": res.grace_seconds,
            "occupancy": busy / res.node_count if res.node_count else 0.0,
        }

    def busy_node_seconds(self, a=None, b=None) -> Fraction:
        """Busy node-seconds over [a, b), including still-running placements."""
        total = Fraction(0)
        for _, _, nodes, s, e in self.all_intervals():
            lo = s if a is None else max(s, a)
            hi = e if b is None else min(e, b)
            if hi > lo:
                total += Fraction(len(nodes)) * (Fraction(hi) - Fraction(lo))
        return total

    def all_intervals(self) -> list[tuple]:
        """Busy placement intervals, including still-running jobs up to now."""
        intervals = list(self.busy_intervals)
        for j in self.jobs.values():
            if j.state in ("running", "preempting"):
                intervals.append((j.id, j.spec.qos, frozenset(j.assigned_nodes),
                                  j.start_time, self.facility.now))
        return intervals

    def down_node_seconds(self, a, b) -> Fraction:
        total = Fraction(0)
        hist = [h for h in self.facility.status_history if h["system"] == self.system]
        for i, h in enumerate(hist):
            if h["state"] not in ("down", "maintenance"):
                continue
            s = h["t"]
            e = hist[i + 1]["t"] if i + 1 < len(hist) else self.facility.now
            lo, hi = max(s, a), min(e, b)
            if hi > lo:
                total += Fraction(self.pool.total_nodes) * (Fraction(hi) - Fraction(lo))
        return total

    def wait_time_report(self, window: tuple) -> dict:
        a, b = window
        if not a < b:
            raise SfError("schema-violation", "empty report window")
        waits: dict[str, list] = {q: [] for q in ALL_QOS}
        for rec in self.log.records:
            if rec["kind"] == "job_start" and a <= rec["t"] < b:
                waits[rec["qos"]].append(rec["wait"])
        denom = Fraction(self.pool.total_nodes) * (Fraction(b) - Fraction(a)) \
            - self.down_node_seconds(a, b)
        util = float(self.busy_node_seconds(a, b) / denom) if denom > 0 else 0.0
        return {
            "window": [plain_time(a), plain_time(b)],
            "utilization": util,
            "waits": {q: percentile_summary(w) for q, w in waits.items() if w},
        }


def percentile_summary(values: list) -> dict:
    vs = sorted(values)
    n = len(vs)

    def pct(p):
        # nearest-rank percentile
        rank = math.ceil(p * n)
        return vs[min(n - 1, max(0, rank - 1))]

    return {
        "count": n,
        "min": plain_time(vs[0]),
        "median": plain_time(vs[(n - 1) // 2]),
        "p95": plain_time(pct(0.95)),
        "max": plain_time(vs[-1]),
    }
