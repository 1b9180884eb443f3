"""Canonical in-memory facility state: systems, node pools, projects,
allocations, and the outage calendar.

All mutation goes through the Facility object in event order (single
writer); every other engine reads and writes through it.
"""

from dataclasses import dataclass, field
from enum import Enum

from .errors import SfError
from .eventlog import EventLog, plain_time


class SystemKind(str, Enum):
    COMPUTE = "compute"
    STORAGE = "storage"
    NETWORK = "network"
    SERVICE = "service"


class SystemState(str, Enum):
    UP = "up"
    DEGRADED = "degraded"
    DOWN = "down"
    MAINTENANCE = "maintenance"


class NodeState(str, Enum):
    IDLE = "idle"
    BUSY = "busy"
    RESERVED_IDLE = "reserved_idle"
    DOWN = "down"


@dataclass
class SystemDescriptor:
    name: str
    kind: SystemKind
    state: SystemState = SystemState.UP
    state_since: int = 0


@dataclass
class NodePool:
    name: str
    total_nodes: int
    cores_per_node: int = 1
    realtime_reserve: int = 0
    nodes: list[NodeState] = field(default_factory=list)

    def __post_init__(self):
        if self.realtime_reserve > self.total_nodes:
            raise SfError("nodes-exceed-pool", "realtime_reserve exceeds pool size")
        if not self.nodes:
            self.nodes = [NodeState.IDLE] * self.total_nodes

    def counts(self) -> dict[str, int]:
        out = {s.value: 0 for s in NodeState}
        for s in self.nodes:
            out[s.value] += 1
        return out

    def check_conservation(self):
        assert len(self.nodes) == self.total_nodes, "node-state conservation violated"


@dataclass
class Member:
    user: str
    role: str  # "pi" | "member"


@dataclass
class Project:
    id: str
    allocation_node_hours: float
    used_node_hours: float = 0.0
    overdraft_limit: float = 0.0
    members: list[Member] = field(default_factory=list)
    collab_accounts: list[str] = field(default_factory=list)
    # tier name -> (byte limit, inode limit)
    quotas: dict[str, tuple[int, int]] = field(default_factory=dict)

    def pi(self) -> str:
        for m in self.members:
            if m.role == "pi":
                return m.user
        raise SfError("unknown-user", f"project {self.id} has no pi")

    def member_ids(self) -> set[str]:
        return {m.user for m in self.members}

    def accounts(self) -> set[str]:
        """Identities allowed to own this project's data."""
        return self.member_ids() | set(self.collab_accounts)


@dataclass
class OutageWindow:
    system: str
    start: int
    end: int
    kind: str = "scheduled"  # scheduled | unplanned
    services_kept_up: set[str] = field(default_factory=set)

    def __post_init__(self):
        if not self.start < self.end:
            raise SfError("schema-violation", "outage start must precede end")


class Facility:
    def __init__(self, log: EventLog | None = None):
        self.now = 0
        self.log = log if log is not None else EventLog()
        self.systems: dict[str, SystemDescriptor] = {}
        self.pools: dict[str, NodePool] = {}  # keyed by compute system name
        self.projects: dict[str, Project] = {}
        self.outages: list[OutageWindow] = []
        self.status_history: list[dict] = []
        # called with (system_name, new_state) when a system changes state
        self.state_listeners: list = []

    # -- systems -----------------------------------------------------------

    def register_system(self, descriptor: SystemDescriptor, pool: NodePool | None = None):
        if descriptor.name in self.systems:
            raise SfError("duplicate-name", f"system {descriptor.name} already registered")
        if descriptor.kind == SystemKind.COMPUTE and pool is None:
            raise SfError("schema-violation", "compute systems must carry a node pool")
        descriptor.state_since = self.now
        self.systems[descriptor.name] = descriptor
        if pool is not None:
            self.pools[descriptor.name] = pool
        self._record_status(descriptor)
        return descriptor

    def set_system_state(self, name: str, new_state: SystemState, window: OutageWindow | None = None):
        sys = self.systems.get(name)
        if sys is None:
            raise SfError("unknown-system", f"no system named {name}")
        if window is not None and name in window.services_kept_up:
            return  # availability matrix keeps this service up
        if sys.state == new_state:
            return  # idempotent, no duplicate history entry
        sys.state = new_state
        sys.state_since = self.now
        self._record_status(sys)
        for cb in self.state_listeners:
            cb(name, new_state)

    def _record_status(self, sys: SystemDescriptor):
        entry = {"t": self.now, "system": sys.name, "state": sys.state.value}
        self.status_history.append(entry)
        self.log.append(self.now, "system_state", system=sys.name, state=sys.state.value)

    def is_up(self, name: str) -> bool:
        sys = self.systems.get(name)
        if sys is None:
            raise SfError("unknown-system", f"no system named {name}")
        return sys.state in (SystemState.UP, SystemState.DEGRADED)

    # -- outage calendar ---------------------------------------------------

    def add_outage(self, window: OutageWindow):
        if window.system not in self.systems:
            raise SfError("unknown-system", f"no system named {window.system}")
        self.outages.append(window)
        self.log.append(self.now, "outage_scheduled", system=window.system,
                        start=window.start, end=window.end, outage_kind=window.kind)

    def outage_boundaries(self, after, upto) -> list[int]:
        """Outage start/end instants in (after, upto]."""
        times = set()
        for w in self.outages:
            for b in (w.start, w.end):
                if after < b <= upto:
                    times.add(b)
        return sorted(times)

    def apply_time(self, now):
        """Advance the clock, applying outage start/end transitions due now."""
        assert now >= self.now, "clock may not run backwards"
        self.now = now
        for w in self.outages:
            if w.start <= now < w.end:
                target = SystemState.MAINTENANCE if w.kind == "scheduled" else SystemState.DOWN
                if self.systems[w.system].state != target:
                    self.set_system_state(w.system, target, window=w)
            elif now >= w.end:
                sys = self.systems[w.system]
                if sys.state in (SystemState.DOWN, SystemState.MAINTENANCE) and sys.state_since < w.end:
                    # only auto-restore systems the calendar took down
                    self.set_system_state(w.system, SystemState.UP)

    # -- projects ----------------------------------------------------------

    def add_project(self, project: Project):
        if project.id in self.projects:
            raise SfError("duplicate-name", f"project {project.id} already exists")
        pis = [m for m in project.members if m.role == "pi"]
        if len(pis) != 1:
            raise SfError("schema-violation", "project must have exactly one pi")
        self.projects[project.id] = project
        return project

    def get_project(self, project_id: str) -> Project:
        p = self.projects.get(project_id)
        if p is None:
            raise SfError("unknown-project", f"no project {project_id}")
        return p

    def charge_allocation(self, project_id: str, node_hours: float, force: bool = False) -> float:
        """Charge node-hours against a project, returning the remainder.

        force=True is the accounting path for work already performed (a job
        that ran must be charged even if it overdraws)."""
        if node_hours < 0:
            raise SfError("schema-violation", "node_hours must be non-negative")
        p = self.get_project(project_id)
        if not force and p.used_node_hours + node_hours > p.allocation_node_hours + p.overdraft_limit:
            raise SfError("exhausted-allocation",
                          f"charge of {node_hours} node-hours exceeds allocation for {project_id}")
        p.used_node_hours += node_hours
        self.log.append(self.now, "allocation_charge", project=project_id,
                        node_hours=plain_time(node_hours))
        return p.allocation_node_hours - p.used_node_hours

    def allocation_exhausted(self, project_id: str) -> bool:
        p = self.get_project(project_id)
        return p.used_node_hours >= p.allocation_node_hours + p.overdraft_limit

    def modify_membership(self, project_id: str, user: str, action: str, role: str | None = None):
        p = self.get_project(project_id)
        if action == "add":
            if user not in p.member_ids():
                p.members.append(Member(user=user, role=role or "member"))
        elif action == "remove":
            target = next((m for m in p.members if m.user == user), None)
            if target is None:
                raise SfError("unknown-user", f"{user} is not a member of {project_id}")
            if target.role == "pi":
                raise SfError("sole-pi-removal", "cannot remove the sole pi")
            p.members.remove(target)
        elif action == "set_role":
            target = next((m for m in p.members if m.user == user), None)
            if target is None:
                raise SfError("unknown-user", f"{user} is not a member of {project_id}")
            if role not in ("pi", "member"):
                raise SfError("schema-violation", f"bad role {role}")
            if role == "pi":
                for m in p.members:
                    if m.role == "pi":
                        m.role = "member"
            elif target.role == "pi":
                raise SfError("sole-pi-removal", "demoting the sole pi would leave none")
            target.role = role
        else:
            raise SfError("schema-violation", f"unknown membership action {action}")
        self.log.append(self.now, "membership_change", project=project_id,
                        user=user, action=action, role=role)

    # -- snapshot ----------------------------------------------------------

    SNAPSHOT_VERSION = 1

    def export_state(self) -> dict:
        return {
            "snapshot_version": self.SNAPSHOT_VERSION,
            "now": plain_time(self.now),
            "systems": [
                {"name": s.name, "kind": s.kind.value, "state": s.state.value,
                 "state_since": plain_time(s.state_since)}
                for s in self.systems.values()
            ],
            "pools": [
                {"system": name, "name": p.name, "total_nodes": p.total_nodes,
                 "cores_per_node": p.cores_per_node,
                 "realtime_reserve": p.realtime_reserve,
                 "nodes": [n.value for n in p.nodes]}
                for name, p in self.pools.items()
            ],
            "projects": [
                {"id": p.id, "allocation_node_hours": p.allocation_node_hours,
                 "used_node_hours": p.used_node_hours,
                 "overdraft_limit": p.overdraft_limit,
                 "members": [{"user": m.user, "role": m.role} for m in p.members],
                 "collab_accounts": list(p.collab_accounts),
                 "quotas": {t: list(q) for t, q in p.quotas.items()}}
                for p in self.projects.values()
            ],
            "outages": [
                {"system": w.system, "start": plain_time(w.start), "end": plain_time(w.end),
                 "kind": w.kind, "services_kept_up": sorted(w.services_kept_up)}
                for w in self.outages
            ],
        }

    @classmethod
    def import_state(cls, doc: dict) -> "Facility":
        if doc.get("snapshot_version") != cls.SNAPSHOT_VERSION:
            raise SfError("stale-state", "unsupported snapshot version")
        fac = cls()
        fac.now = doc["now"]
        for s in doc["systems"]:
            fac.systems[s["name"]] = SystemDescriptor(
                name=s["name"], kind=SystemKind(s["kind"]),
                state=SystemState(s["state"]), state_since=s["state_since"])
        for p in doc["pools"]:
            fac.pools[p["system"]] = NodePool(
                name=p["name"], total_nodes=p["total_nodes"],
                cores_per_node=p["cores_per_node"],
                realtime_reserve=p["realtime_reserve"],
                nodes=[NodeState(n) for n in p["nodes"]])
        for p in doc["projects"]:
            fac.projects[p["id"]] = Project(
                id=p["id"], allocation_node_hours=p["allocation_node_hours"],
                used_node_hours=p["used_node_hours"],
                overdraft_limit=p["overdraft_limit"],
                members=[Member(**m) for m in p["members"]],
                collab_accounts=list(p["collab_accounts"]),
                quotas={t: tuple(q) for t, q in p["quotas"].items()})
        for w in doc["outages"]:
            fac.outages.append(OutageWindow(
                system=w["system"], start=w["start"], end=w["end"],
                kind=w["kind"], services_kept_up=set(w["services_kept_up"])))
        return fac
