"""Versioned scenario document schema (strict: unknown fields are rejected).

A scenario describes the facility (systems, tiers, links, sites, projects),
policies, a time-ordered workload event stream, reactive pipelines, and
named expectations over the resulting metrics report.
"""

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..errors import SfError

SCHEMA_VERSION = 1

EVENT_KINDS = ("ingest_at_site", "exposure", "surge_window", "outage",
               "submit", "transfer", "reserve_bandwidth", "reservation")

# accepted params per event kind (strict mode rejects anything else)
EVENT_PARAMS = {
    "ingest_at_site": {"site", "count", "size_bytes", "tag"},
    "exposure": {"site", "images", "size_bytes", "tag"},
    "surge_window": {"site", "dst", "count", "size_bytes", "as_account",
                     "project", "caller", "dst_dir", "tag"},
    "outage": {"system", "end", "outage_kind", "services_kept_up"},
    "submit": {"project", "account", "qos", "nodes", "walltime_limit",
               "runtime_seconds", "deadline", "requeue_on_preempt",
               "reservation", "tag", "caller"},
    "transfer": {"src", "dst", "paths", "count", "size_bytes", "as_account",
                 "project", "caller", "dst_dir", "link", "tag"},
    "reserve_bandwidth": {"link", "rate", "start", "end", "project"},
    "reservation": {"name", "project", "node_count", "start", "end",
                    "allow_preemptible", "grace_seconds", "caller"},
}


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PoolDoc(StrictModel):
    total_nodes: int = Field(ge=1)
    cores_per_node: int = 1
    realtime_reserve: int = 0


class SystemDoc(StrictModel):
    name: str
    kind: str  # compute | storage | network | service
    pool: PoolDoc | None = None


class TierDoc(StrictModel):
    name: str
    capacity_bytes: int
    bandwidth: int


class LinkDoc(StrictModel):
    name: str
    capacity: int
    system: str | None = None


class SiteDoc(StrictModel):
    name: str
    bandwidth: int
    link: str


class MemberDoc(StrictModel):
    user: str
    role: str = "member"


class QuotaDoc(StrictModel):
    bytes: int
    inodes: int


class ProjectDoc(StrictModel):
    id: str
    allocation_node_hours: float
    overdraft_limit: float = 0.0
    members: list[MemberDoc]
    collab_accounts: list[str] = Field(default_factory=list)
    quotas: dict[str, QuotaDoc] = Field(default_factory=dict)


class AuthBootstrapDoc(StrictModel):
    institutions: list[str] = Field(default_factory=list)
    rwx_approvals: list[str] = Field(default_factory=list)
    identity_links: list[dict] = Field(default_factory=list)


class PolicyDoc(StrictModel):
    quantum_seconds: int = 30
    default_grace_seconds: int = 120
    realtime_projects: list[str] | None = None
    auth: AuthBootstrapDoc = Field(default_factory=AuthBootstrapDoc)


class EventDoc(StrictModel):
    t: int
    kind: str
    params: dict = Field(default_factory=dict)


class JobTemplateDoc(StrictModel):
    project: str
    account: str
    qos: str = "regular"
    nodes: int = 1
    walltime_limit: int = 600
    runtime_seconds: int | None = None
    deadline: int | None = None
    requeue_on_preempt: bool = False
    reservation: str | None = None


class PipelineTransferDoc(StrictModel):
    src: str
    dst: str
    as_account: str
    project: str
    caller: str | None = None
    dst_dir: str = "/{tag}"  # {tag} substituted per instance
    link: str | None = None


class PipelineDoc(StrictModel):
    name: str
    trigger_tag_prefix: str
    transfer: PipelineTransferDoc
    job: JobTemplateDoc | None = None
    # transfer_complete = store-then-process; data_ready = stream-while-reduce
    submit_job_on: str = "transfer_complete"


class RatioDoc(StrictModel):
    numerator: str
    denominator: str


class ExpectationDoc(StrictModel):
    name: str
    metric: str | None = None
    ratio: RatioDoc | None = None
    op: str  # >= | <= | == | > | <
    value: float


class Scenario(StrictModel):
    schema_version: int
    name: str
    seed: int = 0
    horizon: int
    drain: bool = True
    drain_cap: int | None = None
    systems: list[SystemDoc]
    tiers: list[TierDoc] = Field(default_factory=list)
    links: list[LinkDoc] = Field(default_factory=list)
    sites: list[SiteDoc] = Field(default_factory=list)
    projects: list[ProjectDoc] = Field(default_factory=list)
    policies: PolicyDoc = Field(default_factory=PolicyDoc)
    events: list[EventDoc] = Field(default_factory=list)
    pipelines: list[PipelineDoc] = Field(default_factory=list)
    expectations: list[ExpectationDoc] = Field(default_factory=list)


def load_scenario(document: dict) -> Scenario:
    """Validate a scenario document; reject unknown fields, bad event params,
    and unsorted events."""
    if document.get("schema_version") != SCHEMA_VERSION:
        raise SfError("schema-violation",
                      f"schema_version must be {SCHEMA_VERSION}")
    try:
        scenario = Scenario.model_validate(document)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(p) for p in first["loc"])
        raise SfError("schema-violation", f"{path}: {first['msg']}")
    last_t = None
    for i, ev in enumerate(scenario.events):
        if ev.kind not in EVENT_KINDS:
            raise SfError("schema-violation", f"events.{i}: unknown kind {ev.kind}")
        unknown = set(ev.params) - EVENT_PARAMS[ev.kind]
        if unknown:
            raise SfError("schema-violation",
                          f"events.{i}: unknown params {sorted(unknown)}")
        if last_t is not None and ev.t < last_t:
            raise SfError("schema-violation",
                          f"events.{i}: out of order (t={ev.t} after t={last_t})")
        last_t = ev.t
    for i, exp in enumerate(scenario.expectations):
        if (exp.metric is None) == (exp.ratio is None):
            raise SfError("schema-violation",
                          f"expectations.{i}: exactly one of metric/ratio required")
        if exp.op not in (">=", "<=", "==", ">", "<"):
            raise SfError("schema-violation", f"expectations.{i}: bad op {exp.op}")
    return scenario
