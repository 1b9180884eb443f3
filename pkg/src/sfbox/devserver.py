"""Development gateway: a small pre-seeded facility served over HTTP.

Run with `python -m sfbox.devserver [port]`. The first stdout line is a JSON
object with the base URL and a ready bearer token, so scripts (including the
ops-console integration tests) can drive the API immediately.
"""

import json
import sys

from .container import Superfacility
from .facility import Member, NodePool, OutageWindow, Project, SystemDescriptor, SystemKind
from .gateway.app import create_app
from .scheduler import JobSpec, SchedulerConfig
from .storage import ExternalLink, ExternalSite, StorageTier

GB = 1_000_000_000


def build_demo() -> tuple[Superfacility, str]:
    """Seed a small facility; returns (container, bearer token for alice)."""
    sf = Superfacility(scheduler_config=SchedulerConfig())
    sf.add_compute(SystemDescriptor(name="cori", kind=SystemKind.COMPUTE),
                   NodePool(name="cori", total_nodes=128, cores_per_node=32,
                            realtime_reserve=8))
    sf.facility.register_system(SystemDescriptor(name="dtn", kind=SystemKind.SERVICE))
    sf.facility.register_system(SystemDescriptor(name="portal", kind=SystemKind.SERVICE))
    sf.storage.add_tier(StorageTier(name="scratch", capacity_bytes=2000 * 1000 * GB,
                                    internal_bandwidth=10 * GB))
    sf.storage.add_tier(StorageTier(name="community", capacity_bytes=10000 * 1000 * GB,
                                    internal_bandwidth=5 * GB))
    sf.storage.add_tier(StorageTier(name="archive", capacity_bytes=100000 * 1000 * GB,
                                    internal_bandwidth=1 * GB))
    sf.storage.add_link(ExternalLink(name="esnet", capacity=10 * GB))
    sf.storage.add_site(ExternalSite(name="beamline", bandwidth=1 * GB, link="esnet"))
    sf.facility.add_project(Project(
        id="demo", allocation_node_hours=10000.0,
        members=[Member(user="alice", role="pi"), Member(user="dana", role="member")],
        collab_accounts=["demo"],
        quotas={"community": (1000 * 1000 * GB, 1000000),
                "scratch": (1000 * 1000 * GB, 1000000)}))
    sf.facility.add_outage(OutageWindow(system="cori", start=86400, end=90000,
                                        kind="scheduled"))

    sf.storage.mkdir("community", "/data", owner="alice", group="demo")
    sf.storage.ingest("/data/report.dat", 42_000_000, owner="alice", group="demo",
                      mode=0o600, tier="community")
    sf.storage.ingest("/data/shared.h5", 7 * GB, owner="demo", group="demo",
                      mode=0o640, tier="community")
    sf.storage.ingest_at_site("beamline", "/raw/shot-0001.tif", 700 * GB)

    sched = sf.scheduler()
    sched.create_reservation("shift", "demo", 16, start=3600, end=10800,
                             allow_preemptible=True)
    sched.submit(JobSpec(project="demo", account="alice", qos="regular", nodes=4,
                         walltime_limit=1800, submit_time=0, payload_tag="demo-job"))
    sf.advance_to(60)

    sf.auth.approve_rwx("alice")
    cred, secret = sf.auth.create_credential("alice", "rwx", "0.0.0.0/0")
    token = sf.auth.issue_token(cred.id, secret, "127.0.0.1")
    return sf, token.token


def main():
    import uvicorn
    port = int(sys.argv[1]) if len(sys.argv) > 1 else 8800
    sf, token = build_demo()
    app = create_app(sf)
    print(json.dumps({"url": f"http://127.0.0.1:{port}", "token": token}), flush=True)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


if __name__ == "__main__":
    main()
