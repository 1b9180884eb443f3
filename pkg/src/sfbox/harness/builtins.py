"""Curated scenarios replaying the experiment-facility pipelines.

Each builder returns a plain scenario document which is then validated by
load_scenario, so the builtins double as schema examples. All numbers are
chosen to divide evenly so transfer durations and job timings are exact.
"""

import random

from ..errors import SfError
from .schema import Scenario, load_scenario

GB = 1_000_000_000


def _base(name: str, horizon: int, nodes: int = 128, reserve: int = 8) -> dict:
    return {
        "schema_version": 1,
        "name": name,
        "seed": 0,
        "horizon": horizon,
        "systems": [
            {"name": "cori", "kind": "compute",
             "pool": {"total_nodes": nodes, "cores_per_node": 32,
                      "realtime_reserve": reserve}},
            {"name": "dtn", "kind": "service"},
        ],
        "tiers": [
            {"name": "scratch", "capacity_bytes": 2000 * 1000 * GB, "bandwidth": 10 * GB},
            {"name": "community", "capacity_bytes": 10000 * 1000 * GB, "bandwidth": 5 * GB},
            {"name": "archive", "capacity_bytes": 100000 * 1000 * GB, "bandwidth": 1 * GB},
        ],
        "links": [],
        "sites": [],
        "projects": [],
        "policies": {"quantum_seconds": 30, "default_grace_seconds": 120},
        "events": [],
        "pipelines": [],
        "expectations": [],
    }


def _project(pid, pi, members=(), collab=(), allocation=1_000_000.0, quotas=None):
    return {
        "id": pid,
        "allocation_node_hours": allocation,
        "members": [{"user": pi, "role": "pi"}] + [{"user": m} for m in members],
        "collab_accounts": list(collab),
        "quotas": quotas or {},
    }


def fig12_reservation() -> dict:
    """64-node reservation with a preemptible backlog and bursty
    near-real-time arrivals that evict the fillers within the grace period."""
    doc = _base("fig12_reservation", horizon=12000, reserve=4)
    doc["projects"] = [
        _project("expA", "alice"),
        _project("filler", "bob"),
    ]
    doc["policies"]["realtime_projects"] = ["expA"]
    events = [
        {"t": 0, "kind": "reservation",
         "params": {"name": "shift", "project": "expA", "node_count": 64,
                    "start": 3600, "end": 10800, "allow_preemptible": True}},
    ]
    for i in range(220):
        events.append({"t": 0, "kind": "submit",
                       "params": {"project": "filler", "account": "bob",
                                  "qos": "preemptible", "nodes": 8,
                                  "walltime_limit": 960, "runtime_seconds": 900,
                                  "tag": f"fill-{i:03d}"}})
    bursts = [(5400, 4, 16, 300), (7200, 2, 32, 450), (9000, 1, 64, 300)]
    for t, count, nodes, runtime in bursts:
        for i in range(count):
            events.append({"t": t, "kind": "submit",
                           "params": {"project": "expA", "account": "alice",
                                      "qos": "realtime", "nodes": nodes,
                                      "walltime_limit": 600,
                                      "runtime_seconds": runtime,
                                      "reservation": "shift",
                                      "tag": f"rt-{t}-{i}"}})
    doc["events"] = sorted(events, key=lambda e: e["t"])
    doc["expectations"] = [
        {"name": "no_grace_violations", "metric": "grace_violations", "op": "==", "value": 0},
        {"name": "realtime_starts_fast", "metric": "realtime_max_start_delay",
         "op": "<=", "value": 150},
        {"name": "reservation_well_used", "metric": "reservation_occupancy.shift",
         "op": ">=", "value": 0.8},
    ]
    return doc


def lcls_surge() -> dict:
    """Detector events pushed over a congested link: a bandwidth reservation
    keeps each analysis inside its latency window."""
    doc = _base("lcls_surge", horizon=4500)
    doc["links"] = [{"name": "slac-nersc", "capacity": 100_000_000}]
    doc["sites"] = [{"name": "slac", "bandwidth": 100_000_000, "link": "slac-nersc"}]
    doc["projects"] = [
        _project("lcls", "carol", collab=["lcls"],
                 quotas={"scratch": {"bytes": 1000 * 1000 * GB, "inodes": 100000}}),
        _project("other", "bob",
                 quotas={"community": {"bytes": 10000 * 1000 * GB, "inodes": 100000}}),
    ]
    doc["policies"]["realtime_projects"] = ["lcls"]
    events = [
        {"t": 0, "kind": "reserve_bandwidth",
         "params": {"link": "slac-nersc", "rate": 60_000_000,
                    "start": 600, "end": 4200, "project": "lcls"}},
    ]
    for i in range(9):
        events.append({"t": 0, "kind": "transfer",
                       "params": {"src": "slac", "dst": "community", "count": 1,
                                  "size_bytes": 900 * GB, "as_account": "bob",
                                  "project": "other", "caller": "bob",
                                  "dst_dir": f"/bg/{i}", "tag": f"bg-{i}"}})
    for i in range(8):
        events.append({"t": 600 + 300 * i, "kind": "ingest_at_site",
                       "params": {"site": "slac", "count": 1,
                                  "size_bytes": 12 * GB, "tag": f"lcls-evt-{i}"}})
    doc["events"] = sorted(events, key=lambda e: e["t"])
    doc["pipelines"] = [{
        "name": "lcls",
        "trigger_tag_prefix": "lcls-evt",
        "transfer": {"src": "slac", "dst": "scratch", "as_account": "lcls",
                     "project": "lcls", "caller": "carol", "dst_dir": "/lcls/{tag}"},
        "job": {"project": "lcls", "account": "lcls", "qos": "realtime",
                "nodes": 4, "walltime_limit": 300, "runtime_seconds": 180},
        "submit_job_on": "transfer_complete",
    }]
    doc["expectations"] = [
        {"name": "analyses_not_too_early", "metric": "pipelines.lcls.min_latency",
         "op": ">=", "value": 300},
        {"name": "analyses_within_window", "metric": "pipelines.lcls.max_latency",
         "op": "<=", "value": 1200},
        {"name": "all_events_analyzed", "metric": "pipelines.lcls.count",
         "op": "==", "value": 8},
    ]
    return doc


def desi_nightly() -> dict:
    """Nightly exposure stream: 50 exposures at 600 s spacing, 30 images
    each, landed under the collaboration account with redshifts due by a
    breakfast deadline."""
    doc = _base("desi_nightly", horizon=36000)
    doc["links"] = [{"name": "kp-nersc", "capacity": 1 * GB}]
    doc["sites"] = [{"name": "kitt-peak", "bandwidth": 1 * GB, "link": "kp-nersc"}]
    doc["projects"] = [
        _project("desi", "alice", members=["dana"], collab=["desi"],
                 quotas={"community": {"bytes": 10000 * 1000 * GB, "inodes": 1000000}}),
    ]
    doc["policies"]["realtime_projects"] = ["desi"]
    doc["events"] = [
        {"t": 600 * i, "kind": "exposure",
         "params": {"site": "kitt-peak", "images": 30,
                    "size_bytes": 200_000_000, "tag": f"desi-exp-{i:02d}"}}
        for i in range(50)
    ]
    doc["pipelines"] = [{
        "name": "desi",
        "trigger_tag_prefix": "desi-exp",
        "transfer": {"src": "kitt-peak", "dst": "community", "as_account": "desi",
                     "project": "desi", "caller": "dana", "dst_dir": "/desi/{tag}"},
        "job": {"project": "desi", "account": "desi", "qos": "realtime",
                "nodes": 2, "walltime_limit": 600, "runtime_seconds": 300,
                "deadline": 43200},
        "submit_job_on": "transfer_complete",
    }]
    doc["expectations"] = [
        {"name": "redshifts_by_breakfast", "metric": "deadline_hit_rate",
         "op": "==", "value": 1.0},
        {"name": "all_exposures_processed", "metric": "deadline_jobs",
         "op": "==", "value": 50},
        {"name": "collab_owns_landed_files", "metric": "file_owners.community.desi",
         "op": ">=", "value": 1500},
    ]
    return doc


def ncem_stream() -> dict:
    """700 GB detector bursts every 15 s; the stream-while-reduce pipeline
    must roughly halve end-to-end reduction latency versus store-then-process
    in the same scenario."""
    doc = _base("ncem_stream", horizon=6000)
    doc["links"] = [{"name": "ncem-nersc", "capacity": 14 * GB}]
    doc["sites"] = [{"name": "ncem", "bandwidth": 3_500_000_000, "link": "ncem-nersc"}]
    doc["projects"] = [
        _project("ncem", "nina", collab=["ncem"],
                 quotas={"scratch": {"bytes": 100000 * 1000 * GB, "inodes": 100000}}),
    ]
    doc["policies"]["realtime_projects"] = ["ncem"]
    events = []
    for i in range(4):
        events.append({"t": 600 + 15 * i, "kind": "ingest_at_site",
                       "params": {"site": "ncem", "count": 1,
                                  "size_bytes": 700 * GB, "tag": f"ncem-store-{i}"}})
    for i in range(4):
        events.append({"t": 3600 + 15 * i, "kind": "ingest_at_site",
                       "params": {"site": "ncem", "count": 1,
                                  "size_bytes": 700 * GB, "tag": f"ncem-pipe-{i}"}})
    doc["events"] = events
    job = {"project": "ncem", "account": "ncem", "qos": "realtime",
           "nodes": 16, "walltime_limit": 400, "runtime_seconds": 200}
    transfer = {"src": "ncem", "dst": "scratch", "as_account": "ncem",
                "project": "ncem", "caller": "nina", "dst_dir": "/ncem/{tag}"}
    doc["pipelines"] = [
        {"name": "ncem_store", "trigger_tag_prefix": "ncem-store",
         "transfer": transfer, "job": job, "submit_job_on": "transfer_complete"},
        {"name": "ncem_pipelined", "trigger_tag_prefix": "ncem-pipe",
         "transfer": transfer, "job": job, "submit_job_on": "data_ready"},
    ]
    doc["expectations"] = [
        {"name": "pipelining_halves_latency",
         "ratio": {"numerator": "pipelines.ncem_pipelined.mean_latency",
                   "denominator": "pipelines.ncem_store.mean_latency"},
         "op": "<=", "value": 0.55},
        {"name": "all_bursts_reduced", "metric": "pipelines.ncem_pipelined.count",
         "op": "==", "value": 4},
    ]
    return doc


def lz_continuous() -> dict:
    """Round-the-clock small realtime jobs plus periodic transfers, with a
    one-hour compute outage that exercises automatic requeue while storage
    stays up."""
    doc = _base("lz_continuous", horizon=21600)
    doc["links"] = [{"name": "surf-nersc", "capacity": 1 * GB, "system": "dtn"}]
    doc["sites"] = [{"name": "surf", "bandwidth": 1 * GB, "link": "surf-nersc"}]
    doc["projects"] = [
        _project("lz", "erin", collab=["lz"],
                 quotas={"community": {"bytes": 10000 * 1000 * GB, "inodes": 100000}}),
    ]
    doc["policies"]["realtime_projects"] = ["lz"]
    rng = random.Random(0)
    events = [
        {"t": 7200, "kind": "outage",
         "params": {"system": "cori", "end": 10800, "outage_kind": "scheduled",
                    "services_kept_up": ["dtn"]}},
    ]
    for i in range(70):
        events.append({"t": 300 * i + rng.randint(0, 10), "kind": "submit",
                       "params": {"project": "lz", "account": "lz",
                                  "qos": "realtime", "nodes": 1,
                                  "walltime_limit": 300, "runtime_seconds": 280,
                                  "requeue_on_preempt": True,
                                  "tag": f"lz-job-{i:02d}", "caller": "erin"}})
    for i in range(12):
        events.append({"t": 1800 * i, "kind": "transfer",
                       "params": {"src": "surf", "dst": "community", "count": 1,
                                  "size_bytes": 10 * GB, "as_account": "lz",
                                  "project": "lz", "caller": "erin",
                                  "dst_dir": f"/lz/{i}", "tag": f"lz-xfer-{i:02d}"}})
    doc["events"] = sorted(events, key=lambda e: e["t"])
    doc["expectations"] = [
        {"name": "zero_jobs_lost", "metric": "jobs_unfinished", "op": "==", "value": 0},
        {"name": "outage_requeued_jobs", "metric": "requeued_jobs", "op": ">=", "value": 1},
        {"name": "no_grace_violations", "metric": "grace_violations", "op": "==", "value": 0},
    ]
    return doc


_BUILDERS = {
    "fig12_reservation": fig12_reservation,
    "lcls_surge": lcls_surge,
    "desi_nightly": desi_nightly,
    "ncem_stream": ncem_stream,
    "lz_continuous": lz_continuous,
}

BUILTIN_NAMES = tuple(_BUILDERS)


def builtin(name: str) -> Scenario:
    if name not in _BUILDERS:
        raise SfError("unknown-scenario",
                      f"no builtin {name}; known: {', '.join(BUILTIN_NAMES)}")
    return load_scenario(_BUILDERS[name]())
