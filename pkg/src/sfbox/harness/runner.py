"""Scenario runner: builds a facility from a scenario document, drives the
whole workload through the HTTP gateway (in-process), reacts to pipeline
triggers at exact simulated instants, and produces a metrics report plus the
full event log.

Identical scenarios produce byte-identical reports and logs.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction

from fastapi.testclient import TestClient

from ..container import Superfacility
from ..errors import SfError
from ..eventlog import plain_time
from ..facility import NodePool, OutageWindow, Project, Member, SystemDescriptor, SystemKind
from ..gateway.app import create_app
from ..scheduler import JOB_TERMINAL, QOS_PREEMPTIBLE, QOS_REALTIME, SchedulerConfig, percentile_summary
from ..storage import ExternalLink, ExternalSite, StorageTier
from .schema import Scenario

CLIENT_CIDR = "10.0.0.0/8"
CLIENT_IP = "10.0.0.5"


@dataclass
class PipelineInstance:
    pipeline: str
    tag: str
    ready: object  # sim time the triggering data appeared
    transfer_id: int | None = None
    transfer_end: object = None
    job_id: int | None = None
    job_end: object = None
    expects_job: bool = False


@dataclass
class _Client:
    credential_id: str
    secret: str
    token: str = ""
    token_expires: object = None


class ScenarioRunner:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.sf = self._build(scenario)
        self.client = TestClient(create_app(self.sf), raise_server_exceptions=True)
        self.clients: dict[str, _Client] = {}
        self.instances: list[PipelineInstance] = []
        self._by_transfer: dict[int, PipelineInstance] = {}
        self._by_tag: dict[str, PipelineInstance] = {}
        self.failures: list[dict] = []
        self._cursor = 0
        self._bootstrap_clients()

    # -- construction --------------------------------------------------------

    def _build(self, sc: Scenario) -> Superfacility:
        config = SchedulerConfig(
            quantum_seconds=sc.policies.quantum_seconds,
            default_grace_seconds=sc.policies.default_grace_seconds,
            realtime_projects=sc.policies.realtime_projects)
        sf = Superfacility(scheduler_config=config, seed=sc.seed)
        for sys in sc.systems:
            kind = SystemKind(sys.kind)
            desc = SystemDescriptor(name=sys.name, kind=kind)
            if kind == SystemKind.COMPUTE:
                pool = NodePool(name=sys.name, total_nodes=sys.pool.total_nodes,
                                cores_per_node=sys.pool.cores_per_node,
                                realtime_reserve=sys.pool.realtime_reserve)
                sf.add_compute(desc, pool)
            else:
                sf.facility.register_system(desc)
        for tier in sc.tiers:
            sf.storage.add_tier(StorageTier(name=tier.name,
                                            capacity_bytes=tier.capacity_bytes,
                                            internal_bandwidth=tier.bandwidth))
        for link in sc.links:
            sf.storage.add_link(ExternalLink(name=link.name, capacity=link.capacity,
                                             system=link.system))
        for site in sc.sites:
            sf.storage.add_site(ExternalSite(name=site.name, bandwidth=site.bandwidth,
                                             link=site.link))
        for proj in sc.projects:
            sf.facility.add_project(Project(
                id=proj.id,
                allocation_node_hours=proj.allocation_node_hours,
                overdraft_limit=proj.overdraft_limit,
                members=[Member(user=m.user, role=m.role) for m in proj.members],
                collab_accounts=list(proj.collab_accounts),
                quotas={t: (q.bytes, q.inodes) for t, q in proj.quotas.items()}))
        sf.auth.load_bootstrap(sc.policies.auth.model_dump())
        # the outage calendar is known before the run starts
        for ev in sc.events:
            if ev.kind == "outage":
                sf.facility.add_outage(OutageWindow(
                    system=ev.params["system"], start=ev.t, end=ev.params["end"],
                    kind=ev.params.get("outage_kind", "scheduled"),
                    services_kept_up=set(ev.params.get("services_kept_up", []))))
        return sf

    def _bootstrap_clients(self):
        users = sorted({m.user for p in self.scenario.projects for m in p.members})
        for user in users:
            self.sf.auth.approve_rwx(user)
            cred, secret = self.sf.auth.create_credential(user, "rwx", CLIENT_CIDR)
            self.clients[user] = _Client(credential_id=cred.id, secret=secret)

    def _headers(self, user: str) -> dict:
        c = self.clients.get(user)
        if c is None:
            raise SfError("unknown-user", f"scenario caller {user} is not a project member")
        if not c.token or self.sf.now >= c.token_expires:
            tok = self.sf.auth.issue_token(c.credential_id, c.secret, CLIENT_IP)
            c.token, c.token_expires = tok.token, tok.expires_at
        return {"Authorization": f"Bearer {c.token}", "X-Source-IP": CLIENT_IP}

    def _pi(self, project_id: str) -> str:
        return self.sf.facility.get_project(project_id).pi()

    # -- gateway access --------------------------------------------------------

    def api(self, method: str, path: str, caller: str, body: dict | None = None):
        r = self.client.request(method, path, json=body, headers=self._headers(caller))
        data = r.json()
        if r.status_code >= 400:
            self.failures.append({"t": plain_time(self.sf.now), "path": path,
                                  "code": data.get("code"),
                                  "message": data.get("message")})
            return None
        return data

    def _task_result(self, task_id: str, caller: str):
        data = self.api("GET", f"/tasks/{task_id}", caller)
        if data is None:
            return None
        if data["state"] == "failed":
            self.failures.append({"t": plain_time(self.sf.now), "path": f"/tasks/{task_id}",
                                  "code": (data["result"] or {}).get("code"),
                                  "message": (data["result"] or {}).get("message")})
            return None
        return data["result"]

    # -- run loop ---------------------------------------------------------------

    def run(self) -> dict:
        sc = self.scenario
        for ev in sc.events:
            self._advance(ev.t)
            self._dispatch(ev)
            self._scan()
        self._advance(sc.horizon)
        if sc.drain:
            cap = sc.drain_cap if sc.drain_cap is not None else 2 * sc.horizon
            quantum = sc.policies.quantum_seconds
            while self.sf.now < sc.horizon + cap and not self._drained():
                self._advance(self.sf.now + quantum)
        return self.report()

    def _advance(self, t):
        self.sf.run_due()
        self._scan()
        while self.sf.now < t:
            self.sf.advance_step(t)
            self._scan()

    def _drained(self) -> bool:
        for sched in self.sf.schedulers.values():
            for job in sched.jobs.values():
                if job.state not in JOB_TERMINAL:
                    return False
        for inst in self.instances:
            if inst.transfer_id is not None and inst.transfer_end is None:
                return False
            if inst.expects_job and inst.job_end is None:
                return False
        return True

    # -- event dispatch -----------------------------------------------------------

    def _dispatch(self, ev):
        p = ev.params
        if ev.kind == "outage":
            return  # already on the calendar
        if ev.kind in ("ingest_at_site", "exposure", "surge_window"):
            self._dispatch_arrival(ev)
        elif ev.kind == "submit":
            caller = p.get("caller") or self._pi(p["project"])
            body = {"project": p["project"], "account": p["account"],
                    "qos": p.get("qos", "regular"), "nodes": p.get("nodes", 1),
                    "walltime_limit": p.get("walltime_limit", 600),
                    "runtime_seconds": p.get("runtime_seconds"),
                    "deadline": p.get("deadline"),
                    "requeue_on_preempt": p.get("requeue_on_preempt", False),
                    "reservation": p.get("reservation"),
                    "payload_tag": p.get("tag", "")}
            data = self.api("POST", "/compute/jobs", caller, body)
            if data is not None:
                self._task_result(data["task_id"], caller)
        elif ev.kind == "transfer":
            self._dispatch_transfer(ev)
        elif ev.kind == "reserve_bandwidth":
            try:
                self.sf.storage.reserve_bandwidth(p["link"], p["rate"], p["start"],
                                                  p["end"], p["project"])
            except SfError as e:
                self.failures.append({"t": plain_time(self.sf.now),
                                      "path": "reserve_bandwidth",
                                      "code": e.code, "message": e.message})
        elif ev.kind == "reservation":
            caller = p.get("caller") or self._pi(p["project"])
            body = {"name": p["name"], "project": p["project"],
                    "node_count": p["node_count"], "start": p["start"],
                    "end": p["end"],
                    "allow_preemptible": p.get("allow_preemptible", False),
                    "grace_seconds": p.get("grace_seconds")}
            data = self.api("POST", "/reservations", caller, body)
            if data is not None:
                result = self._task_result(data["task_id"], caller)
                if result is not None and not result.get("accepted", False):
                    self.failures.append({"t": plain_time(self.sf.now),
                                          "path": "/reservations",
                                          "code": "reservation-rejected",
                                          "message": result.get("reason")})

    def _dispatch_arrival(self, ev):
        """Data appears at an external site; matching pipelines react."""
        p = ev.params
        site = p["site"]
        count = p.get("count") or p.get("images") or 1
        size = p["size_bytes"]
        tag = p.get("tag", f"arrival-{ev.t}")
        paths = [f"/{tag}/f{i:04d}" for i in range(count)]
        for path in paths:
            self.sf.storage.ingest_at_site(site, path, size)
        for pipe in self.scenario.pipelines:
            if not tag.startswith(pipe.trigger_tag_prefix):
                continue
            inst = PipelineInstance(pipeline=pipe.name, tag=tag, ready=self.sf.now,
                                    expects_job=pipe.job is not None)
            self.instances.append(inst)
            self._by_tag[tag] = inst
            tr = pipe.transfer
            caller = tr.caller or self._pi(tr.project)
            body = {"src": tr.src, "dst": tr.dst, "paths": paths,
                    "as_account": tr.as_account, "project": tr.project,
                    "dst_dir": tr.dst_dir.format(tag=tag), "link": tr.link,
                    "tag": tag}
            data = self.api("POST", "/storage/transfers", caller, body)
            if data is None:
                continue
            inst.transfer_id = data["transfer_id"]
            self._by_transfer[inst.transfer_id] = inst
            if pipe.job is not None and pipe.submit_job_on == "data_ready":
                self._submit_pipeline_job(inst, pipe)

    def _dispatch_transfer(self, ev):
        p = ev.params
        src = p["src"]
        tag = p.get("tag", "")
        paths = p.get("paths")
        if paths is None:
            count = p.get("count", 1)
            paths = [f"/{tag or 'xfer'}/f{i:04d}" for i in range(count)]
            for path in paths:
                self.sf.storage.ingest_at_site(src, path, p["size_bytes"])
        caller = p.get("caller") or self._pi(p["project"])
        body = {"src": src, "dst": p["dst"], "paths": paths,
                "as_account": p["as_account"], "project": p["project"],
                "dst_dir": p.get("dst_dir", "/"), "link": p.get("link"),
                "tag": tag}
        self.api("POST", "/storage/transfers", caller, body)

    def _submit_pipeline_job(self, inst: PipelineInstance, pipe):
        tpl = pipe.job
        caller = pipe.transfer.caller or self._pi(tpl.project)
        body = {"project": tpl.project, "account": tpl.account, "qos": tpl.qos,
                "nodes": tpl.nodes, "walltime_limit": tpl.walltime_limit,
                "runtime_seconds": tpl.runtime_seconds, "deadline": tpl.deadline,
                "requeue_on_preempt": tpl.requeue_on_preempt,
                "reservation": tpl.reservation, "payload_tag": inst.tag}
        data = self.api("POST", "/compute/jobs", caller, body)
        if data is None:
            return
        result = self._task_result(data["task_id"], caller)
        if result is not None:
            inst.job_id = result["job_id"]

    # -- pipeline reactions ------------------------------------------------------

    def _scan(self):
        """React to engine events appended since the last scan."""
        records = self.sf.log.records
        while self._cursor < len(records):
            rec = records[self._cursor]
            self._cursor += 1
            if rec["kind"] == "transfer_complete":
                inst = self._by_transfer.get(rec.get("task"))
                if inst is None:
                    continue
                inst.transfer_end = rec["t"]
                pipe = self._pipeline(inst.pipeline)
                if pipe.job is not None and pipe.submit_job_on == "transfer_complete" \
                        and inst.job_id is None:
                    self._submit_pipeline_job(inst, pipe)
            elif rec["kind"] == "job_complete":
                inst = self._by_tag.get(rec.get("tag", ""))
                if inst is not None:
                    inst.job_end = rec["end"]

    def _pipeline(self, name: str):
        for pipe in self.scenario.pipelines:
            if pipe.name == name:
                return pipe
        raise SfError("unknown-scenario", f"no pipeline {name}")

    # -- metrics -------------------------------------------------------------------

    def report(self) -> dict:
        sf = self.sf
        now = sf.now
        report = {
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "horizon": self.scenario.horizon,
            "ended_at": plain_time(now),
            "failures": self.failures,
            "failure_count": len(self.failures),
        }
        self._compute_metrics(report)
        self._transfer_metrics(report)
        self._pipeline_metrics(report)
        self._storage_metrics(report)
        self._conservation_metrics(report)
        return report

    def _compute_metrics(self, report):
        sf = self.sf
        report["utilization"] = {}
        report["waits"] = {}
        submitted = completed = unfinished = requeue_events = 0
        deadline_jobs = deadline_hits = 0
        for name, sched in sf.schedulers.items():
            if sf.now > 0:
                wr = sched.wait_time_report((0, sf.now))
                report["utilization"][name] = wr["utilization"]
                report["waits"][name] = wr["waits"]
            for job in sched.jobs.values():
                submitted += 1
                if job.state == "completed":
                    completed += 1
                elif job.state not in ("cancelled", "preempted_killed"):
                    unfinished += 1
                if job.spec.deadline is not None:
                    deadline_jobs += 1
                    if job.state == "completed" and job.end_time <= job.spec.deadline:
                        deadline_hits += 1
        rt_delay = 0
        notices = 0
        kill_deadlines: dict[int, object] = {}
        log_violations = 0
        requeued_ids = set()
        for rec in sf.log.records:
            kind = rec["kind"]
            if kind == "job_start" and rec["qos"] == QOS_REALTIME:
                rt_delay = max(rt_delay, rec["wait"])
            elif kind == "preempt_notice":
                notices += 1
                kill_deadlines[rec["job"]] = rec["kill_at"]
            elif kind in ("job_killed", "job_requeued"):
                if kind == "job_requeued":
                    requeue_events += 1
                    requeued_ids.add(rec["job"])
                kill_at = kill_deadlines.pop(rec["job"], None)
                if kill_at is not None and rec["t"] > kill_at:
                    log_violations += 1
        engine_violations = sum(s.grace_violations for s in sf.schedulers.values())
        report.update({
            "jobs_submitted": submitted,
            "jobs_completed": completed,
            "jobs_unfinished": unfinished,
            "requeued_jobs": len(requeued_ids),
            "requeue_events": requeue_events,
            "deadline_jobs": deadline_jobs,
            "deadline_hits": deadline_hits,
            "deadline_misses": deadline_jobs - deadline_hits,
            "deadline_hit_rate": (deadline_hits / deadline_jobs) if deadline_jobs else 1.0,
            "realtime_max_start_delay": plain_time(rt_delay),
            "preempt_notices": notices,
            "grace_violations": log_violations,
            "engine_grace_violations": engine_violations,
        })
        report["reservation_occupancy"] = {}
        for sched in sf.schedulers.values():
            for res in sched.reservations.values():
                end = min(res.end, sf.now)
                if end <= res.start or not res.nodes:
                    continue
                occupied = Fraction(0)
                for _, qos, nodes, s, e in sched.all_intervals():
                    if qos not in (QOS_REALTIME, QOS_PREEMPTIBLE):
                        continue
                    lo, hi = max(Fraction(s), Fraction(res.start)), min(Fraction(e), Fraction(end))
                    if hi > lo:
                        occupied += Fraction(len(nodes & res.nodes)) * (hi - lo)
                window = Fraction(len(res.nodes)) * (Fraction(end) - Fraction(res.start))
                report["reservation_occupancy"][res.name] = float(occupied / window)

    def _transfer_metrics(self, report):
        by_link: dict[str, list] = {}
        by_tag: dict[str, object] = {}
        for rec in self.sf.log.records:
            if rec["kind"] != "transfer_complete":
                continue
            duration = rec["duration"]
            link = rec.get("link")
            if link:
                by_link.setdefault(link, []).append(duration)
            if rec.get("tag"):
                by_tag[rec["tag"]] = plain_time(duration)
        report["transfer_latency"] = {link: percentile_summary(ds)
                                      for link, ds in sorted(by_link.items())}
        report["transfer_tags"] = dict(sorted(by_tag.items()))

    def _pipeline_metrics(self, report):
        out = {}
        for pipe in self.scenario.pipelines:
            latencies = []
            total = 0
            for inst in self.instances:
                if inst.pipeline != pipe.name:
                    continue
                total += 1
                if inst.transfer_end is None or (inst.expects_job and inst.job_end is None):
                    continue
                done = inst.transfer_end
                if inst.job_end is not None and inst.job_end > done:
                    done = inst.job_end
                latencies.append(Fraction(done) - Fraction(inst.ready))
            entry = {"instances": total, "count": len(latencies)}
            if latencies:
                entry["min_latency"] = plain_time(min(latencies))
                entry["max_latency"] = plain_time(max(latencies))
                entry["mean_latency"] = float(sum(latencies) / len(latencies))
            out[pipe.name] = entry
        report["pipelines"] = out

    def _storage_metrics(self, report):
        owners: dict[str, dict[str, int]] = {}
        for tier in self.sf.storage.tiers:
            counts: dict[str, int] = {}
            for rec in self.sf.storage.records[tier].values():
                if not rec.is_dir:
                    counts[rec.owner] = counts.get(rec.owner, 0) + 1
            owners[tier] = dict(sorted(counts.items()))
        report["file_owners"] = owners

    def _conservation_metrics(self, report):
        sf = self.sf
        busy = Fraction(0)
        charged = Fraction(0)
        node_ok = True
        for sched in sf.schedulers.values():
            for _, _, nodes, s, e in sched.busy_intervals:
                busy += Fraction(len(nodes)) * (Fraction(e) - Fraction(s))
            charged += sched.charged_node_hours
            try:
                sched.pool.check_conservation()
            except AssertionError:
                node_ok = False
        expected = busy / 3600
        denom = expected if expected > 0 else Fraction(1)
        rel = abs(charged - expected) / denom
        quota_ok = True
        for project in sf.facility.projects:
            for tier in sf.storage.tiers:
                if sf.storage._project_usage(project, tier) != \
                        sf.storage.recompute_usage(project, tier):
                    quota_ok = False
        report["conservation"] = {
            "busy_node_seconds": plain_time(busy),
            "charged_node_hours": plain_time(charged),
            "relative_error": float(rel),
            "node_conservation_ok": node_ok,
            "quota_conservation_ok": quota_ok,
        }


def run(scenario: Scenario):
    """Execute a scenario; returns (metrics report, event log as JSONL)."""
    runner = ScenarioRunner(scenario)
    report = runner.run()
    return report, runner.sf.log.to_jsonl()


_OPS = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
}


def _lookup(report: dict, dotted: str):
    cur = report
    for part in dotted.split("."):
        if not isinstance(cur, dict) or part not in cur:
            raise SfError("unknown-metric", f"no metric {dotted} in report")
        cur = cur[part]
    return cur


def evaluate(report: dict, expectations) -> list[dict]:
    """Score a report against named expectations; one verdict per row."""
    results = []
    for exp in expectations:
        try:
            if exp.metric is not None:
                observed = _lookup(report, exp.metric)
            else:
                num = _lookup(report, exp.ratio.numerator)
                den = _lookup(report, exp.ratio.denominator)
                observed = float(num) / float(den) if den else None
        except SfError:
            observed = None
        if observed is None:
            ok, margin = False, None
        else:
            ok = _OPS[exp.op](observed, exp.value)
            if exp.op in (">=", ">"):
                margin = observed - exp.value
            elif exp.op in ("<=", "<"):
                margin = exp.value - observed
            else:
                margin = -abs(observed - exp.value)
        results.append({"name": exp.name, "pass": bool(ok),
                        "observed": observed, "threshold": exp.value,
                        "op": exp.op, "margin": margin})
    return results


def report_to_csv(report: dict) -> str:
    """Flatten a report to metric,value CSV rows (lists rendered as JSON)."""
    rows = []

    def walk(prefix, value):
        if isinstance(value, dict):
            for k in sorted(value):
                walk(f"{prefix}.{k}" if prefix else str(k), value[k])
        elif isinstance(value, list):
            rows.append((prefix, json.dumps(value, sort_keys=True)))
        else:
            rows.append((prefix, value))

    walk("", report)
    lines = ["metric,value"]
    for key, value in rows:
        text = "" if value is None else str(value)
        if "," in text or '"' in text:
            text = '"' + text.replace('"', '""') + '"'
        lines.append(f"{key},{text}")
    return "\n".join(lines)
