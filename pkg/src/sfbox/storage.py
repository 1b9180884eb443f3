"""Tiered storage: scratch / community / archive namespaces with quotas,
ownership and permission mutation, usage reporting, asynchronous transfers
(including collaboration-account writes), and bandwidth-reserved external
links that shape transfer durations.

Files carry sizes and a checksum token, never real bytes. Transfer progress
is tracked in exact rational arithmetic so durations follow the closed form
bytes / effective_rate with no float drift.
"""

import posixpath
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import SfError
from .eventlog import plain_time
from .facility import Facility

TIERS = ("scratch", "community", "archive")


@dataclass
class StorageTier:
    name: str
    capacity_bytes: int
    internal_bandwidth: int  # bytes per second
    purge_after_seconds: int | None = None  # scratch only, default off


@dataclass
class ExternalLink:
    name: str
    capacity: int  # bytes per second
    system: str | None = None  # facility system whose state gates the link


@dataclass
class ExternalSite:
    name: str
    bandwidth: int  # bytes per second at the site end
    link: str  # link used to reach the facility


@dataclass
class FileRecord:
    path: str
    owner: str
    group: str  # owning project id
    mode: int  # 9-bit rwx triple
    size_bytes: int
    tier: str  # tier name or external site name
    mtime: object
    is_dir: bool = False

    def __post_init__(self):
        if not (0 <= self.mode <= 0o777):
            raise SfError("schema-violation", f"bad mode {oct(self.mode)}")

    @property
    def checksum(self) -> str:
        return f"ck-{self.size_bytes}-{posixpath.basename(self.path)}"


@dataclass
class BandwidthReservation:
    link: str
    rate: int
    start: int
    end: int
    project: str


@dataclass
class TransferTask:
    id: int
    src: str
    dst: str
    as_account: str
    project: str
    dst_dir: str
    bytes_total: int
    files: list  # FileRecord snapshots taken at submit
    link: str | None = None
    state: str = "queued"  # queued|active|completed|failed|stalled
    bytes_done: Fraction = Fraction(0)
    started: object = None
    finished: object = None
    delete_source: bool = False
    preserve_owner: bool = False  # tier migrations keep file ownership
    error: str | None = None
    tag: str = ""


class StorageEngine:
    def __init__(self, facility: Facility):
        self.facility = facility
        self.log = facility.log
        self.t = Fraction(0)
        self.tiers: dict[str, StorageTier] = {}
        self.sites: dict[str, ExternalSite] = {}
        self.links: dict[str, ExternalLink] = {}
        # namespace per endpoint (tier or site): path -> FileRecord
        self.records: dict[str, dict[str, FileRecord]] = {}
        # (project, tier) -> account -> [bytes, inodes]
        self.usage: dict[tuple, dict[str, list]] = {}
        self.tier_bytes: dict[str, int] = {}  # running per-tier totals
        self.transfers: dict[int, TransferTask] = {}
        self.bw_reservations: list[BandwidthReservation] = []
        self.next_task_id = 1
        self.top_dirs = 5

    # -- topology ----------------------------------------------------------

    def add_tier(self, tier: StorageTier):
        if tier.name not in TIERS:
            raise SfError("unknown-tier", f"tier must be one of {TIERS}")
        self.tiers[tier.name] = tier
        self.records.setdefault(tier.name, {})
        self.tier_bytes.setdefault(tier.name, 0)

    def add_link(self, link: ExternalLink):
        self.links[link.name] = link

    def add_site(self, site: ExternalSite):
        if site.link not in self.links:
            raise SfError("unknown-link", f"no link {site.link}")
        self.sites[site.name] = site
        self.records.setdefault(site.name, {})

    def _endpoint_bw(self, name: str) -> int:
        if name in self.tiers:
            return self.tiers[name].internal_bandwidth
        if name in self.sites:
            return self.sites[name].bandwidth
        raise SfError("unknown-endpoint", f"no endpoint {name}")

    def _is_tier(self, name: str) -> bool:
        return name in self.tiers

    def _link_up(self, link_name: str) -> bool:
        link = self.links[link_name]
        if link.system is None or link.system not in self.facility.systems:
            return True
        return self.facility.is_up(link.system)

    # -- namespace ---------------------------------------------------------

    def _ns(self, endpoint: str) -> dict[str, FileRecord]:
        if endpoint not in self.records:
            raise SfError("unknown-endpoint", f"no endpoint {endpoint}")
        return self.records[endpoint]

    def _check_parent(self, endpoint: str, path: str):
        parent = posixpath.dirname(path)
        if parent in ("", "/"):
            return
        rec = self._ns(endpoint).get(parent)
        if rec is None or not rec.is_dir:
            raise SfError("unknown-path", f"parent directory {parent} does not exist")

    def mkdir(self, endpoint: str, path: str, owner: str, group: str,
              mode: int = 0o750, parents: bool = False):
        ns = self._ns(endpoint)
        if path in ns:
            rec = ns[path]
            if rec.is_dir:
                return rec
            raise SfError("duplicate-path", f"{path} exists and is not a directory")
        if parents:
            parent = posixpath.dirname(path)
            if parent not in ("", "/"):
                self.mkdir(endpoint, parent, owner, group, mode, parents=True)
        else:
            self._check_parent(endpoint, path)
        rec = FileRecord(path=path, owner=owner, group=group, mode=mode,
                         size_bytes=0, tier=endpoint, mtime=self.facility.now, is_dir=True)
        ns[path] = rec
        if self._is_tier(endpoint):
            self._usage_add(group, endpoint, owner, 0, 1)
        return rec

    def ingest(self, path: str, size_bytes: int, owner: str, group: str,
               mode: int, tier: str) -> FileRecord:
        ns = self._ns(tier)
        if path in ns:
            raise SfError("duplicate-path", f"{path} already exists on {tier}")
        self._check_parent(tier, path)
        if self._is_tier(tier):
            self._admit(group, tier, size_bytes, 1)
        rec = FileRecord(path=path, owner=owner, group=group, mode=mode,
                         size_bytes=size_bytes, tier=tier, mtime=self.facility.now)
        ns[path] = rec
        if self._is_tier(tier):
            self._usage_add(group, tier, owner, size_bytes, 1)
        self.log.append(self.facility.now, "file_ingested", path=path, tier=tier,
                        bytes=size_bytes, owner=owner)
        return rec

    def ingest_at_site(self, site: str, path: str, size_bytes: int,
                       owner: str = "site", group: str = "site") -> FileRecord:
        """Data appearing at an external facility (a traffic source)."""
        if site not in self.sites:
            raise SfError("unknown-endpoint", f"no site {site}")
        ns = self._ns(site)
        parent = posixpath.dirname(path)
        if parent not in ("", "/") and parent not in ns:
            self.mkdir(site, parent, owner, group, parents=True)
        rec = FileRecord(path=path, owner=owner, group=group, mode=0o644,
                         size_bytes=size_bytes, tier=site, mtime=self.facility.now)
        ns[path] = rec
        self.log.append(self.facility.now, "site_ingest", site=site, path=path,
                        bytes=size_bytes)
        return rec

    def stat(self, endpoint: str, path: str) -> FileRecord:
        rec = self._ns(endpoint).get(path)
        if rec is None:
            raise SfError("unknown-path", f"no such path {path} on {endpoint}")
        return rec

    def ls(self, endpoint: str, path: str) -> list[FileRecord]:
        ns = self._ns(endpoint)
        rec = ns.get(path)
        if rec is None:
            raise SfError("unknown-path", f"no such path {path} on {endpoint}")
        if not rec.is_dir:
            return [rec]
        prefix = path.rstrip("/") + "/"
        return sorted((r for p, r in ns.items()
                       if p.startswith(prefix) and "/" not in p[len(prefix):]),
                      key=lambda r: r.path)

    def delete(self, endpoint: str, path: str):
        ns = self._ns(endpoint)
        rec = ns.pop(path, None)
        if rec is None:
            raise SfError("unknown-path", f"no such path {path} on {endpoint}")
        if self._is_tier(endpoint):
            self._usage_add(rec.group, endpoint, rec.owner, -rec.size_bytes, -1)
        return rec

    # -- permissions -------------------------------------------------------

    def _subtree(self, endpoint: str, path: str) -> list[FileRecord]:
        ns = self._ns(endpoint)
        root = self.stat(endpoint, path)
        out = [root]
        if root.is_dir:
            prefix = path.rstrip("/") + "/"
            out.extend(r for p, r in ns.items() if p.startswith(prefix))
        return out

    def set_ownership_mode(self, endpoint: str, path: str, caller: str,
                           new_owner: str | None = None, new_group: str | None = None,
                           new_mode: int | None = None, mode_or: int | None = None,
                           recursive: bool = False) -> int:
        root = self.stat(endpoint, path)
        if not self._caller_may_mutate(caller, root):
            raise SfError("permission-denied",
                          f"{caller} is neither owner nor pi of {root.group}")
        targets = self._subtree(endpoint, path) if recursive else [root]
        for rec in targets:
            if new_owner is not None and new_owner != rec.owner:
                if self._is_tier(endpoint):
                    self._usage_add(rec.group, endpoint, rec.owner, -rec.size_bytes, -1)
                    self._usage_add(rec.group, endpoint, new_owner, rec.size_bytes, 1)
                rec.owner = new_owner
            if new_group is not None and new_group != rec.group:
                if self._is_tier(endpoint):
                    self._usage_add(rec.group, endpoint, rec.owner, -rec.size_bytes, -1)
                    self._usage_add(new_group, endpoint, rec.owner, rec.size_bytes, 1)
                rec.group = new_group
            if new_mode is not None:
                rec.mode = new_mode
            if mode_or is not None:
                rec.mode |= mode_or
        self.log.append(self.facility.now, "ownership_mode_change", path=path,
                        endpoint=endpoint, count=len(targets), caller=caller)
        return len(targets)

    def _caller_may_mutate(self, caller: str, rec: FileRecord) -> bool:
        if caller == rec.owner:
            return True
        project = self.facility.projects.get(rec.group)
        if project is not None:
            try:
                return project.pi() == caller
            except SfError:
                return False
        return False

    def can_read(self, account: str, rec: FileRecord) -> bool:
        """POSIX-style read check: owner, group member with group-read, or
        world-read."""
        if account == rec.owner and rec.mode & 0o400:
            return True
        project = self.facility.projects.get(rec.group)
        if project is not None and account in project.accounts() and rec.mode & 0o040:
            return True
        return bool(rec.mode & 0o004)

    # -- quota accounting ---------------------------------------------------

    def _usage_add(self, project: str, tier: str, account: str, dbytes: int, dinodes: int):
        rows = self.usage.setdefault((project, tier), {})
        row = rows.setdefault(account, [0, 0])
        row[0] += dbytes
        row[1] += dinodes
        if tier in self.tier_bytes:
            self.tier_bytes[tier] += dbytes

    def _project_usage(self, project: str, tier: str) -> tuple[int, int]:
        rows = self.usage.get((project, tier), {})
        return (sum(r[0] for r in rows.values()), sum(r[1] for r in rows.values()))

    def _admit(self, project: str, tier: str, add_bytes: int, add_inodes: int):
        proj = self.facility.get_project(project)
        limits = proj.quotas.get(tier)
        used_b, used_i = self._project_usage(project, tier)
        if limits is not None:
            if used_b + add_bytes > limits[0]:
                raise SfError("quota-exceeded",
                              f"byte quota on {tier} for {project}: "
                              f"{used_b + add_bytes} > {limits[0]}")
            if used_i + add_inodes > limits[1]:
                raise SfError("quota-exceeded",
                              f"inode quota on {tier} for {project}: "
                              f"{used_i + add_inodes} > {limits[1]}")
        if self.tier_bytes[tier] + add_bytes > self.tiers[tier].capacity_bytes:
            raise SfError("capacity-exceeded", f"tier {tier} capacity exceeded")

    def usage_report(self, project: str, tier: str | None = None) -> dict:
        proj = self.facility.get_project(project)
        tiers = [tier] if tier else list(self.tiers)
        out = {"project": project, "tiers": {}}
        for t in tiers:
            if t not in self.tiers:
                raise SfError("unknown-tier", f"no tier {t}")
            rows = self.usage.get((project, t), {})
            limits = proj.quotas.get(t)
            dir_sizes: dict[str, int] = {}
            for p, rec in self.records[t].items():
                if rec.group != project or rec.is_dir:
                    continue
                d = posixpath.dirname(p)
                dir_sizes[d] = dir_sizes.get(d, 0) + rec.size_bytes
            top = sorted(dir_sizes.items(), key=lambda kv: (-kv[1], kv[0]))[:self.top_dirs]
            out["tiers"][t] = {
                "users": {acc: {"bytes": r[0], "inodes": r[1]}
                          for acc, r in sorted(rows.items())},
                "total_bytes": sum(r[0] for r in rows.values()),
                "total_inodes": sum(r[1] for r in rows.values()),
                "limit_bytes": limits[0] if limits else None,
                "limit_inodes": limits[1] if limits else None,
                "top_directories": [{"path": p, "bytes": b} for p, b in top],
            }
        return out

    def recompute_usage(self, project: str, tier: str) -> tuple[int, int]:
        """Independent full-tree recomputation (oracle for usage_report)."""
        b = i = 0
        for rec in self.records[tier].values():
            if rec.group == project:
                b += rec.size_bytes
                i += 1
        return b, i

    # -- transfers ----------------------------------------------------------

    def authorized_account(self, caller: str, account: str) -> bool:
        if caller == account:
            return True
        for p in self.facility.projects.values():
            if caller in p.member_ids() and account in p.collab_accounts:
                return True
        return False

    def submit_transfer(self, src: str, dst: str, paths: list[str], as_account: str,
                        caller: str, project: str, dst_dir: str = "/",
                        link: str | None = None, delete_source: bool = False,
                        preserve_owner: bool = False, tag: str = "") -> TransferTask:
        if not self.authorized_account(caller, as_account):
            raise SfError("collab-account-unauthorized",
                          f"{caller} may not act as {as_account}")
        files = [self.stat(src, p) for p in paths]
        external = src in self.sites or dst in self.sites
        if external and link is None:
            site = self.sites.get(src) or self.sites.get(dst)
            link = site.link
        if link is not None and link not in self.links:
            raise SfError("unknown-link", f"no link {link}")
        total = sum(f.size_bytes for f in files)
        if self._is_tier(dst):
            self._admit(project, dst, total, len(files))
        task = TransferTask(id=self.next_task_id, src=src, dst=dst,
                            as_account=as_account, project=project, dst_dir=dst_dir,
                            bytes_total=total, files=files,
                            link=link if external else None,
                            delete_source=delete_source,
                            preserve_owner=preserve_owner, tag=tag)
        self.next_task_id += 1
        self.transfers[task.id] = task
        if total == 0:
            task.state = "completed"
            task.started = task.finished = self.facility.now
            self.log.append(self.facility.now, "transfer_complete", task=task.id,
                            bytes=0, duration=0, link=task.link, tag=task.tag)
        else:
            task.state = "active"
            task.started = self.facility.now
            self.log.append(self.facility.now, "transfer_start", task=task.id,
                            src=src, dst=dst, bytes=total, link=task.link,
                            account=as_account, tag=tag)
        return task

    def migrate(self, paths: list[str], from_tier: str, to_tier: str,
                caller: str, project: str, dst_dir: str | None = None) -> TransferTask:
        if from_tier not in self.tiers or to_tier not in self.tiers:
            raise SfError("unknown-tier", "migrate runs between internal tiers")
        if from_tier == to_tier:
            task = TransferTask(id=self.next_task_id, src=from_tier, dst=to_tier,
                                as_account=caller, project=project, dst_dir="/",
                                bytes_total=0, files=[], state="completed",
                                started=self.facility.now, finished=self.facility.now)
            self.next_task_id += 1
            self.transfers[task.id] = task
            return task
        dst_dir = dst_dir or posixpath.dirname(paths[0])
        # archive migrations free the source tier; everything else stages a copy
        return self.submit_transfer(from_tier, to_tier, paths, caller, caller,
                                    project, dst_dir=dst_dir,
                                    delete_source=(to_tier == "archive"),
                                    preserve_owner=True)

    def reserve_bandwidth(self, link: str, rate: int, start: int, end: int,
                          project: str) -> BandwidthReservation:
        if link not in self.links:
            raise SfError("unknown-link", f"no link {link}")
        if not start < end:
            raise SfError("schema-violation", "window start must precede end")
        capacity = self.links[link].capacity
        points = sorted({start} | {r.start for r in self.bw_reservations
                                   if r.link == link and r.start < end and start < r.end})
        for t in points:
            t = max(t, start)
            total = rate + sum(r.rate for r in self.bw_reservations
                               if r.link == link and r.start <= t < r.end)
            if total > capacity:
                raise SfError("bandwidth-infeasible",
                              f"conflict at t={plain_time(t)}: {total} > {capacity} on {link}")
        res = BandwidthReservation(link=link, rate=rate, start=start, end=end,
                                   project=project)
        self.bw_reservations.append(res)
        self.log.append(self.facility.now, "bandwidth_reserved", link=link,
                        rate=rate, start=start, end=end, project=project)
        return res

    # -- transfer progress (exact rational clock) ---------------------------

    def _reserved_rate(self, link: str, project: str, t) -> int | None:
        total = 0
        found = False
        for r in self.bw_reservations:
            if r.link == link and r.project == project and r.start <= t < r.end:
                total += r.rate
                found = True
        return total if found else None

    def _rates(self, t) -> dict[int, Fraction]:
        """Current effective rate per active transfer."""
        active = [x for x in self.transfers.values() if x.state in ("active", "stalled")]
        rates: dict[int, Fraction] = {}
        by_link: dict[str, list[TransferTask]] = {}
        for x in active:
            if x.link is None:
                rates[x.id] = Fraction(min(self._endpoint_bw(x.src), self._endpoint_bw(x.dst)))
            else:
                by_link.setdefault(x.link, []).append(x)
        for link_name, tasks in by_link.items():
            if not self._link_up(link_name):
                for x in tasks:
                    rates[x.id] = Fraction(0)
                continue
            capacity = self.links[link_name].capacity
            reserved_tasks: dict[str, list[TransferTask]] = {}
            unreserved: list[TransferTask] = []
            reserved_total = 0
            for x in tasks:
                rr = self._reserved_rate(link_name, x.project, t)
                if rr is not None:
                    if x.project not in reserved_tasks:
                        reserved_total += rr
                    reserved_tasks.setdefault(x.project, []).append(x)
                else:
                    unreserved.append(x)
            # projects holding a reservation split exactly their reserved rate
            for proj, xs in reserved_tasks.items():
                share = Fraction(self._reserved_rate(link_name, proj, t)) / len(xs)
                for x in xs:
                    rates[x.id] = min(share, Fraction(min(self._endpoint_bw(x.src),
                                                          self._endpoint_bw(x.dst))))
            # everyone else splits the unreserved capacity equally
            if unreserved:
                share = Fraction(max(capacity - reserved_total, 0)) / len(unreserved)
                for x in unreserved:
                    rates[x.id] = min(share, Fraction(min(self._endpoint_bw(x.src),
                                                          self._endpoint_bw(x.dst))))
        return rates

    def _boundaries(self, after, upto) -> list:
        """Rate-changing instants in (after, upto] beyond completions."""
        times = set()
        for r in self.bw_reservations:
            for b in (r.start, r.end):
                if after < b <= upto:
                    times.add(b)
        return sorted(times)

    def next_event_time(self, limit):
        """Earliest instant up to `limit` at which transfer state changes."""
        best = limit
        rates = self._rates(self.t)
        for x in self.transfers.values():
            if x.state not in ("active", "stalled"):
                continue
            rate = rates.get(x.id, Fraction(0))
            if rate > 0:
                done_at = self.t + (Fraction(x.bytes_total) - x.bytes_done) / rate
                if done_at < best:
                    best = done_at
        for b in self._boundaries(self.t, limit):
            if b < best:
                best = b
        return best

    def advance(self, to):
        to = Fraction(to)
        while self.t < to:
            rates = self._rates(self.t)
            step_end = to
            for b in self._boundaries(self.t, to):
                step_end = min(step_end, Fraction(b))
                break
            for x in self.transfers.values():
                if x.state not in ("active", "stalled"):
                    continue
                rate = rates.get(x.id, Fraction(0))
                x.state = "stalled" if rate == 0 else "active"
                if rate > 0:
                    done_at = self.t + (Fraction(x.bytes_total) - x.bytes_done) / rate
                    if done_at < step_end:
                        step_end = done_at
            for x in self.transfers.values():
                if x.state == "active":
                    x.bytes_done += rates[x.id] * (step_end - self.t)
            self.t = step_end
            for x in list(self.transfers.values()):
                if x.state == "active" and x.bytes_done >= x.bytes_total:
                    self._complete_transfer(x)

    def _complete_transfer(self, task: TransferTask):
        task.bytes_done = Fraction(task.bytes_total)
        task.finished = self.t
        try:
            if self._is_tier(task.dst):
                self._admit(task.project, task.dst, task.bytes_total, len(task.files))
        except SfError as e:
            task.state = "failed"
            task.error = e.code
            self.log.append(self.t, "transfer_failed", task=task.id, error=e.code)
            return
        ns = self._ns(task.dst)
        for f in task.files:
            dst_path = posixpath.join(task.dst_dir, posixpath.basename(f.path))
            parent = posixpath.dirname(dst_path)
            if parent not in ("", "/") and parent not in ns:
                self.mkdir(task.dst, parent, task.as_account, task.project, parents=True)
            if dst_path in ns:
                old = ns[dst_path]
                if self._is_tier(task.dst):
                    self._usage_add(old.group, task.dst, old.owner, -old.size_bytes, -1)
            owner = f.owner if task.preserve_owner else task.as_account
            rec = FileRecord(path=dst_path, owner=owner, group=task.project,
                             mode=f.mode, size_bytes=f.size_bytes, tier=task.dst,
                             mtime=f.mtime)
            ns[dst_path] = rec
            if self._is_tier(task.dst):
                self._usage_add(task.project, task.dst, owner, f.size_bytes, 1)
        if task.delete_source:
            for f in task.files:
                if f.path in self.records[task.src]:
                    self.delete(task.src, f.path)
        task.state = "completed"
        self.log.append(self.t, "transfer_complete", task=task.id,
                        bytes=task.bytes_total,
                        duration=task.finished - task.started, link=task.link,
                        account=task.as_account, dst=task.dst, tag=task.tag)

    def query_transfer(self, task_id: int) -> dict:
        task = self.transfers.get(task_id)
        if task is None:
            raise SfError("not-found", f"no transfer {task_id}")
        return {
            "id": task.id, "state": task.state, "src": task.src, "dst": task.dst,
            "as_account": task.as_account, "bytes_total": task.bytes_total,
            "bytes_done": plain_time(task.bytes_done),
            "started": plain_time(task.started) if task.started is not None else None,
            "finished": plain_time(task.finished) if task.finished is not None else None,
            "link": task.link, "error": task.error,
        }

    def export_namespace(self) -> dict:
        return {
            "snapshot_version": 1,
            "endpoints": {
                ep: [{"path": r.path, "owner": r.owner, "group": r.group,
                      "mode": r.mode, "size_bytes": r.size_bytes,
                      "mtime": plain_time(r.mtime), "is_dir": r.is_dir}
                     for _, r in sorted(ns.items())]
                for ep, ns in sorted(self.records.items())
            },
        }
