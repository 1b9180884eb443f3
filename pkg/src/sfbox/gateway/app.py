"""HTTP facade over the engines: the seven API component groups (account,
compute, status, storage, utilities, tasks, reservations) plus the auth
endpoints that mint sessions and tokens.

Authentication is enforced in middleware against AUTH_MATRIX, so the
allow/deny outcome for every (endpoint, scope) pair is a single table that
both the server and the test suite read. Mutating endpoints honor an
Idempotency-Key header: replaying a key returns the original response.
"""

import json
import re

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, Response

from ..auth import SCOPE_READ_ONLY, SCOPE_RWX
from ..container import Superfacility
from ..errors import SfError, http_status
from ..eventlog import plain_time
from ..scheduler import JobSpec
from . import models
from .tasks import TaskRegistry

# (method, path regex, required scope); scope None = public endpoint
AUTH_MATRIX = [
    ("GET", r"/status(/[^/]+)?", SCOPE_READ_ONLY),
    ("GET", r"/compute/jobs/[^/]+", SCOPE_READ_ONLY),
    ("GET", r"/compute/queue", SCOPE_READ_ONLY),
    ("POST", r"/compute/jobs", SCOPE_RWX),
    ("POST", r"/storage/transfers", SCOPE_RWX),
    ("POST", r"/storage/migrate", SCOPE_RWX),
    ("POST", r"/storage/permissions", SCOPE_RWX),
    ("GET", r"/storage/usage/[^/]+", SCOPE_READ_ONLY),
    ("POST", r"/utilities/ls", SCOPE_READ_ONLY),
    ("POST", r"/utilities/download", SCOPE_READ_ONLY),
    ("POST", r"/utilities/upload", SCOPE_RWX),
    ("POST", r"/utilities/command", SCOPE_RWX),
    ("GET", r"/tasks/[^/]+", SCOPE_READ_ONLY),
    ("GET", r"/reservations", SCOPE_READ_ONLY),
    ("POST", r"/reservations", SCOPE_RWX),
    ("DELETE", r"/reservations/[^/]+", SCOPE_RWX),
    ("GET", r"/account/projects/[^/]+", SCOPE_READ_ONLY),
    ("POST", r"/account/projects/[^/]+/members", SCOPE_RWX),
    ("POST", r"/auth/tokens", None),
    ("POST", r"/auth/federated", None),
    ("POST", r"/auth/stepup", None),
    ("POST", r"/auth/credentials", None),
]

SMALL_FILE_CAP = 10 * 1024 * 1024


def required_scope(method: str, path: str):
    """Look up the documented scope for an endpoint; None means public,
    a miss means the route does not exist."""
    for m, pattern, scope in AUTH_MATRIX:
        if m == method and re.fullmatch(pattern, path):
            return scope
    return "unrouted"


def _error_response(exc: SfError) -> JSONResponse:
    body = {"code": exc.code, "message": exc.message, "retry_after": exc.retry_after}
    return JSONResponse(status_code=http_status(exc.code), content=body)


def create_app(sf: Superfacility, small_file_cap: int = SMALL_FILE_CAP) -> FastAPI:
    app = FastAPI(title="superfacility gateway", version="1.0")
    tasks = TaskRegistry(lambda: sf.now)
    app.state.sf = sf
    app.state.tasks = tasks
    idempotency_store: dict[tuple, tuple] = {}

    def source_ip(request: Request) -> str:
        hdr = request.headers.get("x-source-ip")
        if hdr:
            return hdr
        return request.client.host if request.client else "0.0.0.0"

    def principal(request: Request) -> dict:
        return request.state.principal

    @app.middleware("http")
    async def auth_and_idempotency(request: Request, call_next):
        scope = required_scope(request.method, request.url.path)
        if scope == "unrouted":
            return await call_next(request)
        request.state.principal = None
        if scope is not None:
            header = request.headers.get("authorization", "")
            token = header.removeprefix("Bearer ").strip()
            try:
                request.state.principal = sf.auth.authorize(
                    token, source_ip(request), scope, sf.now)
            except SfError as e:
                if e.code == "token-unknown" and token in sf.auth.sessions:
                    try:
                        user = sf.auth.session_user(token)
                        request.state.principal = {"user": user, "scope": SCOPE_RWX}
                    except SfError as e2:
                        return _error_response(e2)
                else:
                    return _error_response(e)
        key = request.headers.get("idempotency-key")
        if request.method in ("POST", "DELETE") and key:
            cache_key = (request.method, request.url.path, key)
            if cache_key in idempotency_store:
                status, body = idempotency_store[cache_key]
                return Response(content=body, status_code=status,
                                media_type="application/json")
            response = await call_next(request)
            body = b"".join([chunk async for chunk in response.body_iterator])
            idempotency_store[cache_key] = (response.status_code, body)
            return Response(content=body, status_code=response.status_code,
                            media_type=response.media_type)
        return await call_next(request)

    @app.exception_handler(SfError)
    async def sf_error_handler(request: Request, exc: SfError):
        return _error_response(exc)

    def require_pi(user: str, project_id: str):
        project = sf.facility.get_project(project_id)
        if project.pi() != user:
            raise SfError("pi-required", f"{user} is not the pi of {project_id}")

    # -- status --------------------------------------------------------------

    def system_status(name: str) -> dict:
        sys = sf.facility.systems.get(name)
        if sys is None:
            raise SfError("system-not-found", f"no system {name}")
        planned = [
            {"start": w.start, "end": w.end, "kind": w.kind,
             "services_kept_up": sorted(w.services_kept_up)}
            for w in sf.facility.outages
            if w.system == name and w.end > sf.now and w.kind == "scheduled"
        ]
        return {"name": sys.name, "kind": sys.kind.value, "state": sys.state.value,
                "state_since": plain_time(sys.state_since), "planned_outages": planned}

    @app.get("/status")
    def status_all():
        return [system_status(name) for name in sf.facility.systems]

    @app.get("/status/{system}")
    def status_one(system: str):
        return system_status(system)

    # -- compute ---------------------------------------------------------------

    @app.post("/compute/jobs", status_code=202)
    def submit_job(body: models.JobSubmission, request: Request):
        user = principal(request)["user"]
        sched = sf.scheduler(body.system)
        spec = JobSpec(project=body.project, account=body.account, qos=body.qos,
                       nodes=body.nodes, walltime_limit=body.walltime_limit,
                       runtime_seconds=body.runtime_seconds,
                       submit_time=sf.now, deadline=body.deadline,
                       requeue_on_preempt=body.requeue_on_preempt,
                       reservation=body.reservation, payload_tag=body.payload_tag)
        job_id = sched.submit(spec)
        task = tasks.create("job_submit", user,
                            lambda: ("completed", {"job_id": job_id}))
        return {"task_id": task.id}

    @app.get("/compute/jobs/{job_id}")
    def get_job(job_id: int):
        return sf.scheduler().query_job(job_id)

    @app.get("/compute/queue")
    def get_queue():
        return sf.scheduler().query_queue()

    # -- storage ------------------------------------------------------------------

    def _transfer_task(kind: str, user: str, transfer) -> dict:
        def poll():
            q = sf.storage.query_transfer(transfer.id)
            if q["state"] == "completed":
                return "completed", {"transfer_id": transfer.id,
                                     "bytes": q["bytes_total"],
                                     "duration": plain_time(q["finished"] - q["started"])
                                     if q["finished"] is not None else 0}
            if q["state"] == "failed":
                return "failed", {"code": q["error"], "transfer_id": transfer.id}
            return "running", poll

        task = tasks.create(kind, user, lambda: ("running", poll))
        return {"task_id": task.id, "transfer_id": transfer.id}

    @app.post("/storage/transfers", status_code=202)
    def submit_transfer(body: models.TransferRequest, request: Request):
        user = principal(request)["user"]
        transfer = sf.storage.submit_transfer(
            body.src, body.dst, body.paths, body.as_account, caller=user,
            project=body.project, dst_dir=body.dst_dir, link=body.link,
            tag=body.tag)
        return _transfer_task("transfer", user, transfer)

    @app.post("/storage/migrate", status_code=202)
    def migrate(body: models.MigrateRequest, request: Request):
        user = principal(request)["user"]
        transfer = sf.storage.migrate(body.paths, body.from_tier, body.to_tier,
                                      caller=user, project=body.project,
                                      dst_dir=body.dst_dir)
        return _transfer_task("transfer", user, transfer)

    @app.post("/storage/permissions")
    def set_permissions(body: models.PermissionRequest, request: Request):
        user = principal(request)["user"]
        count = sf.storage.set_ownership_mode(
            body.endpoint, body.path, caller=user, new_owner=body.new_owner,
            new_group=body.new_group, new_mode=body.new_mode, mode_or=body.mode_or,
            recursive=body.recursive)
        return {"changed": count}

    @app.get("/storage/usage/{project}")
    def usage(project: str, tier: str | None = None):
        return sf.storage.usage_report(project, tier)

    # -- utilities -------------------------------------------------------------------

    def _file_dict(rec) -> dict:
        return {"path": rec.path, "owner": rec.owner, "group": rec.group,
                "mode": rec.mode, "size_bytes": rec.size_bytes, "tier": rec.tier,
                "mtime": plain_time(rec.mtime), "is_dir": rec.is_dir}

    @app.post("/utilities/ls")
    def ls(body: models.LsRequest):
        return [_file_dict(r) for r in sf.storage.ls(body.endpoint, body.path)]

    @app.post("/utilities/download")
    def download(body: models.DownloadRequest):
        rec = sf.storage.stat(body.endpoint, body.path)
        out = _file_dict(rec)
        out["checksum"] = rec.checksum
        return out

    @app.post("/utilities/upload")
    def upload(body: models.UploadRequest, request: Request):
        if body.size_bytes > small_file_cap:
            raise SfError("small-file-cap",
                          f"{body.size_bytes} bytes exceeds the {small_file_cap} byte cap")
        user = principal(request)["user"]
        rec = sf.storage.ingest(body.path, body.size_bytes, owner=user,
                                group=body.project, mode=body.mode, tier=body.endpoint)
        return _file_dict(rec)

    @app.post("/utilities/command", status_code=202)
    def run_command(body: models.CommandRequest, request: Request):
        user = principal(request)["user"]
        fn = sf.commands.get(body.name)
        if fn is None:
            raise SfError("unknown-command", f"no registered command {body.name}")
        task = tasks.create("command", user,
                            lambda: ("completed", fn(**body.args)))
        return {"task_id": task.id}

    # -- tasks -----------------------------------------------------------------------

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str, request: Request):
        return tasks.get(task_id, principal(request)["user"]).to_dict()

    # -- reservations ------------------------------------------------------------------

    @app.get("/reservations")
    def list_reservations():
        sched = sf.scheduler()
        return [sched.query_reservation(name) for name in sorted(sched.reservations)]

    @app.post("/reservations", status_code=202)
    def create_reservation(body: models.ReservationRequest, request: Request):
        user = principal(request)["user"]
        require_pi(user, body.project)
        sched = sf.scheduler(body.system)

        def run():
            try:
                res = sched.create_reservation(
                    body.name, body.project, body.node_count, body.start, body.end,
                    allow_preemptible=body.allow_preemptible,
                    grace_seconds=body.grace_seconds)
            except SfError as e:
                if e.code in ("reservation-infeasible", "duplicate-name"):
                    return "completed", {"accepted": False, "reason": e.message}
                raise
            return "completed", {"accepted": True, "reservation": res.name}

        task = tasks.create("reservation_request", user, run)
        return {"task_id": task.id}

    @app.delete("/reservations/{name}")
    def cancel_reservation(name: str, request: Request):
        user = principal(request)["user"]
        sched = sf.scheduler()
        res = sched.reservations.get(name)
        if res is None:
            raise SfError("unknown-reservation", f"no reservation {name}")
        require_pi(user, res.project)
        sched.cancel(name)
        return {"cancelled": name}

    # -- account -------------------------------------------------------------------------

    @app.get("/account/projects/{project_id}")
    def get_project(project_id: str):
        p = sf.facility.get_project(project_id)
        return {
            "id": p.id,
            "allocation_node_hours": p.allocation_node_hours,
            "used_node_hours": float(p.used_node_hours),
            "members": [{"user": m.user, "role": m.role} for m in p.members],
            "collab_accounts": list(p.collab_accounts),
            "quotas": {t: {"bytes": q[0], "inodes": q[1]} for t, q in p.quotas.items()},
        }

    @app.post("/account/projects/{project_id}/members")
    def modify_members(project_id: str, body: models.MembershipRequest, request: Request):
        require_pi(principal(request)["user"], project_id)
        sf.facility.modify_membership(project_id, body.user, body.action, body.role)
        return {"ok": True}

    # -- auth -------------------------------------------------------------------------------

    @app.post("/auth/tokens")
    def issue_token(body: models.TokenRequest, request: Request):
        tok = sf.auth.issue_token(body.credential_id, body.secret, source_ip(request))
        return {"access_token": tok.token, "scope": tok.scope,
                "expires_at": plain_time(tok.expires_at)}

    @app.post("/auth/federated")
    def federated_login(body: models.FederatedLoginRequest):
        return sf.auth.authenticate_federated(body.institution, body.external_subject,
                                              body.mfa_signaled)

    @app.post("/auth/stepup")
    def step_up(body: models.StepUpRequest):
        return sf.auth.satisfy_step_up(body.challenge)

    @app.post("/auth/credentials")
    def create_credential(body: models.CredentialRequest):
        user = sf.auth.session_user(body.session)
        cred, secret = sf.auth.create_credential(user, body.scope, body.ip_range)
        return {"credential_id": cred.id, "secret": secret, "scope": cred.scope,
                "expires_at": plain_time(cred.expires_at)}

    return app
