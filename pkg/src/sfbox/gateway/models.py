"""Request/response schemas for the gateway API.

Wire format is JSON with snake_case fields; all times are integer seconds of
simulated time.
"""

from pydantic import BaseModel, Field


class JobSubmission(BaseModel):
    project: str
    account: str
    qos: str = "regular"
    nodes: int = Field(ge=1)
    walltime_limit: int = Field(ge=1)
    runtime_seconds: int | None = None
    deadline: int | None = None
    requeue_on_preempt: bool = False
    reservation: str | None = None
    payload_tag: str = ""
    system: str | None = None


class TransferRequest(BaseModel):
    src: str
    dst: str
    paths: list[str]
    as_account: str
    project: str
    dst_dir: str = "/"
    link: str | None = None
    tag: str = ""


class MigrateRequest(BaseModel):
    paths: list[str]
    from_tier: str
    to_tier: str
    project: str
    dst_dir: str | None = None


class PermissionRequest(BaseModel):
    endpoint: str
    path: str
    new_owner: str | None = None
    new_group: str | None = None
    new_mode: int | None = None
    mode_or: int | None = None
    recursive: bool = False


class ReservationRequest(BaseModel):
    name: str
    project: str
    node_count: int = Field(ge=1)
    start: int
    end: int
    allow_preemptible: bool = False
    grace_seconds: int | None = None
    system: str | None = None


class LsRequest(BaseModel):
    endpoint: str
    path: str


class UploadRequest(BaseModel):
    endpoint: str
    path: str
    size_bytes: int = Field(ge=0)
    project: str
    mode: int = 0o640


class DownloadRequest(BaseModel):
    endpoint: str
    path: str


class CommandRequest(BaseModel):
    name: str
    args: dict = Field(default_factory=dict)


class MembershipRequest(BaseModel):
    user: str
    action: str  # add | remove | set_role
    role: str | None = None


class TokenRequest(BaseModel):
    credential_id: str
    secret: str


class FederatedLoginRequest(BaseModel):
    institution: str
    external_subject: str
    mfa_signaled: bool = False


class StepUpRequest(BaseModel):
    challenge: str


class CredentialRequest(BaseModel):
    session: str
    scope: str
    ip_range: str
