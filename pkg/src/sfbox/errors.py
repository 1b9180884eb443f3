"""Error type shared by all engines and the gateway.

Every failure path carries a stable machine code; the gateway maps the code
to an HTTP status via the table below.
"""


class SfError(Exception):
    def __init__(self, code: str, message: str, retry_after: int | None = None):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.retry_after = retry_after


# machine code -> HTTP status the gateway responds with
HTTP_STATUS = {
    "duplicate-name": 409,
    "unknown-system": 404,
    "system-not-found": 404,
    "unknown-project": 404,
    "unknown-user": 404,
    "unknown-reservation": 404,
    "unknown-job": 404,
    "not-found": 404,
    "task-not-found": 404,
    "task-expired": 404,
    "sole-pi-removal": 409,
    "exhausted-allocation": 409,
    "nodes-exceed-pool": 400,
    "realtime-not-allowed": 403,
    "already-terminal": 409,
    "reservation-infeasible": 409,
    "out-of-order-tick": 400,
    "quota-exceeded": 409,
    "capacity-exceeded": 409,
    "duplicate-path": 409,
    "unknown-path": 404,
    "unknown-tier": 404,
    "unknown-endpoint": 404,
    "unknown-link": 404,
    "permission-denied": 403,
    "collab-account-unauthorized": 403,
    "bandwidth-infeasible": 409,
    "institution-not-allowlisted": 403,
    "not-linked": 404,
    "step-up-required": 401,
    "approval-required": 403,
    "malformed-cidr": 400,
    "bad-secret": 401,
    "expired-credential": 401,
    "ip-out-of-range": 401,
    "token-unknown": 401,
    "token-expired": 401,
    "token-ip": 401,
    "insufficient-scope": 403,
    "pi-required": 403,
    "small-file-cap": 413,
    "unknown-command": 404,
    "schema-violation": 400,
    "unknown-scenario": 404,
    "unknown-expectation": 400,
    "system-down": 409,
    "stale-state": 400,
}


def http_status(code: str) -> int:
    return HTTP_STATUS.get(code, 400)
