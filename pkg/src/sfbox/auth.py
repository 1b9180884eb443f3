"""Identity linking, scoped API credentials with IP locking and lifetimes,
and opaque bearer tokens.

Secrets are hashed before storage; the plaintext is returned exactly once at
creation. Token and secret strings are derived from a deterministic counter
so identical runs mint identical credentials.
"""

import hashlib
import ipaddress
from dataclasses import dataclass, field

from .errors import SfError
from .facility import Facility

SCOPE_READ_ONLY = "read_only"
SCOPE_RWX = "rwx"

DAY = 86400


@dataclass
class AuthConfig:
    read_only_lifetime: int = 180 * DAY
    rwx_lifetime: int = 30 * DAY
    token_lifetime: int = 600
    session_lifetime: int = 12 * 3600
    allowlisted_institutions: set = field(default_factory=set)


@dataclass
class Identity:
    user: str
    home_institution: str
    external_subject: str
    linked_at: int
    mfa_signaled: bool


@dataclass
class ClientCredential:
    id: str
    secret_hash: str
    owner: str
    scope: str
    ip_range: str
    issued_at: int
    expires_at: int
    approved: bool
    revoked: bool = False


@dataclass
class AccessToken:
    token: str
    credential_id: str
    user: str
    scope: str
    ip_range: str
    issued_at: object
    expires_at: object


@dataclass
class Session:
    id: str
    user: str
    issued_at: object
    expires_at: object


def scope_allows(held: str, required: str) -> bool:
    return held == SCOPE_RWX or held == required


class AuthService:
    def __init__(self, facility: Facility, config: AuthConfig | None = None, seed: int = 0):
        self.facility = facility
        self.config = config or AuthConfig()
        self.seed = seed
        self.identities: list[Identity] = []
        self.credentials: dict[str, ClientCredential] = {}
        self.tokens: dict[str, AccessToken] = {}
        self.sessions: dict[str, Session] = {}
        self.rwx_approvals: set[str] = set()
        self.pending_stepups: dict[str, str] = {}  # challenge id -> user
        # user -> sim-day of last satisfied MFA challenge
        self._mfa_day: dict[str, int] = {}
        self._counter = 0

    def _mint(self, prefix: str) -> str:
        self._counter += 1
        digest = hashlib.sha256(f"{self.seed}:{prefix}:{self._counter}".encode()).hexdigest()
        return f"{prefix}-{self._counter}-{digest[:16]}"

    @staticmethod
    def _hash(secret: str) -> str:
        return hashlib.sha256(secret.encode()).hexdigest()

    def _user_exists(self, user: str) -> bool:
        return any(user in p.member_ids() for p in self.facility.projects.values())

    # -- federated identity --------------------------------------------------

    def link_identity(self, user: str, institution: str, external_subject: str,
                      mfa_signaled: bool) -> Identity:
        if not self._user_exists(user):
            raise SfError("unknown-user", f"no account {user}")
        if institution not in self.config.allowlisted_institutions:
            raise SfError("institution-not-allowlisted",
                          f"{institution} is not a trusted institution")
        for ident in self.identities:
            if ident.home_institution == institution and ident.external_subject == external_subject:
                return ident  # idempotent
        ident = Identity(user=user, home_institution=institution,
                         external_subject=external_subject,
                         linked_at=self.facility.now, mfa_signaled=mfa_signaled)
        self.identities.append(ident)
        self.facility.log.append(self.facility.now, "identity_linked", user=user,
                                 institution=institution)
        return ident

    def authenticate_federated(self, institution: str, external_subject: str,
                               mfa_signaled: bool) -> dict:
        ident = next((i for i in self.identities
                      if i.home_institution == institution
                      and i.external_subject == external_subject), None)
        if ident is None:
            raise SfError("not-linked",
                          f"no linked identity for {external_subject}@{institution}; "
                          "enroll by linking your account first")
        day = int(self.facility.now) // DAY
        if not mfa_signaled and self._mfa_day.get(ident.user) != day:
            challenge = self._mint("mfa")
            self.pending_stepups[challenge] = ident.user
            return {"step_up_required": True, "challenge": challenge}
        return {"step_up_required": False, "session": self._new_session(ident.user)}

    def satisfy_step_up(self, challenge: str) -> dict:
        user = self.pending_stepups.pop(challenge, None)
        if user is None:
            raise SfError("not-found", "unknown step-up challenge")
        self._mfa_day[user] = int(self.facility.now) // DAY
        return {"step_up_required": False, "session": self._new_session(user)}

    def _new_session(self, user: str) -> dict:
        s = Session(id=self._mint("sess"), user=user, issued_at=self.facility.now,
                    expires_at=self.facility.now + self.config.session_lifetime)
        self.sessions[s.id] = s
        return {"id": s.id, "user": user, "expires_at": s.expires_at}

    def session_user(self, session_id: str) -> str:
        s = self.sessions.get(session_id)
        if s is None or self.facility.now >= s.expires_at:
            raise SfError("token-expired", "session missing or expired")
        return s.user

    # -- credentials -----------------------------------------------------------

    def approve_rwx(self, user: str):
        self.rwx_approvals.add(user)

    def create_credential(self, user: str, scope: str, ip_range: str) -> tuple[ClientCredential, str]:
        if scope not in (SCOPE_READ_ONLY, SCOPE_RWX):
            raise SfError("schema-violation", f"bad scope {scope}")
        if scope == SCOPE_RWX and user not in self.rwx_approvals:
            raise SfError("approval-required",
                          "rwx credentials require prior staff approval")
        try:
            ipaddress.IPv4Network(ip_range)
        except (ValueError, TypeError):
            raise SfError("malformed-cidr", f"bad CIDR block {ip_range}")
        lifetime = (self.config.read_only_lifetime if scope == SCOPE_READ_ONLY
                    else self.config.rwx_lifetime)
        secret = self._mint("secret")
        cred = ClientCredential(
            id=self._mint("cred"), secret_hash=self._hash(secret), owner=user,
            scope=scope, ip_range=ip_range, issued_at=self.facility.now,
            expires_at=self.facility.now + lifetime,
            approved=(scope == SCOPE_RWX))
        self.credentials[cred.id] = cred
        self.facility.log.append(self.facility.now, "credential_created",
                                 credential=cred.id, owner=user, scope=scope)
        return cred, secret

    def revoke_credential(self, credential_id: str):
        cred = self.credentials.get(credential_id)
        if cred is None:
            raise SfError("not-found", f"no credential {credential_id}")
        cred.revoked = True
        for tok in list(self.tokens.values()):
            if tok.credential_id == credential_id:
                del self.tokens[tok.token]

    # -- tokens -----------------------------------------------------------------

    def issue_token(self, credential_id: str, secret: str, source_ip: str) -> AccessToken:
        cred = self.credentials.get(credential_id)
        if cred is None or cred.revoked or self._hash(secret) != cred.secret_hash:
            raise SfError("bad-secret", "unknown credential or wrong secret")
        if self.facility.now >= cred.expires_at:
            raise SfError("expired-credential", f"credential expired at {cred.expires_at}")
        if ipaddress.IPv4Address(source_ip) not in ipaddress.IPv4Network(cred.ip_range):
            raise SfError("ip-out-of-range",
                          f"{source_ip} is outside the credential's IP range")
        tok = AccessToken(token=self._mint("tok"), credential_id=cred.id,
                          user=cred.owner, scope=cred.scope, ip_range=cred.ip_range,
                          issued_at=self.facility.now,
                          expires_at=self.facility.now + self.config.token_lifetime)
        self.tokens[tok.token] = tok
        return tok

    def authorize(self, token: str, source_ip: str, required_scope: str, now) -> dict:
        """Pure validity check; raises with a distinct denial code."""
        tok = self.tokens.get(token)
        if tok is None:
            raise SfError("token-unknown", "unknown token")
        if now >= tok.expires_at:  # validity is [issued, expiry)
            raise SfError("token-expired", "token expired")
        try:
            in_range = ipaddress.IPv4Address(source_ip) in ipaddress.IPv4Network(tok.ip_range)
        except ValueError:
            in_range = False
        if not in_range:
            raise SfError("token-ip", f"{source_ip} is outside the token's bound range")
        if not scope_allows(tok.scope, required_scope):
            raise SfError("insufficient-scope",
                          f"{tok.scope} token cannot call a {required_scope} endpoint")
        return {"user": tok.user, "scope": tok.scope}

    # -- bootstrap ----------------------------------------------------------------

    def load_bootstrap(self, doc: dict):
        """Admin bootstrap: allowlisted institutions, rwx approvals, links."""
        for inst in doc.get("institutions", []):
            self.config.allowlisted_institutions.add(inst)
        for user in doc.get("rwx_approvals", []):
            self.rwx_approvals.add(user)
        for link in doc.get("identity_links", []):
            self.link_identity(link["user"], link["institution"],
                               link["external_subject"], link.get("mfa_signaled", True))
