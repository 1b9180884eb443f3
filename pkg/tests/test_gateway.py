import pytest

from conftest import auth_headers

AUTH_CODES = {"token-unknown", "token-expired", "token-ip", "insufficient-scope"}

# one concrete request per documented endpoint: (method, path, body)
ENDPOINT_EXAMPLES = [
    ("GET", "/status", None),
    ("GET", "/status/cori", None),
    ("GET", "/compute/jobs/1", None),
    ("GET", "/compute/queue", None),
    ("POST", "/compute/jobs", {"project": "demo", "account": "alice",
                               "nodes": 1, "walltime_limit": 60}),
    ("POST", "/storage/transfers", {"src": "beamline", "dst": "scratch",
                                    "paths": ["/raw/shot-0001.tif"],
                                    "as_account": "demo", "project": "demo",
                                    "dst_dir": "/in"}),
    ("POST", "/storage/migrate", {"paths": ["/data/report.dat"],
                                  "from_tier": "community",
                                  "to_tier": "community", "project": "demo"}),
    ("POST", "/storage/permissions", {"endpoint": "community",
                                      "path": "/data/report.dat",
                                      "mode_or": 0o040}),
    ("GET", "/storage/usage/demo", None),
    ("POST", "/utilities/ls", {"endpoint": "community", "path": "/data"}),
    ("POST", "/utilities/download", {"endpoint": "community",
                                     "path": "/data/report.dat"}),
    ("POST", "/utilities/upload", {"endpoint": "scratch", "path": "/up.dat",
                                   "size_bytes": 10, "project": "demo"}),
    ("POST", "/utilities/command", {"name": "noop"}),
    ("GET", "/tasks/task-1", None),
    ("GET", "/reservations", None),
    ("POST", "/reservations", {"name": "r2", "project": "demo",
                               "node_count": 2, "start": 7200, "end": 7800}),
    ("DELETE", "/reservations/shift", None),
    ("GET", "/account/projects/demo", None),
    ("POST", "/account/projects/demo/members",
     {"user": "newbie", "action": "add"}),
]

READ_ONLY_METHODS = {("GET", path) for m, path, _ in ENDPOINT_EXAMPLES if m == "GET"} | {
    ("POST", "/utilities/ls"), ("POST", "/utilities/download")}


def make_read_only_token(sf, user="dana"):
    cred, secret = sf.auth.create_credential(user, "read_only", "0.0.0.0/0")
    return sf.auth.issue_token(cred.id, secret, "127.0.0.1").token


def test_every_protected_endpoint_rejects_missing_token(gateway):
    sf, client, _ = gateway
    for method, path, body in ENDPOINT_EXAMPLES:
        r = client.request(method, path, json=body,
                           headers={"X-Source-IP": "127.0.0.1"})
        assert r.status_code == 401, (method, path, r.status_code)
        assert r.json()["code"] == "token-unknown"


def test_auth_matrix_scope_truth_table(gateway):
    """read_only tokens reach read endpoints and are refused scope on every
    mutating endpoint; rwx tokens clear auth everywhere."""
    sf, client, rwx_token = gateway
    ro_token = make_read_only_token(sf)
    for method, path, body in ENDPOINT_EXAMPLES:
        r = client.request(method, path, json=body, headers=auth_headers(ro_token))
        if (method, path) in READ_ONLY_METHODS:
            if r.status_code >= 400:
                assert r.json()["code"] not in AUTH_CODES, (method, path, r.json())
        else:
            assert r.status_code == 403, (method, path, r.status_code)
            assert r.json()["code"] == "insufficient-scope"
    for method, path, body in ENDPOINT_EXAMPLES:
        r = client.request(method, path, json=body, headers=auth_headers(rwx_token))
        if r.status_code >= 400:
            # domain errors are fine; auth must have been cleared
            assert r.json()["code"] not in AUTH_CODES, (method, path, r.json())


def test_source_ip_outside_token_range_rejected(gateway):
    sf, client, _ = gateway
    cred, secret = sf.auth.create_credential("dana", "read_only", "10.0.0.0/8")
    token = sf.auth.issue_token(cred.id, secret, "10.0.0.1").token
    ok = client.get("/status", headers=auth_headers(token, ip="10.9.9.9"))
    assert ok.status_code == 200
    bad = client.get("/status", headers=auth_headers(token, ip="172.16.0.1"))
    assert bad.status_code == 401
    assert bad.json()["code"] == "token-ip"


def test_expired_token_rejected(gateway):
    sf, client, token = gateway
    sf.advance_to(sf.now + sf.auth.config.token_lifetime)
    r = client.get("/status", headers=auth_headers(token))
    assert r.status_code == 401
    assert r.json()["code"] == "token-expired"


def test_status_reports_planned_outages(gateway):
    sf, client, token = gateway
    r = client.get("/status/cori", headers=auth_headers(token))
    assert r.status_code == 200
    body = r.json()
    assert body["state"] == "up"
    assert body["planned_outages"] == [
        {"start": 86400, "end": 90000, "kind": "scheduled", "services_kept_up": []}]


def test_job_submission_roundtrip(gateway):
    sf, client, token = gateway
    r = client.post("/compute/jobs", headers=auth_headers(token),
                    json={"project": "demo", "account": "alice", "nodes": 2,
                          "walltime_limit": 120, "runtime_seconds": 60,
                          "payload_tag": "t1"})
    assert r.status_code == 202
    task = client.get(f"/tasks/{r.json()['task_id']}",
                      headers=auth_headers(token)).json()
    assert task["state"] == "completed"
    job_id = task["result"]["job_id"]
    sf.advance_to(sf.now + 300)
    job = client.get(f"/compute/jobs/{job_id}", headers=auth_headers(token)).json()
    assert job["state"] == "completed"
    assert job["tag"] == "t1"


def test_transfer_task_polls_to_completion(gateway):
    sf, client, token = gateway
    r = client.post("/storage/transfers", headers=auth_headers(token),
                    json={"src": "beamline", "dst": "scratch",
                          "paths": ["/raw/shot-0001.tif"], "as_account": "demo",
                          "project": "demo", "dst_dir": "/in"})
    assert r.status_code == 202
    task_id = r.json()["task_id"]
    running = client.get(f"/tasks/{task_id}", headers=auth_headers(token)).json()
    assert running["state"] == "running"
    sf.advance_to(sf.now + 2000)  # 700 GB at 1 GB/s site bandwidth
    done = client.get(f"/tasks/{task_id}",
                      headers=auth_headers(_fresh_token(sf))).json()
    assert done["state"] == "completed"
    assert done["result"]["bytes"] == 700 * 10**9
    assert done["result"]["duration"] == 700


def test_idempotency_key_replays_response(gateway):
    sf, client, token = gateway
    headers = auth_headers(token) | {"Idempotency-Key": "abc"}
    body = {"project": "demo", "account": "alice", "nodes": 1,
            "walltime_limit": 60}
    first = client.post("/compute/jobs", headers=headers, json=body)
    second = client.post("/compute/jobs", headers=headers, json=body)
    assert first.json() == second.json()
    # and no second job was created for the replay
    tags = [r for r in sf.log.records if r["kind"] == "job_submitted"]
    assert len(tags) == 2  # devserver seed job + exactly one new submission


def test_task_ownership_is_not_leaked(gateway):
    sf, client, token = gateway
    r = client.post("/compute/jobs", headers=auth_headers(token),
                    json={"project": "demo", "account": "alice", "nodes": 1,
                          "walltime_limit": 60})
    task_id = r.json()["task_id"]
    other = make_read_only_token(sf)  # dana's token
    r = client.get(f"/tasks/{task_id}", headers=auth_headers(other))
    assert r.status_code == 404
    assert r.json()["code"] == "task-not-found"


def test_task_retention_purges_to_task_expired(gateway):
    sf, client, token = gateway
    r = client.post("/compute/jobs", headers=auth_headers(token),
                    json={"project": "demo", "account": "alice", "nodes": 1,
                          "walltime_limit": 60})
    task_id = r.json()["task_id"]
    sf.advance_to(sf.now + 8 * 86400)
    # a fresh request pumps the registry past the retention window
    fresh_token = _fresh_token(sf)
    r = client.get(f"/tasks/{task_id}", headers=auth_headers(fresh_token))
    assert r.status_code == 404
    assert r.json()["code"] == "task-expired"


def _fresh_token(sf, user="alice"):
    sf.auth.approve_rwx(user)
    cred, secret = sf.auth.create_credential(user, "rwx", "0.0.0.0/0")
    return sf.auth.issue_token(cred.id, secret, "127.0.0.1").token


def test_upload_small_file_cap(gateway):
    sf, client, token = gateway
    r = client.post("/utilities/upload", headers=auth_headers(token),
                    json={"endpoint": "scratch", "path": "/big.bin",
                          "size_bytes": 10 * 1024 * 1024 + 1, "project": "demo"})
    assert r.status_code == 413
    assert r.json()["code"] == "small-file-cap"
    ok = client.post("/utilities/upload", headers=auth_headers(token),
                     json={"endpoint": "scratch", "path": "/ok.bin",
                           "size_bytes": 10 * 1024 * 1024, "project": "demo"})
    assert ok.status_code == 200
    assert ok.json()["owner"] == "alice"


def test_command_endpoint_requires_registration(gateway):
    sf, client, token = gateway
    r = client.post("/utilities/command", headers=auth_headers(token),
                    json={"name": "purge"})
    assert r.status_code == 404
    assert r.json()["code"] == "unknown-command"
    sf.register_command("purge", lambda **kw: {"purged": kw.get("count", 0)})
    r = client.post("/utilities/command", headers=auth_headers(token),
                    json={"name": "purge", "args": {"count": 3}})
    task = client.get(f"/tasks/{r.json()['task_id']}",
                      headers=auth_headers(token)).json()
    assert task["result"] == {"purged": 3}


def test_reservation_rejection_carries_reason(gateway):
    sf, client, token = gateway
    r = client.post("/reservations", headers=auth_headers(token),
                    json={"name": "huge", "project": "demo", "node_count": 999,
                          "start": 7200, "end": 7800})
    assert r.status_code == 202
    task = client.get(f"/tasks/{r.json()['task_id']}",
                      headers=auth_headers(token)).json()
    assert task["state"] == "completed"
    assert task["result"]["accepted"] is False
    assert "conflict at t=" in task["result"]["reason"]


def test_reservation_requires_pi(gateway):
    sf, client, _ = gateway
    dana = _fresh_token(sf, "dana")
    r = client.post("/reservations", headers=auth_headers(dana),
                    json={"name": "nope", "project": "demo", "node_count": 2,
                          "start": 7200, "end": 7800})
    assert r.status_code == 403
    assert r.json()["code"] == "pi-required"


def test_membership_requires_pi(gateway):
    sf, client, token = gateway
    dana = _fresh_token(sf, "dana")
    r = client.post("/account/projects/demo/members", headers=auth_headers(dana),
                    json={"user": "x", "action": "add"})
    assert r.status_code == 403
    ok = client.post("/account/projects/demo/members", headers=auth_headers(token),
                     json={"user": "x", "action": "add"})
    assert ok.status_code == 200
    assert "x" in {m["user"] for m in
                   client.get("/account/projects/demo",
                              headers=auth_headers(token)).json()["members"]}


def test_session_accepted_as_principal(gateway):
    sf, client, _ = gateway
    sf.auth.config.allowlisted_institutions.add("uni")
    sf.auth.link_identity("alice", "uni", "x500-alice", mfa_signaled=True)
    out = client.post("/auth/federated",
                      json={"institution": "uni", "external_subject": "x500-alice",
                            "mfa_signaled": True}).json()
    session = out["session"]["id"]
    r = client.post("/utilities/ls", headers=auth_headers(session),
                    json={"endpoint": "community", "path": "/data"})
    assert r.status_code == 200


def test_credential_flow_over_http_returns_secret_once(gateway):
    sf, client, _ = gateway
    sf.auth.config.allowlisted_institutions.add("uni")
    sf.auth.link_identity("dana", "uni", "x500-dana", mfa_signaled=True)
    session = client.post("/auth/federated",
                          json={"institution": "uni",
                                "external_subject": "x500-dana",
                                "mfa_signaled": True}).json()["session"]["id"]
    out = client.post("/auth/credentials",
                      json={"session": session, "scope": "read_only",
                            "ip_range": "0.0.0.0/0"}).json()
    token = client.post("/auth/tokens",
                        json={"credential_id": out["credential_id"],
                              "secret": out["secret"]},
                        headers={"X-Source-IP": "127.0.0.1"}).json()
    r = client.get("/status", headers=auth_headers(token["access_token"]))
    assert r.status_code == 200
    # the plaintext secret exists only in that one response
    assert out["secret"] not in sf.log.to_jsonl()
    assert out["secret"] not in repr(sf.auth.credentials)
