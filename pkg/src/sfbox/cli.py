"""Thin command-line client for the gateway API.

All state lives server-side; the CLI only formats requests and responses.
Configuration comes from flags or the environment:

  SF_GATEWAY_URL   gateway base URL (default http://127.0.0.1:8800)
  SF_CLIENT_ID     credential id used by `sf login`
  SF_CLIENT_SECRET credential secret used by `sf login` (never echoed)
  SF_TOKEN         bearer token used by every other command

Exit codes: 0 success, 1 the server rejected the request, 2 transport error.
"""

import json
import os
import sys

import click
import httpx

DEFAULT_URL = "http://127.0.0.1:8800"

# tests may inject an httpx transport here (e.g. ASGITransport); None = real HTTP
TRANSPORT = None


def _client(ctx) -> httpx.Client:
    return httpx.Client(base_url=ctx.obj["url"], transport=TRANSPORT, timeout=30)


def _headers(ctx, need_token: bool = True) -> dict:
    headers = {}
    token = ctx.obj.get("token")
    if need_token:
        if not token:
            click.echo("error: no token; run `sf login` and export SF_TOKEN", err=True)
            sys.exit(1)
        headers["Authorization"] = f"Bearer {token}"
    return headers


def _call(ctx, method: str, path: str, body: dict | None = None,
          need_token: bool = True) -> dict:
    try:
        with _client(ctx) as client:
            r = client.request(method, path, json=body, headers=_headers(ctx, need_token))
    except httpx.HTTPError as e:
        click.echo(f"transport error: {e}", err=True)
        sys.exit(2)
    try:
        data = r.json()
    except ValueError:
        data = {"raw": r.text}
    if r.status_code >= 400:
        code = data.get("code", r.status_code)
        click.echo(f"error [{code}]: {data.get('message', r.text)}", err=True)
        sys.exit(1)
    return data


def _emit(ctx, data, table=None):
    if ctx.obj["json"] or table is None:
        click.echo(json.dumps(data, indent=2, sort_keys=True))
    else:
        for line in table:
            click.echo(line)


def _kv_table(d: dict) -> list[str]:
    width = max((len(k) for k in d), default=0)
    return [f"{k.ljust(width)}  {json.dumps(v) if isinstance(v, (dict, list)) else v}"
            for k, v in d.items()]


@click.group()
@click.option("--url", envvar="SF_GATEWAY_URL", default=DEFAULT_URL,
              show_default=True, help="gateway base URL")
@click.option("--token", envvar="SF_TOKEN", default=None, help="bearer token")
@click.option("--json", "as_json", is_flag=True, help="print raw JSON")
@click.pass_context
def main(ctx, url, token, as_json):
    """Client for a simulated superfacility gateway."""
    ctx.obj = {"url": url, "token": token, "json": as_json}


@main.command()
@click.option("--client-id", envvar="SF_CLIENT_ID", required=True)
@click.option("--client-secret", envvar="SF_CLIENT_SECRET", required=True,
              hide_input=True)
@click.pass_context
def login(ctx, client_id, client_secret):
    """Exchange a credential for a short-lived bearer token."""
    data = _call(ctx, "POST", "/auth/tokens",
                 {"credential_id": client_id, "secret": client_secret},
                 need_token=False)
    _emit(ctx, data, [f"export SF_TOKEN={data['access_token']}",
                      f"# scope={data['scope']} expires_at={data['expires_at']}"])


@main.command()
@click.argument("system", required=False)
@click.pass_context
def status(ctx, system):
    """Show system status (all systems, or one)."""
    path = f"/status/{system}" if system else "/status"
    data = _call(ctx, "GET", path)
    rows = [data] if system else data
    table = [f"{r['name']:12} {r['kind']:8} {r['state']:12} since={r['state_since']}"
             for r in rows]
    _emit(ctx, data, table)


@main.group()
def job():
    """Submit and inspect compute jobs."""


@job.command("submit")
@click.option("--project", required=True)
@click.option("--account", required=True)
@click.option("--qos", default="regular", show_default=True)
@click.option("--nodes", type=int, default=1, show_default=True)
@click.option("--walltime", "walltime_limit", type=int, required=True)
@click.option("--runtime", "runtime_seconds", type=int, default=None)
@click.option("--deadline", type=int, default=None)
@click.option("--reservation", default=None)
@click.option("--requeue/--no-requeue", "requeue_on_preempt", default=False)
@click.option("--tag", "payload_tag", default="")
@click.pass_context
def job_submit(ctx, **kwargs):
    """Submit a job; prints the async task id."""
    data = _call(ctx, "POST", "/compute/jobs", kwargs)
    _emit(ctx, data, [f"task {data['task_id']}"])


@job.command("get")
@click.argument("job_id", type=int)
@click.pass_context
def job_get(ctx, job_id):
    data = _call(ctx, "GET", f"/compute/jobs/{job_id}")
    _emit(ctx, data, _kv_table(data))


@job.command("queue")
@click.pass_context
def job_queue(ctx):
    data = _call(ctx, "GET", "/compute/queue")
    table = [f"{r['id']:>6} {r['qos']:12} {r['project']:12} nodes={r['nodes']} "
             f"state={r['state']}" for r in data]
    _emit(ctx, data, table or ["queue empty"])


@main.command()
@click.option("--src", required=True)
@click.option("--dst", required=True)
@click.option("--path", "paths", multiple=True, required=True)
@click.option("--as-account", required=True)
@click.option("--project", required=True)
@click.option("--dst-dir", default="/", show_default=True)
@click.option("--tag", default="")
@click.pass_context
def transfer(ctx, src, dst, paths, as_account, project, dst_dir, tag):
    """Start an asynchronous transfer; prints task and transfer ids."""
    body = {"src": src, "dst": dst, "paths": list(paths), "as_account": as_account,
            "project": project, "dst_dir": dst_dir, "tag": tag}
    data = _call(ctx, "POST", "/storage/transfers", body)
    _emit(ctx, data, [f"task {data['task_id']} transfer {data['transfer_id']}"])


@main.group()
def task():
    """Poll asynchronous tasks."""


@task.command("get")
@click.argument("task_id")
@click.pass_context
def task_get(ctx, task_id):
    data = _call(ctx, "GET", f"/tasks/{task_id}")
    _emit(ctx, data, _kv_table(data))


@main.group()
def reservation():
    """Create, list, and cancel advance reservations."""


@reservation.command("create")
@click.option("--name", required=True)
@click.option("--project", required=True)
@click.option("--nodes", "node_count", type=int, required=True)
@click.option("--start", type=int, required=True)
@click.option("--end", type=int, required=True)
@click.option("--allow-preemptible/--no-allow-preemptible", default=False)
@click.pass_context
def reservation_create(ctx, **kwargs):
    data = _call(ctx, "POST", "/reservations", kwargs)
    _emit(ctx, data, [f"task {data['task_id']}"])


@reservation.command("list")
@click.pass_context
def reservation_list(ctx):
    data = _call(ctx, "GET", "/reservations")
    table = [f"{r['name']:16} {r['project']:12} {r['state']:10} "
             f"nodes={r['node_count']} [{r['start']},{r['end']})" for r in data]
    _emit(ctx, data, table or ["no reservations"])


@reservation.command("cancel")
@click.argument("name")
@click.pass_context
def reservation_cancel(ctx, name):
    data = _call(ctx, "DELETE", f"/reservations/{name}")
    _emit(ctx, data, [f"cancelled {data['cancelled']}"])


@main.command()
@click.argument("project")
@click.option("--tier", default=None)
@click.pass_context
def usage(ctx, project, tier):
    """Show storage usage for a project."""
    path = f"/storage/usage/{project}"
    if tier:
        path += f"?tier={tier}"
    data = _call(ctx, "GET", path)
    table = []
    for t, info in data["tiers"].items():
        table.append(f"{t}: {info['total_bytes']} bytes, {info['total_inodes']} inodes"
                     f" (limit {info['limit_bytes']})")
        for user, row in info["users"].items():
            table.append(f"  {user:12} {row['bytes']} bytes {row['inodes']} inodes")
    _emit(ctx, data, table)


@main.command()
@click.argument("endpoint")
@click.argument("path")
@click.pass_context
def ls(ctx, endpoint, path):
    """List a directory on a tier or site."""
    data = _call(ctx, "POST", "/utilities/ls", {"endpoint": endpoint, "path": path})
    table = [f"{oct(r['mode'])[2:]:>4} {r['owner']:10} {r['group']:10} "
             f"{r['size_bytes']:>12} {r['path']}" for r in data]
    _emit(ctx, data, table or ["empty"])


@main.command()
@click.argument("endpoint")
@click.argument("path")
@click.option("--owner", "new_owner", default=None)
@click.option("--group", "new_group", default=None)
@click.option("--mode", "new_mode", default=None,
              help="octal mode, e.g. 640")
@click.option("--mode-or", default=None, help="octal bits to OR in, e.g. 040")
@click.option("--recursive", is_flag=True)
@click.pass_context
def chmod(ctx, endpoint, path, new_owner, new_group, new_mode, mode_or, recursive):
    """Change ownership or permissions on a path."""
    body = {"endpoint": endpoint, "path": path, "new_owner": new_owner,
            "new_group": new_group,
            "new_mode": int(new_mode, 8) if new_mode else None,
            "mode_or": int(mode_or, 8) if mode_or else None,
            "recursive": recursive}
    data = _call(ctx, "POST", "/storage/permissions", body)
    _emit(ctx, data, [f"changed {data['changed']} records"])


@main.group()
def scenario():
    """Run curated scenarios locally and score them."""


@scenario.command("list")
def scenario_list():
    from .harness import BUILTIN_NAMES
    for name in BUILTIN_NAMES:
        click.echo(name)


@scenario.command("run")
@click.argument("name")
@click.option("--report", "report_path", type=click.Path(), default=None,
              help="write the JSON report here")
@click.option("--log", "log_path", type=click.Path(), default=None,
              help="write the JSONL event log here")
@click.option("--csv", "csv_path", type=click.Path(), default=None,
              help="write the flat CSV report here")
@click.option("--file", "scenario_path", type=click.Path(exists=True), default=None,
              help="load the scenario from a JSON document instead of a builtin")
def scenario_run(name, report_path, log_path, csv_path, scenario_path):
    """Run a scenario and print one verdict line per expectation."""
    from .errors import SfError
    from .harness import builtin, evaluate, load_scenario, run
    from .harness.runner import report_to_csv
    try:
        if scenario_path:
            with open(scenario_path) as fh:
                sc = load_scenario(json.load(fh))
        else:
            sc = builtin(name)
        report, log = run(sc)
    except SfError as e:
        click.echo(f"error [{e.code}]: {e.message}", err=True)
        sys.exit(1)
    if report_path:
        with open(report_path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
    if log_path:
        with open(log_path, "w") as fh:
            fh.write(log + "\n")
    if csv_path:
        with open(csv_path, "w") as fh:
            fh.write(report_to_csv(report) + "\n")
    verdicts = evaluate(report, sc.expectations)
    failed = 0
    for v in verdicts:
        mark = "PASS" if v["pass"] else "FAIL"
        failed += 0 if v["pass"] else 1
        click.echo(f"{mark} {v['name']}: observed={v['observed']} "
                   f"{v['op']} {v['threshold']}")
    if report["failure_count"]:
        click.echo(f"note: {report['failure_count']} request failures during the run")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main(prog_name="sf")
