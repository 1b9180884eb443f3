import httpx
import pytest
from fastapi.testclient import TestClient

from sfbox.devserver import build_demo
from sfbox.gateway.app import create_app
from sfbox.harness import builtin, run

LOCAL_IP = "127.0.0.1"


def auth_headers(token: str, ip: str = LOCAL_IP) -> dict:
    return {"Authorization": f"Bearer {token}", "X-Source-IP": ip}


@pytest.fixture
def demo():
    """A freshly seeded facility and an rwx bearer token for alice."""
    return build_demo()


@pytest.fixture
def gateway(demo):
    sf, token = demo
    client = TestClient(create_app(sf))
    return sf, client, token


@pytest.fixture
def cli_transport(gateway):
    """httpx transport bridging the CLI to the in-process gateway."""
    sf, client, token = gateway

    def handler(request: httpx.Request) -> httpx.Response:
        url = request.url.path
        if request.url.query:
            url += "?" + request.url.query.decode()
        headers = dict(request.headers)
        headers["X-Source-IP"] = LOCAL_IP
        r = client.request(request.method, url, content=request.content,
                           headers=headers)
        return httpx.Response(r.status_code, content=r.content,
                              headers=dict(r.headers))

    return httpx.MockTransport(handler), sf, token


@pytest.fixture(scope="session")
def builtin_results():
    """Run each builtin scenario at most once per test session."""
    cache = {}

    def get(name: str):
        if name not in cache:
            sc = builtin(name)
            report, log = run(sc)
            cache[name] = (sc, report, log)
        return cache[name]

    return get
