import os
import socket
import subprocess
import sys
import time
from pathlib import Path

import httpx
import pytest

from cdsedge.dictionary import build_dictionary, save_dictionary
from cdsedge.records import CompositeKey, GeneratorConfig, full_key_universe, gen_records, render_lines

K0 = CompositeKey("m3.large", "Linux/UNIX", "us-east-1a")
K1 = CompositeKey("c5.xlarge", "Windows", "eu-west-1b")
K2 = CompositeKey("r4.2xlarge", "SUSE Linux", "ap-northeast-1c")


@pytest.fixture(scope="session")
def full_dictionary():
    return build_dictionary(full_key_universe())


@pytest.fixture(scope="session")
def default_corpus():
    return gen_records(650, GeneratorConfig())


@pytest.fixture
def small_dictionary():
    return build_dictionary([K0, K1, K2])


def free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def wait_ready(url, proc, timeout=30.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if proc.poll() is not None:
            raise RuntimeError(f"{url}: process exited with {proc.returncode}")
        try:
            if httpx.get(url + "/healthz", timeout=1.0).status_code == 200:
                return
        except httpx.TransportError:
            pass
        time.sleep(0.1)
    raise RuntimeError(f"{url} did not come up")


class Testbed:
    def __init__(self, root: Path):
        self.root = root
        self.data_dir = root / "data"
        self.dict_path = root / "dict.tsv"
        self.procs = []

    def spawn(self, *args):
        log = open(self.root / f"{args[0]}-{len(self.procs)}.log", "wb")
        proc = subprocess.Popen([sys.executable, "-m", "cdsedge", *args], stdout=log, stderr=subprocess.STDOUT,
                                env={**os.environ, "PYTHONUNBUFFERED": "1"})
        self.procs.append(proc)
        return proc

    def start(self, edge_args=()):
        self.data_dir.mkdir(parents=True)
        records = gen_records(1000, GeneratorConfig())
        for n in (650, 1000):
            (self.data_dir / f"prices-{n}.tsv").write_text(render_lines(records[:n]), encoding="utf-8")
        save_dictionary(build_dictionary(full_key_universe()), self.dict_path)

        sport, eport = free_port(), free_port()
        self.source_url = f"http://127.0.0.1:{sport}"
        self.edge_url = f"http://127.0.0.1:{eport}"
        src = self.spawn("serve-source", "--data-dir", str(self.data_dir), "--port", str(sport))
        wait_ready(self.source_url, src)
        edge = self.spawn("serve-edge", "--dictionary", str(self.dict_path), "--source-url", self.source_url,
                          "--port", str(eport), *edge_args)
        wait_ready(self.edge_url, edge)
        self.edge_proc = edge
        return self

    def stop(self):
        for p in self.procs:
            if p.poll() is None:
                p.terminate()
        for p in self.procs:
            try:
                p.wait(timeout=10)
            except subprocess.TimeoutExpired:
                p.kill()


@pytest.fixture(scope="session")
def testbed(tmp_path_factory):
    tb = Testbed(tmp_path_factory.mktemp("testbed")).start()
    yield tb
    tb.stop()


# -- acceptance summary -----------------------------------------------------

_acceptance = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion of the build")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    passed = _acceptance.get(number, (title, True))[1]
    if rep.failed or (rep.when == "call" and rep.skipped):
        passed = False
    _acceptance[number] = (title, passed)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, passed = _acceptance[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}")
