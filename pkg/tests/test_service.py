import asyncio

import httpx
import pytest
from fastapi.testclient import TestClient

from cdsedge.codec import decode_payload
from cdsedge.dictionary import save_dictionary
from cdsedge.errors import TooManyRecords
from cdsedge.records import GeneratorConfig, gen_records, parse_lines, render_lines
from cdsedge.service.edge import EdgeNode, cds_records, create_edge_app, relay_records
from cdsedge.service.models import EdgeConfig, Mode
from cdsedge.service.source import create_source_app

SOURCE = "http://source.test"


@pytest.fixture(scope="module")
def corpus():
    return gen_records(1000, GeneratorConfig())


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory, corpus):
    d = tmp_path_factory.mktemp("data")
    for n in (20, 650, 1000):
        (d / f"prices-{n}.tsv").write_text(render_lines(corpus[:n]))
    (d / "notes.txt").write_text("ignored")
    return d


@pytest.fixture(scope="module")
def source_app(data_dir):
    return create_source_app(data_dir)


@pytest.fixture
def source(source_app):
    return TestClient(source_app)


@pytest.fixture(scope="module")
def dict_path(tmp_path_factory, full_dictionary):
    p = tmp_path_factory.mktemp("dict") / "dict.tsv"
    save_dictionary(full_dictionary, p)
    return p


def make_edge(source_app, dictionary, dict_path, **overrides):
    cfg = EdgeConfig(source_url=SOURCE, dictionary_path=str(dict_path), **overrides)
    return TestClient(create_edge_app(cfg, dictionary, transport=httpx.ASGITransport(app=source_app)))


@pytest.fixture
def edge(source_app, full_dictionary, dict_path):
    with make_edge(source_app, full_dictionary, dict_path) as client:
        yield client


# -- source -----------------------------------------------------------------

def test_source_serves_first_n_lines(source, corpus):
    r = source.get("/data", params={"records": 5})
    assert r.status_code == 200
    assert r.headers["content-type"].startswith("text/plain")
    assert r.text == render_lines(corpus[:5])


def test_source_zero_records(source):
    r = source.get("/data?records=0")
    assert r.status_code == 200 and r.content == b""


@pytest.mark.parametrize("query", ["records=abc", "records=-1", "records=1.5", "", "records="])
def test_source_bad_query(source, query):
    assert source.get("/data?" + query).status_code == 400


def test_source_no_file_large_enough(source):
    r = source.get("/data?records=1001")
    assert r.status_code == 404
    assert r.json()["error"] == "NoSuchData"


def test_source_uses_smallest_sufficient_file(source, corpus):
    assert source.get("/data?records=21").text == render_lines(corpus[:21])
    assert source.get("/data?records=650").text == render_lines(corpus[:650])
    assert source.get("/healthz").json()["files"] == {"20": "prices-20.tsv", "650": "prices-650.tsv",
                                                       "1000": "prices-1000.tsv"}


def test_source_missing_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        create_source_app(tmp_path / "absent")


# -- edge processing functions ---------------------------------------------

def test_relay_empty():
    payload, report = relay_records(b"")
    assert payload == b""
    assert report.processing_nanos >= 0 and report.records_in == 0


def test_relay_is_byte_transparent(corpus):
    raw = render_lines(corpus[:650]).encode()
    payload, report = relay_records(raw)
    assert payload == raw
    assert report.records_in == 650
    assert report.bytes_in == report.bytes_out == len(raw)
    assert report.mode is Mode.RELAY


def test_relay_last_line_without_newline():
    raw = b"a\nb\nc"
    payload, report = relay_records(raw)
    assert payload == raw and report.records_in == 3


def test_cds_records_decode(corpus, full_dictionary):
    raw = render_lines(corpus[:100]).encode()
    payload, report = cds_records(raw, full_dictionary, EdgeConfig(dictionary_path="x").codec)
    assert decode_payload(payload, full_dictionary) == corpus[:100]
    assert report.bytes_out == len(payload) < report.bytes_in == len(raw)
    assert report.processing_millis == report.processing_nanos // 1_000_000


# -- edge over HTTP ---------------------------------------------------------

def test_edge_cds_request(edge, full_dictionary, corpus):
    r = edge.get("/process", params={"records": 12, "mode": "cds"})
    assert r.status_code == 200
    assert int(r.headers["X-Records"]) == 12
    assert int(r.headers["X-Processing-Millis"]) >= 0
    assert int(r.headers["X-Bytes-In"]) > len(r.content)
    assert decode_payload(r.content, full_dictionary) == corpus[:12]


def test_edge_relay_request(edge, source):
    r = edge.get("/process?records=12&mode=relay")
    assert r.status_code == 200
    assert r.content == source.get("/data?records=12").content
    assert r.headers["X-Mode"] == "relay"


def test_edge_default_mode(edge, full_dictionary):
    r = edge.get("/process?records=3")
    assert r.headers["X-Mode"] == "cds"
    assert len(decode_payload(r.content, full_dictionary)) == 3


def test_edge_zero_records(edge):
    r = edge.get("/process?records=0&mode=cds")
    assert r.status_code == 200 and r.content == b"#C bytewise 0 86400\n"


def test_edge_cap(edge):
    assert edge.get("/process?records=650&mode=cds").status_code == 200
    r = edge.get("/process?records=651&mode=cds")
    assert r.status_code == 413
    assert r.json()["error"] == "TooManyRecords"


def test_edge_custom_cap(source_app, full_dictionary, dict_path):
    with make_edge(source_app, full_dictionary, dict_path, max_records=10) as client:
        assert client.get("/process?records=10").status_code == 200
        assert client.get("/process?records=11").status_code == 413


@pytest.mark.parametrize("query", ["records=abc", "records=5&mode=zip", "mode=cds"])
def test_edge_bad_query(edge, query):
    assert edge.get("/process?" + query).status_code == 400


def test_edge_huffman(source_app, full_dictionary, dict_path, corpus):
    with make_edge(source_app, full_dictionary, dict_path, id_encoding="huffman") as client:
        r = client.get("/process?records=200")
        assert r.content.startswith(b"#C huffman 200 86400\n")
        assert decode_payload(r.content, full_dictionary) == corpus[:200]


def test_edge_unknown_key(source_app, small_dictionary, dict_path):
    with make_edge(source_app, small_dictionary, dict_path) as client:
        r = client.get("/process?records=5&mode=cds")
        assert r.status_code == 422
        assert r.json()["error"] == "UnknownKey"
        # relay never looks at the table
        assert client.get("/process?records=5&mode=relay").status_code == 200


def test_edge_source_unreachable(full_dictionary, dict_path):
    def refuse(request):
        raise httpx.ConnectError("connection refused", request=request)

    cfg = EdgeConfig(source_url=SOURCE, dictionary_path=str(dict_path))
    app = create_edge_app(cfg, full_dictionary, transport=httpx.MockTransport(refuse))
    with TestClient(app) as client:
        r = client.get("/process?records=5")
    assert r.status_code == 502
    assert r.json()["error"] == "SourceUnreachable"


def test_edge_source_error_status(source_app, full_dictionary, dict_path):
    # the source holds 1000 records at most; lift the cap so the cascade gets a 404
    with make_edge(source_app, full_dictionary, dict_path, max_records=5000) as client:
        r = client.get("/process?records=1001")
    assert r.status_code == 502
    assert "404" in r.json()["detail"]


def test_edge_loads_dictionary_from_path(source_app, dict_path):
    cfg = EdgeConfig(source_url=SOURCE, dictionary_path=str(dict_path))
    app = create_edge_app(cfg, transport=httpx.ASGITransport(app=source_app))
    with TestClient(app) as client:
        status = client.get("/healthz").json()
    assert status["dictionary_size"] == 180096
    assert status["max_records"] == 650
    assert status["mode"] == "cds"


def test_edge_handles_one_request_at_a_time(corpus, small_dictionary):
    in_flight = 0
    peak = 0

    async def slow_source(request):
        nonlocal in_flight, peak
        in_flight += 1
        peak = max(peak, in_flight)
        await asyncio.sleep(0.02)
        in_flight -= 1
        return httpx.Response(200, content=b"")

    async def main():
        async with httpx.AsyncClient(transport=httpx.MockTransport(slow_source)) as http:
            node = EdgeNode(EdgeConfig(source_url=SOURCE, dictionary_path="x"), small_dictionary, http)
            results = await asyncio.gather(*(node.handle(0, Mode.RELAY) for _ in range(5)))
        return results

    results = asyncio.run(main())
    assert len(results) == 5
    assert peak == 1


def test_edge_node_cap_raises(small_dictionary):
    node = EdgeNode(EdgeConfig(dictionary_path="x"), small_dictionary)
    with pytest.raises(TooManyRecords):
        asyncio.run(node.handle(651))
