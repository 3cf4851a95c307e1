import asyncio
import json

import aiohttp
import pytest
from aiohttp import test_utils

from conftest import empty_pdf_bytes, text_block_page
from liblayoutforge import lib, reconstruct, service
from liblayoutforge.errors import ServiceError
from liblayoutforge.pipeline import Pipeline, ServiceConfig


@pytest.fixture
def pipeline(tmp_path, atlas):
    pipeline = Pipeline(ServiceConfig(queue_dir=str(tmp_path / "queue"), workers=2, dpi=72), atlas=atlas)
    yield pipeline
    pipeline.stop()


def with_client(pipeline, scenario, start_workers=True):
    """Run scenario(client) against an in-process server"""

    async def main():
        app = service.create_app(pipeline, start_workers=start_workers)
        async with test_utils.TestClient(test_utils.TestServer(app)) as client:
            return await scenario(client)

    return asyncio.run(main())


def upload(data, **fields):
    form = aiohttp.FormData()
    form.add_field("file", data, filename="source", content_type="application/octet-stream")
    for name, value in fields.items():
        form.add_field(name, value)
    return form


async def wait_done(client, job_id, timeout=60.0):
    loop = asyncio.get_running_loop()
    deadline = loop.time() + timeout
    while loop.time() < deadline:
        response = await client.get(f"/jobs/{job_id}")
        body = await response.json()
        if body["status"] in ("DONE", "FAILED"):
            return body
        await asyncio.sleep(0.05)
    raise AssertionError(f"job {job_id} did not finish")


def test_submit_status_and_result(pipeline):
    async def scenario(client):
        response = await client.post("/jobs", data=upload(lib.png_bytes(text_block_page()), doc_type="letterpress"))
        assert response.status == 202
        job_id = (await response.json())["job_id"]
        body = await wait_done(client, job_id)
        assert body == {"status": "DONE", "pages_total": 1, "pages_done": 1}
        response = await client.get(f"/jobs/{job_id}/result")
        assert response.status == 200
        assert response.content_type == "application/json"
        doc = reconstruct.parse_layout_json(await response.read())
        assert doc.source_id == job_id
        response = await client.get(f"/jobs/{job_id}/result", params={"format": "html"})
        assert response.content_type == "text/html"
        assert (await response.text()).startswith("<!DOCTYPE html>")
        response = await client.get("/stats")
        stats = await response.json()
        assert stats["jobs"]["DONE"] == 1
        assert "letterpress" in stats["latency"]

    with_client(pipeline, scenario)


def test_unknown_job(pipeline):
    async def scenario(client):
        assert (await client.get("/jobs/nope")).status == 404
        assert (await client.get("/jobs/nope/result")).status == 404

    with_client(pipeline, scenario)


def test_result_before_done_is_409(pipeline):
    async def scenario(client):
        response = await client.post("/jobs", data=upload(lib.png_bytes(text_block_page()), format="png"))
        job_id = (await response.json())["job_id"]
        response = await client.get(f"/jobs/{job_id}/result")
        assert response.status == 409
        assert (await response.json())["reason"] == "QUEUED"

    with_client(pipeline, scenario, start_workers=False)


def test_failed_job_reports_error(pipeline):
    async def scenario(client):
        response = await client.post("/jobs", data=upload(empty_pdf_bytes()))
        job_id = (await response.json())["job_id"]
        body = await wait_done(client, job_id)
        assert body["status"] == "FAILED"
        assert "EmptyDocument" in body["error"]
        response = await client.get(f"/jobs/{job_id}/result")
        assert response.status == 409

    with_client(pipeline, scenario)


@pytest.mark.parametrize(
    "form",
    [
        lambda: aiohttp.FormData({"format": "png"}),
        lambda: upload(b"GIF89a", format="gif"),
        lambda: upload(lib.png_bytes(text_block_page()), doc_type="newspaper"),
    ],
)
def test_bad_submissions(pipeline, form):
    async def scenario(client):
        response = await client.post("/jobs", data=form())
        assert response.status == 400
        assert "error" in await response.json()

    with_client(pipeline, scenario, start_workers=False)
    assert pipeline.jobs == {}


def test_unknown_result_format(pipeline):
    async def scenario(client):
        response = await client.get("/jobs/any/result", params={"format": "pdf"})
        assert response.status == 400

    with_client(pipeline, scenario, start_workers=False)


def test_service_client(pipeline):
    async def scenario(client):
        remote = service.ServiceClient(str(client.make_url("/")))
        job_id = await remote.submit(lib.png_bytes(text_block_page()), "png")
        with pytest.raises(ServiceError) as failure:
            await remote.status("nope")
        assert failure.value.status == 404
        await wait_done(client, job_id)
        status = await remote.status(job_id)
        assert status["status"] == "DONE"
        data = await remote.result(job_id, "json")
        assert json.loads(data)["source_id"] == job_id
        text = await remote.result(job_id, "text")
        assert isinstance(text, bytes)

    with_client(pipeline, scenario)
