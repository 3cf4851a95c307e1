"""
 layoutforge: HTTP job service

 POST /jobs                  multipart file, format, doc_type -> {"job_id"}
 GET  /jobs/{id}             status and page progress
 GET  /jobs/{id}/result      rendered result, ?format=json|html|text
 GET  /stats                 job counts and page latency histograms

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import asyncio
import logging

import aiohttp
from aiohttp import web

from liblayoutforge import imaging, reconstruct
from liblayoutforge.errors import (
    CorruptSource,
    NotReady,
    ServiceError,
    UnknownJob,
    UnsupportedFormat,
    ValidationError,
)

log = logging.getLogger(__name__)

PIPELINE = web.AppKey("pipeline", object)

CONTENT_TYPES = {
    "json": "application/json",
    "html": "text/html",
    "text": "text/plain",
}


def _error(status, message, **extra):
    return web.json_response({"error": message, **extra}, status=status)


async def submit(request):
    """Accept a document and queue it"""
    pipeline = request.app[PIPELINE]
    form = await request.post()
    upload = form.get("file")
    if upload is None or not hasattr(upload, "file"):
        return _error(400, "multipart field [file] missing")
    data = upload.file.read()
    fmt = form.get("format") or imaging.detect_format(data)
    doc_type = form.get("doc_type") or "unknown"
    loop = asyncio.get_running_loop()
    try:
        job_id = await loop.run_in_executor(None, pipeline.submit_job, data, fmt, doc_type)
    except (UnsupportedFormat, CorruptSource, ValidationError) as errmsg:
        log.warning("Rejected submission: [%s]", errmsg)
        return _error(400, str(errmsg))
    return web.json_response({"job_id": job_id}, status=202)


async def status(request):
    """Job status snapshot"""
    pipeline = request.app[PIPELINE]
    try:
        snapshot = pipeline.job_status(request.match_info["job_id"])
    except UnknownJob as errmsg:
        return _error(404, str(errmsg))
    body = {
        "status": snapshot["status"],
        "pages_total": snapshot["pages_total"],
        "pages_done": snapshot["pages_done"],
    }
    if "error" in snapshot:
        body["error"] = snapshot["error"]
    return web.json_response(body)


async def result(request):
    """Rendered job result"""
    pipeline = request.app[PIPELINE]
    fmt = request.query.get("format", "json")
    if fmt not in reconstruct.FORMATS:
        return _error(400, f"Unknown result format: [{fmt}]")
    loop = asyncio.get_running_loop()
    try:
        _, body = await loop.run_in_executor(
            None, pipeline.job_result, request.match_info["job_id"], fmt
        )
    except UnknownJob as errmsg:
        return _error(404, str(errmsg))
    except NotReady as errmsg:
        return _error(409, str(errmsg), reason=errmsg.reason)
    return web.Response(body=body, content_type=CONTENT_TYPES[fmt], charset="utf-8")


async def stats(request):
    """Pipeline statistics"""
    return web.json_response(request.app[PIPELINE].stats())


def create_app(pipeline, start_workers=True):
    """aiohttp application around a pipeline; workers run while the app
    is up"""
    app = web.Application()
    app[PIPELINE] = pipeline
    app.router.add_post("/jobs", submit)
    app.router.add_get("/jobs/{job_id}", status)
    app.router.add_get("/jobs/{job_id}/result", result)
    app.router.add_get("/stats", stats)

    async def on_startup(_):
        if start_workers:
            pipeline.start()

    async def on_cleanup(_):
        if start_workers:
            await asyncio.get_running_loop().run_in_executor(None, pipeline.stop)

    app.on_startup.append(on_startup)
    app.on_cleanup.append(on_cleanup)
    return app


def serve(pipeline):
    """Run the service until interrupted"""
    service = pipeline.service
    log.info("Listening on [%s:%s]", service.host, service.port)
    web.run_app(create_app(pipeline), host=service.host, port=service.port, print=None)


class ServiceClient:
    """Client of a running job service"""

    def __init__(self, url):
        self.log = logging.getLogger(__name__)
        self.url = url.rstrip("/")

    async def _json(self, response):
        body = await response.json(content_type=None)
        if response.status >= 400:
            raise ServiceError(
                f"HTTP {response.status}: {body.get('error', '')}", response.status, body.get("reason")
            )
        return body

    async def submit(self, data, fmt=None, doc_type="unknown", filename="source"):
        """Upload a document; returns the job id"""
        form = aiohttp.FormData()
        form.add_field("file", data, filename=filename, content_type="application/octet-stream")
        if fmt:
            form.add_field("format", fmt)
        form.add_field("doc_type", doc_type or "unknown")
        async with aiohttp.ClientSession() as session:
            async with session.post(f"{self.url}/jobs", data=form) as response:
                return (await self._json(response))["job_id"]

    async def status(self, job_id):
        """Status of a job"""
        async with aiohttp.ClientSession() as session:
            async with session.get(f"{self.url}/jobs/{job_id}") as response:
                return await self._json(response)

    async def result(self, job_id, fmt="json"):
        """Rendered result bytes of a job"""
        async with aiohttp.ClientSession() as session:
            async with session.get(
                f"{self.url}/jobs/{job_id}/result", params={"format": fmt}
            ) as response:
                if response.status >= 400:
                    await self._json(response)
                return await response.read()

