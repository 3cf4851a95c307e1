"""
 layoutforge: asynchronous job pipeline

 Jobs are written to an append-only event log before submit returns.
 Worker threads split sources into page images, process every page as its
 own task and assemble the document once all pages have a completion
 record. Delivery is at least once: a task may run again after a crash or
 a retry, page results are keyed by (job_id, page_index) and replaced
 atomically, so repeated runs leave one record.

 Copyright (C) 2026  layoutforge developers

 This work is licensed under the terms of the GNU GPL, version 3.  See
 the LICENSE file in the top-level directory.
"""
import os
import abc
import enum
import json
import time
import uuid
import logging
import threading
import collections
from dataclasses import dataclass, replace
from typing import Optional

from liblayoutforge import engine as page_engine
from liblayoutforge import imaging, lib, reconstruct
from liblayoutforge.config import DOC_TYPES, RuleConfig
from liblayoutforge.docmodel import DocumentTree
from liblayoutforge.errors import (
    ConfigError,
    LayoutForgeError,
    NotReady,
    RasterizeFailure,
    UnknownJob,
    ValidationError,
)

log = logging.getLogger(__name__)

LATENCY_BUCKETS = (0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 60.0)


class JobStatus(str, enum.Enum):
    """Job lifecycle"""

    QUEUED = "QUEUED"
    SPLITTING = "SPLITTING"
    PROCESSING = "PROCESSING"
    ASSEMBLING = "ASSEMBLING"
    DONE = "DONE"
    FAILED = "FAILED"


TERMINAL = (JobStatus.DONE, JobStatus.FAILED)

TRANSITIONS = {
    JobStatus.QUEUED: (JobStatus.SPLITTING,),
    JobStatus.SPLITTING: (JobStatus.PROCESSING,),
    JobStatus.PROCESSING: (JobStatus.ASSEMBLING,),
    JobStatus.ASSEMBLING: (JobStatus.DONE,),
}


@dataclass(frozen=True)
class ServiceConfig:
    """Service settings; every field can be set from the environment"""

    listen: str = "127.0.0.1:8080"
    dpi: int = 300
    workers: int = os.cpu_count() or 1
    queue_dir: str = "layoutforge-queue"
    max_retries: int = 2

    ENV = {
        "listen": "LAYOUTFORGE_LISTEN",
        "dpi": "LAYOUTFORGE_DPI",
        "workers": "LAYOUTFORGE_WORKERS",
        "queue_dir": "LAYOUTFORGE_QUEUE_DIR",
        "max_retries": "LAYOUTFORGE_MAX_RETRIES",
    }

    @classmethod
    def from_env(cls, environ=None, **overrides):
        """Defaults, then environment, then explicit overrides (None values
        are ignored)"""
        environ = os.environ if environ is None else environ
        values = {}
        for name, var in cls.ENV.items():
            if var in environ:
                values[name] = environ[var]
        values.update({k: v for k, v in overrides.items() if v is not None})
        try:
            for name in ("dpi", "workers", "max_retries"):
                if name in values:
                    values[name] = int(values[name])
        except ValueError as errmsg:
            raise ConfigError(f"Invalid service setting: [{errmsg}]") from errmsg
        config = cls(**values)
        if config.workers < 1 or config.dpi < 1 or config.max_retries < 0:
            raise ConfigError(f"Invalid service settings: [{config}]")
        return config

    @property
    def host(self):
        """Listen host"""
        return self.listen.rsplit(":", 1)[0] or "127.0.0.1"

    @property
    def port(self):
        """Listen port"""
        try:
            return int(self.listen.rsplit(":", 1)[1])
        except (IndexError, ValueError) as errmsg:
            raise ConfigError(f"Invalid listen address: [{self.listen}]") from errmsg


@dataclass(frozen=True)
class Job:
    """Submitted document"""

    job_id: str
    format: str
    doc_type: str
    status: JobStatus
    created: float
    updated: float
    pages_total: int = 0
    error: Optional[str] = None

    def advance(self, status, now=None, error=None):
        """Copy in the next status; any non-terminal job may fail"""
        status = JobStatus(status)
        if self.status in TERMINAL:
            raise ValidationError(f"Job [{self.job_id}] is already {self.status.value}")
        if status != JobStatus.FAILED and status not in TRANSITIONS[self.status]:
            raise ValidationError(
                f"Invalid transition for job [{self.job_id}]: {self.status.value} -> {status.value}"
            )
        now = max(self.updated, time.time() if now is None else now)
        return replace(self, status=status, updated=now, error=error)

    def to_dict(self):
        """Event log record"""
        return {
            "job_id": self.job_id,
            "format": self.format,
            "doc_type": self.doc_type,
            "status": self.status.value,
            "created": self.created,
            "updated": self.updated,
            "pages_total": self.pages_total,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, values):
        """Job from an event log record"""
        return cls(
            values["job_id"],
            values["format"],
            values["doc_type"],
            JobStatus(values["status"]),
            float(values["created"]),
            float(values["updated"]),
            int(values.get("pages_total", 0)),
            values.get("error"),
        )


@dataclass(frozen=True)
class SplitTask:
    """Convert a job source into page images"""

    job_id: str
    attempt: int = 0


@dataclass(frozen=True)
class PageTask:
    """Process one page image of a job"""

    job_id: str
    page_index: int
    image_ref: str
    attempt: int = 0


class EventLog:
    """Append-only JSON lines file"""

    def __init__(self, path):
        self.log = logging.getLogger(__name__)
        self.path = path
        self.lock = threading.Lock()
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)

    def append(self, record):
        """Write one record and flush it to disk"""
        line = lib.json_compact(record) + "\n"
        with self.lock:
            try:
                with open(self.path, "a", encoding="utf-8") as log_file:
                    log_file.write(line)
                    log_file.flush()
                    os.fsync(log_file.fileno())
            except OSError as errmsg:
                raise RuntimeError(f"Unable to append to event log [{self.path}]: [{errmsg}]") from errmsg

    def replay(self):
        """All complete records in write order"""
        if not os.path.exists(self.path):
            return []
        records = []
        with open(self.path, "r", encoding="utf-8") as log_file:
            for line in log_file:
                try:
                    records.append(json.loads(line))
                except json.decoder.JSONDecodeError:
                    self.log.warning("Ignoring truncated event log record")
        return records


class TaskQueue(abc.ABC):
    """Queue handle shared by producers and workers"""

    @abc.abstractmethod
    def put(self, task):
        """Enqueue a task"""

    @abc.abstractmethod
    def get(self, timeout=None):
        """Next task in FIFO order, None after timeout"""

    @abc.abstractmethod
    def __len__(self):
        """Number of waiting tasks"""


class FileQueue(TaskQueue):
    """In-process FIFO whose enqueues are recorded in the event log"""

    def __init__(self, events):
        self.events = events
        self.tasks = collections.deque()
        self.cond = threading.Condition()

    def put(self, task, durable=True):
        if durable:
            record = {"event": "task", "job_id": task.job_id, "attempt": task.attempt}
            if isinstance(task, PageTask):
                record.update({"page_index": task.page_index, "image_ref": task.image_ref})
            self.events.append(record)
        with self.cond:
            self.tasks.append(task)
            self.cond.notify()

    def get(self, timeout=None):
        with self.cond:
            if not self.tasks:
                self.cond.wait(timeout)
            if not self.tasks:
                return None
            return self.tasks.popleft()

    def __len__(self):
        with self.cond:
            return len(self.tasks)


class Ledger:
    """Completion records keyed by (job_id, page_index). A key gets its
    record once; later completions of the same page only count as
    attempts."""

    def __init__(self):
        self.lock = threading.Lock()
        self.keys = set()
        self.entries = []
        self.attempts = collections.Counter()

    def record(self, job_id, page_index, worker):
        """Add the completion record; False when the key already has one"""
        key = (job_id, page_index)
        with self.lock:
            self.attempts[key] += 1
            if key in self.keys:
                return False
            self.keys.add(key)
            self.entries.append((job_id, page_index, worker))
            return True

    def done(self, job_id):
        """Page indices of a job with a completion record"""
        with self.lock:
            return sorted(p for j, p in self.keys if j == job_id)

    def duplicates(self):
        """Keys holding more than one visible record"""
        with self.lock:
            counts = collections.Counter((j, p) for j, p, _ in self.entries)
            return sorted(key for key, count in counts.items() if count > 1)


class LatencyStats:
    """Page latency histograms per document type"""

    def __init__(self, buckets=LATENCY_BUCKETS):
        self.lock = threading.Lock()
        self.buckets = tuple(buckets)
        self.counts = {}

    def observe(self, doc_type, seconds):
        """Count one page latency"""
        with self.lock:
            counts = self.counts.setdefault(doc_type, [0] * (len(self.buckets) + 1))
            idx = next((i for i, b in enumerate(self.buckets) if seconds <= b), len(self.buckets))
            counts[idx] += 1

    def snapshot(self):
        """Histograms as {doc_type: {"le_<bound>": count, "inf": count}}"""
        with self.lock:
            result = {}
            for doc_type, counts in sorted(self.counts.items()):
                labels = [f"le_{b:g}" for b in self.buckets] + ["inf"]
                result[doc_type] = dict(zip(labels, counts))
            return result


class Pipeline:
    """Durable job store, task queue and worker pool"""

    def __init__(self, service=None, rules=None, atlas=None, before_page=None):
        self.log = logging.getLogger(__name__)
        self.service = service or ServiceConfig()
        self.rules = rules or RuleConfig()
        self.atlas = atlas
        self.before_page = before_page
        self.root = self.service.queue_dir
        self.events = EventLog(os.path.join(self.root, "events.jsonl"))
        self.queue = FileQueue(self.events)
        self.ledger = Ledger()
        self.latency = LatencyStats()
        self.jobs = {}
        self.lock = threading.RLock()
        self.engines = {}
        self.threads = []
        self.stopping = threading.Event()
        self._recover()

    def _source_path(self, job):
        return os.path.join(self.root, "sources", f"{job.job_id}.{job.format}")

    def _job_dir(self, job_id):
        return os.path.join(self.root, "jobs", job_id)

    def _page_result(self, job_id, page_index):
        return os.path.join(self._job_dir(job_id), f"page_{page_index}.json")

    def _image_dir(self, job_id):
        return os.path.join(self._job_dir(job_id), "images")

    def _store(self, job):
        self.events.append({"event": "job", **job.to_dict()})
        self.jobs[job.job_id] = job

    def _transition(self, job_id, status, error=None, **changes):
        with self.lock:
            job = self.jobs[job_id].advance(status, error=error)
            job = replace(job, **changes)
            self._store(job)
        if status == JobStatus.FAILED:
            self.log.error("Job [%s] failed: [%s]", job_id, error)
        else:
            self.log.info("Job [%s]: [%s]", job_id, status.value)
        return job

    def _recover(self):
        """Rebuild jobs and outstanding tasks from the event log"""
        tasks = {}
        for record in self.events.replay():
            if record.get("event") == "job":
                job = Job.from_dict(record)
                self.jobs[job.job_id] = job
            elif record.get("event") == "task" and "page_index" in record:
                key = (record["job_id"], record["page_index"])
                tasks[key] = PageTask(record["job_id"], record["page_index"], record["image_ref"], record["attempt"])
            elif record.get("event") == "done":
                key = (record["job_id"], record["page_index"])
                self.ledger.record(record["job_id"], record["page_index"], record.get("worker", "recovered"))
                tasks.pop(key, None)
        if not self.jobs:
            return
        for job in sorted(self.jobs.values(), key=lambda j: j.created):
            if job.status in (JobStatus.QUEUED, JobStatus.SPLITTING):
                self.queue.put(SplitTask(job.job_id), durable=False)
            elif job.status == JobStatus.PROCESSING:
                for key in sorted(k for k in tasks if k[0] == job.job_id):
                    self.queue.put(tasks[key], durable=False)
                self._maybe_assemble(job.job_id)
            elif job.status == JobStatus.ASSEMBLING:
                self._assemble(job.job_id)
        self.log.info("Recovered [%d] jobs from [%s]", len(self.jobs), self.events.path)

    def engine_for(self, doc_type):
        """Page engine configured with the rule profile of a document type"""
        with self.lock:
            if doc_type not in self.engines:
                config = self.rules.for_doc_type(doc_type)
                atlas = self.atlas or page_engine.default_atlas()
                self.engines[doc_type] = page_engine.Engine(config, atlas=atlas)
            return self.engines[doc_type]

    def submit_job(self, source, fmt, doc_type="unknown"):
        """Record a job durably and queue it; returns the job id without
        waiting for processing"""
        doc_type = doc_type or "unknown"
        if doc_type not in DOC_TYPES + ("unknown",):
            raise ValidationError(f"Unknown document type: [{doc_type}]")
        imaging.validate_source(source, fmt)
        now = time.time()
        job = Job(uuid.uuid4().hex, fmt, doc_type, JobStatus.QUEUED, now, now)
        lib.write_file(self._source_path(job), bytes(source))
        with self.lock:
            self._store(job)
        self.queue.put(SplitTask(job.job_id))
        self.log.info("Submitted job [%s]: format [%s] type [%s]", job.job_id, fmt, doc_type)
        return job.job_id

    def split_pages(self, job_id):
        """Rasterize the job source into one PageTask per page, enqueued in
        page order; the job fails when the source cannot be rasterized"""
        job = self._get(job_id)
        if job.status == JobStatus.QUEUED:
            job = self._transition(job_id, JobStatus.SPLITTING)
        elif job.status != JobStatus.SPLITTING:
            self.log.debug("Job [%s] already split", job_id)
            return []
        try:
            with open(self._source_path(job), "rb") as source_file:
                source = source_file.read()
            pages = imaging.rasterize(source, job.format, self.service.dpi)
        except (RasterizeFailure, OSError) as errmsg:
            self._transition(job_id, JobStatus.FAILED, error=f"{type(errmsg).__name__}: {errmsg}")
            return []
        tasks = []
        for idx, page in enumerate(pages):
            ref = os.path.join(self._job_dir(job_id), f"page_{idx}.png")
            lib.write_file(ref, lib.png_bytes(page))
            tasks.append(PageTask(job_id, idx, ref))
        self._transition(job_id, JobStatus.PROCESSING, pages_total=len(tasks))
        for task in tasks:
            self.queue.put(task)
        return tasks

    def _process(self, task, worker):
        job = self._get(task.job_id)
        if job.status != JobStatus.PROCESSING:
            self.log.debug("Dropping task of job [%s] in state [%s]", job.job_id, job.status.value)
            return
        started = time.monotonic()
        if self.before_page is not None:
            self.before_page(task)
        try:
            img = lib.read_png(task.image_ref)
        except OSError as errmsg:
            raise RasterizeFailure(f"Unable to read page image [{task.image_ref}]: [{errmsg}]") from errmsg
        result = self.engine_for(job.doc_type).analyze_page(img, task.page_index, job.job_id)
        page_doc = DocumentTree((result.layout,), job.job_id)
        reconstruct.restore_crops(page_doc, [result.image], self._image_dir(job.job_id))
        lib.write_file(
            self._page_result(job.job_id, task.page_index), reconstruct.to_layout_json(page_doc)
        )
        if self.ledger.record(job.job_id, task.page_index, worker):
            self.events.append(
                {"event": "done", "job_id": job.job_id, "page_index": task.page_index, "worker": worker}
            )
        self.latency.observe(job.doc_type, time.monotonic() - started)
        self._maybe_assemble(job.job_id)

    def _maybe_assemble(self, job_id):
        with self.lock:
            job = self.jobs[job_id]
            if job.status != JobStatus.PROCESSING:
                return
            if len(self.ledger.done(job_id)) < job.pages_total:
                return
            self._transition(job_id, JobStatus.ASSEMBLING)
        self._assemble(job_id)

    def _assemble(self, job_id):
        job = self._get(job_id)
        try:
            pages = []
            for idx in range(job.pages_total):
                with open(self._page_result(job_id, idx), "rb") as page_file:
                    pages += reconstruct.parse_layout_json(page_file.read()).pages
            doc = DocumentTree(tuple(pages), job_id).validate()
            lib.write_file(os.path.join(self._job_dir(job_id), "layout.json"), reconstruct.to_layout_json(doc))
        except (OSError, RuntimeError, LayoutForgeError) as errmsg:
            self._transition(job_id, JobStatus.FAILED, error=f"Assembly failed: {errmsg}")
            return
        self._transition(job_id, JobStatus.DONE)

    def _fail_or_retry(self, task, errmsg):
        reason = f"{type(errmsg).__name__}: {errmsg}"
        if task.attempt < self.service.max_retries:
            self.log.warning(
                "Retrying task of job [%s] (attempt [%d]): [%s]", task.job_id, task.attempt + 1, reason
            )
            self.queue.put(replace(task, attempt=task.attempt + 1))
            return
        with self.lock:
            if self.jobs[task.job_id].status not in TERMINAL:
                self._transition(task.job_id, JobStatus.FAILED, error=reason)

    def run_worker(self, name="worker", stop=None):
        """Service loop: dequeue and run tasks until stop is set"""
        stop = stop or self.stopping
        self.log.debug("Worker [%s] started", name)
        while not stop.is_set():
            task = self.queue.get(timeout=0.2)
            if task is None:
                continue
            try:
                if isinstance(task, SplitTask):
                    self.split_pages(task.job_id)
                else:
                    self._process(task, name)
            except Exception as errmsg:  # pylint: disable=broad-except
                self._fail_or_retry(task, errmsg)
        self.log.debug("Worker [%s] stopped", name)

    def start(self, workers=None):
        """Start worker threads"""
        count = workers or self.service.workers
        self.stopping.clear()
        for idx in range(count):
            thread = threading.Thread(
                target=self.run_worker, args=(f"worker-{idx}",), name=f"layoutforge-worker-{idx}", daemon=True
            )
            thread.start()
            self.threads.append(thread)
        self.log.info("Started [%d] workers", count)

    def stop(self):
        """Stop and join the worker threads"""
        self.stopping.set()
        for thread in self.threads:
            thread.join()
        self.threads = []

    def _get(self, job_id):
        try:
            return self.jobs[job_id]
        except KeyError as errmsg:
            raise UnknownJob(f"Unknown job: [{job_id}]") from errmsg

    def job_status(self, job_id):
        """Status snapshot with page progress"""
        job = self._get(job_id)
        done = len(self.ledger.done(job_id))
        status = {
            "job_id": job.job_id,
            "status": job.status.value,
            "doc_type": job.doc_type,
            "pages_total": job.pages_total,
            "pages_done": min(done, job.pages_total),
            "created": job.created,
            "updated": job.updated,
        }
        if job.error:
            status["error"] = job.error
        return status

    def wait(self, job_ids, timeout=60.0, interval=0.05):
        """Block until all jobs are terminal; returns their statuses"""
        deadline = time.monotonic() + timeout
        pending = list(job_ids)
        while pending and time.monotonic() < deadline:
            pending = [j for j in pending if self._get(j).status not in TERMINAL]
            if pending:
                time.sleep(interval)
        return {j: self._get(j).status for j in job_ids}

    def job_result(self, job_id, fmt="json"):
        """Assembled DocumentTree and its rendering in the given format"""
        job = self._get(job_id)
        if job.status != JobStatus.DONE:
            reason = job.error if job.status == JobStatus.FAILED else job.status.value
            raise NotReady(f"Job [{job_id}] is not done: [{reason}]", reason=reason)
        try:
            with open(os.path.join(self._job_dir(job_id), "layout.json"), "rb") as layout_file:
                doc = reconstruct.parse_layout_json(layout_file.read())
        except OSError as errmsg:
            raise NotReady(f"Result of job [{job_id}] unreadable: [{errmsg}]", reason=str(errmsg)) from errmsg
        opts = reconstruct.RenderOptions(format=fmt, image_dir=self._image_dir(job_id))
        return doc, reconstruct.render(doc, opts)

    def stats(self):
        """Job counts per status and page latency histograms"""
        counts = collections.Counter(j.status.value for j in self.jobs.values())
        return {
            "jobs": {s.value: counts.get(s.value, 0) for s in JobStatus},
            "queued_tasks": len(self.queue),
            "latency": self.latency.snapshot(),
        }
