"""HTTP front end for the grading service.

Endpoints::

    POST /submissions        grade an upload (JSON or multipart/form-data)
    GET  /submissions/{id}   per-piece reports for one submission
    GET  /leaderboard        ranked entries as a JSON array
    GET  /healthz            liveness plus reference-set size

A JSON upload is ``{"name": ..., "directory": ...}`` naming a directory of
``<piece_id>.mid`` files readable by the server, or ``{"name": ...,
"files": {piece_id: base64 SMF}}``; either form may add ``submission_id`` and
``runtime_ms``.  A multipart upload carries a ``name`` field, optional
``submission_id``, one file part per ``<piece_id>.mid`` and an optional
``metadata.json`` part.
"""
from __future__ import annotations

import base64
import binascii
import json
import logging
import queue
import re
import threading
from dataclasses import dataclass
from email.parser import BytesParser
from email.policy import HTTP
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from ..matching import Tolerances
from .grading import (
    METADATA_FILE, ReferenceSet, Submission, SubmissionError, aggregate_json, grade_submission,
    parse_runtime_metadata, submission_from_directory,
)
from .store import DuplicateSubmission, Store, StoreError, leaderboard_json

log = logging.getLogger(__name__)

MAX_BODY = 256 * 1024 * 1024
_ID_RE = re.compile(r"^[A-Za-z0-9_.-]{1,128}$")


@dataclass
class ServiceConfig:
    tolerances: Tolerances = Tolerances()
    queued: bool = False  # grade on a background worker instead of inside the request
    workers: int = 1


class GradingService:
    """Grades submissions against one reference set and records them in a store."""

    def __init__(self, references: ReferenceSet, store: Store, config: ServiceConfig = ServiceConfig()):
        if not references.pieces:
            raise ValueError("reference set is empty")
        self.references = references
        self.store = store
        self.config = config
        self._lock = threading.Lock()
        self._in_flight: dict[str, str] = {}  # id -> "queued" | "grading" | "failed: ..."
        self._queue: queue.Queue | None = None
        if config.queued:
            self._queue = queue.Queue()
            threading.Thread(target=self._worker, name="grader", daemon=True).start()

    def _reserve(self, submission: Submission):
        with self._lock:
            sid = submission.submission_id
            if sid in self._in_flight or sid in self.store:
                raise DuplicateSubmission(f"submission id {sid!r} already exists")
            self._in_flight[sid] = "queued"

    def submit(self, submission: Submission):
        """Grade now (returns the result) or enqueue (returns ``None``)."""
        if not _ID_RE.match(submission.submission_id):
            raise SubmissionError("submission_id may only contain letters, digits, '_', '-' and '.'")
        self._reserve(submission)
        if self._queue is not None:
            self._queue.put(submission)
            return None
        return self._grade(submission)

    def _grade(self, submission: Submission):
        sid = submission.submission_id
        with self._lock:
            self._in_flight[sid] = "grading"
        try:
            result = grade_submission(submission, self.references, self.config.tolerances,
                                      workers=self.config.workers)
            self.store.append(result)
        except Exception as exc:
            with self._lock:
                self._in_flight[sid] = f"failed: {exc}"
            raise
        with self._lock:
            del self._in_flight[sid]
        return result

    def _worker(self):
        while True:
            submission = self._queue.get()
            try:
                self._grade(submission)
            except Exception:
                log.exception("grading %s failed", submission.submission_id)
            finally:
                self._queue.task_done()

    def wait_idle(self):
        if self._queue is not None:
            self._queue.join()

    def status(self, submission_id: str) -> dict | None:
        stored = self.store.get(submission_id)
        if stored is not None:
            return stored.to_json()
        with self._lock:
            state = self._in_flight.get(submission_id)
        if state is None:
            return None
        return {"submission_id": submission_id, "status": state, "reports": []}


# --------------------------------------------------------------------------
# request parsing


def _json_submission(body: bytes) -> Submission:
    try:
        doc = json.loads(body)
    except ValueError as exc:
        raise SubmissionError(f"invalid JSON body: {exc}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("name"), str) or not doc["name"]:
        raise SubmissionError("body must be an object with a non-empty 'name'")
    extra = {}
    if "submission_id" in doc:
        extra["submission_id"] = str(doc["submission_id"])
    if "directory" in doc:
        sub = submission_from_directory(Path(doc["directory"]), doc["name"], **extra)
    elif isinstance(doc.get("files"), dict):
        try:
            files = {str(k): base64.b64decode(v, validate=True) for k, v in doc["files"].items()}
        except (binascii.Error, TypeError, ValueError) as exc:
            raise SubmissionError(f"files must be base64 strings: {exc}") from exc
        sub = Submission(name=doc["name"], files=files, **extra)
    else:
        raise SubmissionError("body needs 'directory' or 'files'")
    if "runtime_ms" in doc:
        sub.runtime_ms = parse_runtime_metadata(json.dumps({"runtime_ms": doc["runtime_ms"]}).encode())
    return sub


def _multipart_submission(content_type: str, body: bytes) -> Submission:
    msg = BytesParser(policy=HTTP).parsebytes(
        b"Content-Type: " + content_type.encode("latin-1") + b"\r\n\r\n" + body)
    if not msg.is_multipart():
        raise SubmissionError("malformed multipart body")
    fields, files, runtime = {}, {}, None
    for part in msg.iter_parts():
        name = part.get_param("name", header="content-disposition")
        filename = part.get_filename()
        payload = part.get_payload(decode=True) or b""
        if filename:
            base = Path(filename).name
            if base == METADATA_FILE:
                runtime = parse_runtime_metadata(payload)
            elif base.endswith(".mid"):
                files[base[:-4]] = payload
            else:
                log.warning("ignoring uploaded file %r", filename)
        elif name:
            fields[name] = payload.decode("utf-8").strip()
    if not fields.get("name"):
        raise SubmissionError("multipart upload needs a 'name' field")
    extra = {"submission_id": fields["submission_id"]} if fields.get("submission_id") else {}
    return Submission(name=fields["name"], files=files, runtime_ms=runtime, **extra)


class _Handler(BaseHTTPRequestHandler):
    service: GradingService  # set on the subclass made by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.info("%s - %s", self.address_string(), fmt % args)

    def _send(self, status: int, payload) -> None:
        body = (payload if isinstance(payload, str) else json.dumps(payload)).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _error(self, status: HTTPStatus, detail) -> None:
        self._send(status, {"error": status.phrase, "detail": detail})

    def do_GET(self):
        path = self.path.split("?", 1)[0].rstrip("/")
        if path == "/healthz":
            self._send(200, {"status": "ok", "pieces": len(self.service.references)})
        elif path == "/leaderboard":
            self._send(200, leaderboard_json(self.service.store.leaderboard()))
        elif path.startswith("/submissions/"):
            doc = self.service.status(path[len("/submissions/"):])
            if doc is None:
                self._error(HTTPStatus.NOT_FOUND, "unknown submission id")
            else:
                self._send(200, doc)
        else:
            self._error(HTTPStatus.NOT_FOUND, f"no route for {path}")

    def do_POST(self):
        path = self.path.split("?", 1)[0].rstrip("/")
        if path != "/submissions":
            self._error(HTTPStatus.NOT_FOUND, f"no route for {path}")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
        except ValueError:
            length = -1
        if not 0 < length <= MAX_BODY:
            self._error(HTTPStatus.BAD_REQUEST, "missing or oversized body")
            return
        body = self.rfile.read(length)
        ctype = self.headers.get("Content-Type", "application/json")
        try:
            if ctype.startswith("multipart/form-data"):
                submission = _multipart_submission(ctype, body)
            else:
                submission = _json_submission(body)
            result = self.service.submit(submission)
        except DuplicateSubmission as exc:
            self._error(HTTPStatus.CONFLICT, str(exc))
            return
        except SubmissionError as exc:
            self._error(HTTPStatus.BAD_REQUEST, str(exc))
            return
        except StoreError as exc:
            self._error(HTTPStatus.INTERNAL_SERVER_ERROR, str(exc))
            return
        if result is None:
            self._send(202, {"submission_id": submission.submission_id, "status": "queued"})
        else:
            self._send(201, {
                "submission_id": submission.submission_id,
                "status": "graded",
                "aggregate": aggregate_json(result.aggregate),
                "annotations": result.annotations,
                "flags": result.flags,
            })


def make_server(service: GradingService, host: str = "127.0.0.1", port: int = 8000) -> ThreadingHTTPServer:
    handler = type("Handler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    server.daemon_threads = True
    return server


def serve(service: GradingService, host: str = "127.0.0.1", port: int = 8000) -> None:
    server = make_server(service, host, port)
    log.info("serving %d reference pieces on http://%s:%d", len(service.references), host, server.server_port)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
