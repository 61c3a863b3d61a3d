"""HTTP review service over the flagged-sample queue.

Four JSON endpoints:

- ``GET /api/queue?status=`` — items in service order (priority desc, id asc)
- ``GET /api/items/{id}`` — one item with dialogue, reasons, and revision
- ``POST /api/items/{id}/decision`` — apply approve/revise/reject
- ``GET /api/stats`` — status counts and flag rate

Every response is an envelope carrying exactly one of ``data``/``error``
plus the queue ``version``.  Clients may send ``If-Match: <version>`` on
decisions for optimistic concurrency; stale versions get 409.  Decisions
are serialized under one lock and persisted (log + snapshot) before the
200 goes out, so a kill -9 between requests never loses an acknowledged
decision.
"""

from __future__ import annotations

import json
import logging
import re
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Any
from urllib.parse import parse_qs, urlparse

from .dialogue import Dialogue
from .errors import InvalidTransition, NotFound, SchemaError
from .gate import QueueStore, ReviewItem, status_counts

log = logging.getLogger(__name__)

_ITEM_PATH = re.compile(r"^/api/items/([^/]+)$")
_DECISION_PATH = re.compile(r"^/api/items/([^/]+)/decision$")


class VersionConflict(Exception):
    """If-Match precondition failed."""


def _reason_summary(item: ReviewItem) -> list[str]:
    out = []
    for reason in item.reasons:
        if reason.get("kind") == "rule":
            out.append(f"{reason.get('rule')}: {reason.get('hint', '')}")
        elif reason.get("kind") == "checker":
            tags = ", ".join(reason.get("errors", ())) or "no tags"
            out.append(f"checker confidence {reason.get('confidence')}: {tags}")
    return out


class ReviewService:
    """Queue state + decision application behind a single lock."""

    def __init__(self, store: QueueStore):
        self.store = store
        self.state = store.load()
        self._lock = threading.RLock()

    def queue_view(self, status: str | None = None) -> dict[str, Any]:
        with self._lock:
            items = self.state.ordered(status)
            return {
                "items": [
                    {
                        "id": item.id,
                        "priority": item.priority,
                        "scenario": item.dialogue.scenario.value,
                        "status": item.status.value,
                        "second_pass": item.second_pass,
                        "reasons": _reason_summary(item),
                    }
                    for item in items
                ]
            }

    def item_view(self, item_id: str) -> dict[str, Any]:
        with self._lock:
            item = self.state.items.get(item_id)
            if item is None:
                raise NotFound(f"no review item with id '{item_id}'")
            return item.to_dict(include_revision=True)

    def stats_view(self) -> dict[str, Any]:
        with self._lock:
            return status_counts(self.state)

    def version(self) -> int:
        with self._lock:
            return self.state.version

    def decide(self, item_id: str, payload: dict[str, Any], if_match: int | None = None) -> dict[str, Any]:
        if not isinstance(payload, dict):
            raise SchemaError("decision body must be a JSON object")
        decision = payload.get("decision")
        reviewer = payload.get("reviewer", "")
        if decision not in ("approve", "revise", "reject"):
            raise SchemaError(f"decision must be approve, revise, or reject, got {decision!r}")
        revision = None
        if payload.get("revision") is not None:
            revision = Dialogue.from_dict(payload["revision"])
        with self._lock:
            if if_match is not None and if_match != self.state.version:
                raise VersionConflict(f"queue moved to version {self.state.version}, you saw {if_match}")
            self.state = self.store.decide(self.state, item_id, decision, reviewer, revision=revision)
            return self.state.items[item_id].to_dict(include_revision=True)


class _Handler(BaseHTTPRequestHandler):
    service: ReviewService  # injected by make_server

    # ----- plumbing -------------------------------------------------------
    def log_message(self, fmt: str, *args: Any) -> None:
        log.debug("http: " + fmt, *args)

    def _send(self, code: int, body: dict[str, Any]) -> None:
        raw = json.dumps(body, ensure_ascii=True).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(raw)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(raw)

    def _ok(self, data: Any) -> None:
        self._send(200, {"data": data, "version": self.service.version()})

    def _error(self, code: int, error_code: str, message: str) -> None:
        self._send(code, {"error": {"code": error_code, "message": message}, "version": self.service.version()})

    # ----- verbs ----------------------------------------------------------
    def do_OPTIONS(self) -> None:  # CORS preflight
        self.send_response(204)
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, If-Match")
        self.end_headers()

    def do_GET(self) -> None:
        parsed = urlparse(self.path)
        try:
            if parsed.path == "/api/queue":
                status = parse_qs(parsed.query).get("status", [None])[0]
                self._ok(self.service.queue_view(status))
                return
            if parsed.path == "/api/stats":
                self._ok(self.service.stats_view())
                return
            match = _ITEM_PATH.match(parsed.path)
            if match:
                self._ok(self.service.item_view(match.group(1)))
                return
            self._error(404, "not_found", f"no route for {parsed.path}")
        except NotFound as exc:
            self._error(404, "not_found", str(exc))
        except Exception as exc:  # pragma: no cover - defensive
            log.exception("GET %s failed", self.path)
            self._error(500, "internal", str(exc))

    def do_POST(self) -> None:
        parsed = urlparse(self.path)
        match = _DECISION_PATH.match(parsed.path)
        if not match:
            self._error(404, "not_found", f"no route for {parsed.path}")
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            raw = self.rfile.read(length) if length else b""
            try:
                payload = json.loads(raw.decode("utf-8")) if raw else {}
            except json.JSONDecodeError as exc:
                self._error(400, "validation", f"body is not valid JSON: {exc}")
                return
            if_match_raw = self.headers.get("If-Match")
            if_match: int | None = None
            if if_match_raw is not None:
                try:
                    if_match = int(if_match_raw.strip().strip('"'))
                except ValueError:
                    self._error(400, "validation", f"If-Match must be an integer version, got {if_match_raw!r}")
                    return
            item = self.service.decide(match.group(1), payload, if_match=if_match)
            self._ok(item)
        except NotFound as exc:
            self._error(404, "not_found", str(exc))
        except (InvalidTransition, VersionConflict) as exc:
            self._error(409, "conflict", str(exc))
        except SchemaError as exc:
            self._error(400, "validation", str(exc))
        except Exception as exc:  # pragma: no cover - defensive
            log.exception("POST %s failed", self.path)
            self._error(500, "internal", str(exc))


def make_server(store: QueueStore, host: str = "127.0.0.1", port: int = 8765) -> ThreadingHTTPServer:
    """Bind the review service; port 0 picks a free port."""
    service = ReviewService(store)
    handler = type("Handler", (_Handler,), {"service": service})
    server = ThreadingHTTPServer((host, port), handler)
    return server


def serve(store: QueueStore, host: str = "127.0.0.1", port: int = 8765) -> None:
    server = make_server(store, host, port)
    bound_host, bound_port = server.server_address[:2]
    log.info("review service listening on http://%s:%s", bound_host, bound_port)
    print(f"review service listening on http://{bound_host}:{bound_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
