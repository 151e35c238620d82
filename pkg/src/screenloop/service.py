"""Local HTTP API over the engine, plus static hosting for the browser UI.

Everything stays on the user's machine: the server binds loopback unless
told otherwise, and a non-loopback bind can demand a static token from the
SCREENLOOP_API_TOKEN environment variable.  The API is a thin bijection
over engine operations; the only state it adds is per-project persistence
under the data directory:

    <data_dir>/<project_id>/meta.json      project name, seed, dataset file
    <data_dir>/<project_id>/dataset.raw    original upload bytes
    <data_dir>/<project_id>/events.csv     append-only label event log
    <data_dir>/<project_id>/state.zip      engine snapshot (refreshed
                                           periodically and on shutdown)

On restart a project resumes by loading the snapshot, replaying any tail
events from events.csv, and retraining once if the model is stale, which
reproduces the pre-restart ranking at quiescence.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import secrets
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from . import corpus
from .engine import LabelEvent, ScreeningEngine, Settings
from .rng import substream
from .errors import (
    AlreadyLabeled,
    EmptyQuery,
    NoPriorExcluded,
    NoPriorIncluded,
    OverlappingPriors,
    ScreenloopError,
    UnknownRowId,
    UnsupportedFormat,
)

API_SCHEMA_VERSION = "1"
SNAPSHOT_EVERY = 50  # completed retrains between state.zip refreshes
_LOOPBACK = ("127.0.0.1", "localhost", "::1")

CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "application/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json; charset=utf-8",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".ico": "image/x-icon",
    ".png": "image/png",
}

PLACEHOLDER_INDEX = """<!doctype html>
<html><head><meta charset="utf-8"><title>screenloop</title></head>
<body style="font-family: system-ui; margin: 4rem auto; max-width: 40rem">
<h1>screenloop service is running</h1>
<p>The browser UI bundle is not installed. Build it with
<code>npm run build</code> in the frontend directory and restart with
<code>--ui-dir frontend/dist</code>, or talk to the JSON API under
<code>/api/</code> directly.</p>
</body></html>"""


class ApiError(Exception):
    def __init__(self, status: int, error_code: str, message: str, detail=None):
        super().__init__(message)
        self.status = status
        self.error_code = error_code
        self.detail = detail


class Project:
    """One screening project: dataset + engine + on-disk persistence."""

    def __init__(self, directory: Path, project_id: str, name: str, seed: int):
        self.directory = directory
        self.project_id = project_id
        self.name = name
        self.seed = seed
        self.lock = threading.RLock()
        self.dataset: corpus.Dataset | None = None
        self.dataset_format: str | None = None
        self.engine: ScreeningEngine | None = None
        self._retrains_since_snapshot = 0
        self._suggest_counter = 0

    # -- persistence --------------------------------------------------------

    @classmethod
    def create(cls, root: Path, name: str) -> "Project":
        project_id = secrets.token_hex(8)
        seed = int.from_bytes(hashlib.sha256(project_id.encode()).digest()[:4], "big")
        directory = root / project_id
        directory.mkdir(parents=True)
        project = cls(directory, project_id, name, seed)
        project._write_meta()
        return project

    @classmethod
    def load(cls, root: Path, project_id: str) -> "Project | None":
        directory = root / project_id
        meta_path = directory / "meta.json"
        if not meta_path.is_file():
            return None
        meta = json.loads(meta_path.read_text("utf-8"))
        project = cls(directory, project_id, meta["name"], meta["seed"])
        raw = directory / "dataset.raw"
        if raw.is_file():
            project.dataset_format = meta.get("dataset_format")
            project.dataset = corpus.parse_auto(
                raw.read_bytes(), f"dataset.{(project.dataset_format or '').lower()}"
            )
            project._resume_engine()
        return project

    def _write_meta(self) -> None:
        meta = {
            "project_id": self.project_id,
            "name": self.name,
            "seed": self.seed,
            "dataset_format": self.dataset_format,
        }
        (self.directory / "meta.json").write_text(
            json.dumps(meta, indent=2) + "\n", "utf-8"
        )

    def _events_path(self) -> Path:
        return self.directory / "events.csv"

    def _append_event_line(self, event: LabelEvent) -> None:
        line = f"{event.order},{event.row_id},{event.label},{event.source},{event.model_version}\n"
        path = self._events_path()
        if not path.exists():
            path.write_text("order,row_id,label,source,model_version\n", "utf-8")
        with path.open("a", encoding="utf-8") as fh:
            fh.write(line)

    def _rewrite_events(self) -> None:
        lines = ["order,row_id,label,source,model_version"]
        lines += [
            f"{e.order},{e.row_id},{e.label},{e.source},{e.model_version}"
            for e in self.engine.events
        ]
        self._events_path().write_text("\n".join(lines) + "\n", "utf-8")

    def _read_event_log(self) -> list[LabelEvent]:
        path = self._events_path()
        if not path.is_file():
            return []
        events = []
        for line in path.read_text("utf-8").splitlines()[1:]:
            order, row, label, source, mv = line.split(",")
            events.append(LabelEvent(int(order), int(row), int(label), source, int(mv)))
        return events

    def save_snapshot(self) -> None:
        if self.engine is None:
            return
        (self.directory / "state.zip").write_bytes(self.engine.save_state())

    def _resume_engine(self) -> None:
        events = self._read_event_log()
        state_path = self.directory / "state.zip"
        if state_path.is_file():
            engine = ScreeningEngine.load_state(
                state_path.read_bytes(), self.dataset, synchronous=True
            )
            for event in events[len(engine.events):]:
                engine.submit_label(event.row_id, event.label)
            engine.refresh_if_stale()
        elif events:
            engine = ScreeningEngine.replay(
                self.dataset, Settings(seed=self.seed), events, synchronous=True
            )
        else:
            return
        self._attach_engine(engine)

    def _attach_engine(self, engine: ScreeningEngine) -> None:
        self.engine = engine
        engine.on_retrain_complete = self._on_retrain
        engine.enable_async()

    def _on_retrain(self, version: int) -> None:
        with self.lock:
            self._retrains_since_snapshot += 1
            if self._retrains_since_snapshot >= SNAPSHOT_EVERY:
                self._retrains_since_snapshot = 0
                self.save_snapshot()

    # -- operations ----------------------------------------------------------

    def set_dataset(self, body: bytes, fmt: str | None) -> dict:
        with self.lock:
            if self.engine is not None:
                raise ApiError(409, "dataset_locked",
                               "labels exist; the dataset can no longer be replaced")
            try:
                if fmt == "csv":
                    dataset = corpus.parse_csv(body)
                elif fmt == "ris":
                    dataset = corpus.parse_ris(body)
                else:
                    dataset = corpus.parse_auto(body)
            except UnsupportedFormat as exc:
                raise ApiError(422, "unsupported_format", str(exc)) from None
            except ScreenloopError as exc:
                raise ApiError(422, "parse_failure", str(exc)) from None
            self.dataset = dataset
            self.dataset_format = dataset.source_format
            (self.directory / "dataset.raw").write_bytes(body)
            self._write_meta()
            return {
                "n_records": dataset.n_records,
                "n_rejected": dataset.diagnostics.n_rejected,
                "format": dataset.source_format,
            }

    def set_priors(self, included, excluded) -> None:
        with self.lock:
            self._require_dataset()
            if self.engine is not None:
                raise ApiError(409, "priors_already_set", "priors were already chosen")
            try:
                engine = ScreeningEngine.create(
                    self.dataset, Settings(seed=self.seed), included, excluded,
                    synchronous=True,
                )
            except (NoPriorIncluded, NoPriorExcluded, OverlappingPriors, UnknownRowId) as exc:
                raise ApiError(400, type(exc).__name__, str(exc)) from None
            self._attach_engine(engine)
            self._rewrite_events()
            self.save_snapshot()

    def label(self, row_id: int, label: int) -> None:
        with self.lock:
            engine = self._require_engine()
        try:
            event = engine.submit_label(row_id, label)
        except AlreadyLabeled as exc:
            raise ApiError(409, "AlreadyLabeled", str(exc)) from None
        except UnknownRowId as exc:
            raise ApiError(404, "UnknownRowId", str(exc)) from None
        except ValueError as exc:
            raise ApiError(400, "bad_label", str(exc)) from None
        with self.lock:
            self._append_event_line(event)

    def suggest_rows(self, k: int) -> list[int]:
        """Uniform unlabeled rows for picking the irrelevant prior.

        Before priors exist there is no engine yet, so the pre-prior pool is
        the whole dataset; afterwards this delegates to the engine op.
        """
        with self.lock:
            dataset = self._require_dataset()
            if self.engine is not None:
                return self.engine.suggest_random_excluded(min(k, dataset.n_records - 2))
            rng = substream(self.seed, "suggest-pre", self._suggest_counter)
            self._suggest_counter += 1
            return rng.sample(range(dataset.n_records), min(k, dataset.n_records))

    def progress(self) -> dict:
        with self.lock:
            engine = self.engine
            n_total = self.dataset.n_records if self.dataset else 0
            if engine is None:
                return {
                    "project_id": self.project_id,
                    "name": self.name,
                    "n_labeled": 0,
                    "n_relevant": 0,
                    "n_irrelevant": 0,
                    "n_total": n_total,
                    "last_model_version": 0,
                    "recall_proxy": [],
                    "busy": False,
                }
            events = engine.events
            n_relevant = sum(1 for e in events if e.label == 1)
            windows = [
                sum(1 for e in events[i : i + 10] if e.label == 1)
                for i in range(0, len(events), 10)
            ]
            return {
                "project_id": self.project_id,
                "name": self.name,
                "n_labeled": len(events),
                "n_relevant": n_relevant,
                "n_irrelevant": len(events) - n_relevant,
                "n_total": n_total,
                "last_model_version": engine.model_version,
                "recall_proxy": windows,
                "busy": engine.busy,
            }

    def _require_dataset(self) -> corpus.Dataset:
        if self.dataset is None:
            raise ApiError(400, "no_dataset", "upload a dataset first")
        return self.dataset

    def _require_engine(self) -> ScreeningEngine:
        if self.engine is None:
            raise ApiError(409, "priors_not_set", "select prior records first")
        return self.engine

    def close(self) -> None:
        with self.lock:
            if self.engine is not None:
                self.engine.quiesce(timeout=30)
                self.save_snapshot()
                self.engine.close()


class ProjectStore:
    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._projects: dict[str, Project] = {}

    def create(self, name: str) -> Project:
        with self._lock:
            project = Project.create(self.root, name)
            self._projects[project.project_id] = project
            return project

    def get(self, project_id: str) -> Project:
        if not re.fullmatch(r"[0-9a-f]{16}", project_id or ""):
            raise ApiError(404, "unknown_project", f"no project {project_id!r}")
        with self._lock:
            project = self._projects.get(project_id)
            if project is None:
                project = Project.load(self.root, project_id)
                if project is None:
                    raise ApiError(404, "unknown_project", f"no project {project_id!r}")
                self._projects[project_id] = project
            return project

    def close(self) -> None:
        with self._lock:
            for project in self._projects.values():
                project.close()
            self._projects.clear()


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "screenloop/0.1"

    # -- plumbing -------------------------------------------------------------

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:
            super().log_message(fmt, *args)

    def _send(self, status: int, body: bytes, content_type: str) -> None:
        self.send_response(status)
        self.send_header("X-Screenloop-Api", API_SCHEMA_VERSION)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_json(self, status: int, obj) -> None:
        self._send(status, json.dumps(obj).encode("utf-8"), "application/json; charset=utf-8")

    def _send_no_content(self) -> None:
        self.send_response(204)
        self.send_header("X-Screenloop-Api", API_SCHEMA_VERSION)
        self.send_header("Content-Length", "0")
        self.end_headers()

    def _send_api_error(self, err: ApiError) -> None:
        self._send_json(
            err.status,
            {"error_code": err.error_code, "message": str(err), "detail": err.detail},
        )

    def _body(self) -> bytes:
        length = int(self.headers.get("Content-Length", "0") or 0)
        return self.rfile.read(length) if length else b""

    def _json_body(self) -> dict:
        try:
            obj = json.loads(self._body().decode("utf-8") or "{}")
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ApiError(400, "bad_json", f"request body is not valid JSON: {exc}")
        if not isinstance(obj, dict):
            raise ApiError(400, "bad_json", "request body must be a JSON object")
        return obj

    def _split(self) -> tuple[list[str], dict[str, str]]:
        path, _, query_string = self.path.partition("?")
        query: dict[str, str] = {}
        for piece in query_string.split("&"):
            if piece:
                key, _, value = piece.partition("=")
                query[key] = _url_unquote(value)
        return [p for p in path.split("/") if p], query

    def _check_token(self) -> None:
        token = self.server.api_token
        if token and self.headers.get("X-Api-Token") != token:
            raise ApiError(401, "unauthorized", "missing or wrong API token")

    # -- routing ----------------------------------------------------------------

    def do_GET(self) -> None:
        self._route("GET")

    def do_POST(self) -> None:
        self._route("POST")

    def _route(self, method: str) -> None:
        try:
            parts, query = self._split()
            if parts[:1] == ["api"]:
                self._check_token()
                self._route_api(method, parts[1:], query)
            elif method == "GET":
                self._serve_static(parts)
            else:
                raise ApiError(404, "not_found", "unknown endpoint")
        except ApiError as err:
            self._send_api_error(err)
        except ScreenloopError as exc:
            self._send_api_error(ApiError(500, "internal_error", str(exc)))
        except (BrokenPipeError, ConnectionResetError):
            pass

    def _route_api(self, method: str, parts: list[str], query: dict) -> None:
        store: ProjectStore = self.server.store
        if parts == ["health"] and method == "GET":
            self._send_json(200, {"status": "ok"})
            return
        if parts == ["projects"] and method == "POST":
            body = self._json_body()
            name = (body.get("name") or "").strip()
            if not name:
                raise ApiError(400, "empty_name", "project name must be non-empty")
            project = store.create(name)
            self._send_json(201, {"project_id": project.project_id, "name": name})
            return
        if len(parts) == 3 and parts[0] == "projects":
            project = store.get(parts[1])
            self._dispatch_project(method, project, parts[2], query)
            return
        raise ApiError(404, "not_found", "unknown endpoint")

    def _dispatch_project(self, method: str, project: Project, action: str, query) -> None:
        if action == "dataset" and method == "POST":
            fmt = query.get("format")
            if fmt is not None and fmt not in ("csv", "ris"):
                raise ApiError(400, "bad_format", "format must be csv or ris")
            self._send_json(200, project.set_dataset(self._body(), fmt))
            return
        if action == "search" and method == "GET":
            dataset = project._require_dataset()
            q = query.get("q", "")
            if not q.strip():
                raise ApiError(400, "empty_query", "q must be non-empty")
            k = _positive_int(query.get("k", "10"), "k")
            labeled = project.engine.labels if project.engine else {}
            results = []
            for row_id in corpus.search_records(dataset, q, k):
                record = dataset.records[row_id]
                results.append({
                    "row_id": row_id,
                    "title": record.title,
                    "abstract_snippet": record.abstract[:240],
                    "labeled": row_id in labeled,
                })
            self._send_json(200, {"results": results})
            return
        if action == "suggest" and method == "GET":
            k = _positive_int(query.get("k", "5"), "k")
            dataset = project._require_dataset()
            rows = []
            for row_id in project.suggest_rows(k):
                record = dataset.records[row_id]
                rows.append({
                    "row_id": row_id,
                    "title": record.title,
                    "abstract_snippet": record.abstract[:240],
                })
            self._send_json(200, {"results": rows})
            return
        if action == "priors" and method == "POST":
            body = self._json_body()
            project.set_priors(body.get("included") or [], body.get("excluded") or [])
            self._send_json(200, project.progress())
            return
        if action == "next" and method == "GET":
            engine = project._require_engine()
            try:
                row_id = engine.next_record()
            except ScreenloopError:  # PoolExhausted or Stopped
                self._send_no_content()
                return
            record = project.dataset.records[row_id]
            self._send_json(200, {
                "row_id": row_id,
                "title": record.title,
                "abstract": record.abstract,
                "model_version": engine.model_version,
            })
            return
        if action == "labels" and method == "POST":
            body = self._json_body()
            row_id = body.get("row_id")
            label = body.get("label")
            if not isinstance(row_id, int) or label not in (0, 1):
                raise ApiError(400, "bad_request", "need integer row_id and label 0|1")
            project._require_engine()
            project.label(row_id, label)
            self._send_json(200, project.progress())
            return
        if action == "progress" and method == "GET":
            self._send_json(200, project.progress())
            return
        if action == "export" and method == "GET":
            fmt = query.get("format", "csv").lower()
            if fmt not in ("csv", "ris"):
                raise ApiError(400, "bad_format", f"unsupported export format {fmt!r}")
            with project.lock:
                if project.engine is not None:
                    payload = project.engine.export_results(fmt)
                else:
                    dataset = project._require_dataset()
                    writer = corpus.write_csv if fmt == "csv" else corpus.write_ris
                    payload = writer(dataset.records)
            content_type = (
                "text/csv; charset=utf-8"
                if fmt == "csv"
                else "application/x-research-info-systems"
            )
            self._send(200, payload, content_type)
            return
        raise ApiError(404, "not_found", "unknown endpoint")

    # -- static UI -----------------------------------------------------------------

    def _serve_static(self, parts: list[str]) -> None:
        ui_dir: Path | None = self.server.ui_dir
        if ui_dir is None:
            self._send(200, PLACEHOLDER_INDEX.encode("utf-8"), "text/html; charset=utf-8")
            return
        name = "/".join(parts) or "index.html"
        target = (ui_dir / name).resolve()
        if not str(target).startswith(str(ui_dir.resolve())) or not target.is_file():
            if name != "index.html" and (ui_dir / "index.html").is_file():
                target = ui_dir / "index.html"  # SPA fallback
            else:
                raise ApiError(404, "not_found", f"no such file {name!r}")
        content_type = CONTENT_TYPES.get(target.suffix.lower(), "application/octet-stream")
        self._send(200, target.read_bytes(), content_type)


def _url_unquote(value: str) -> str:
    from urllib.parse import unquote_plus

    return unquote_plus(value)


def _positive_int(value: str, name: str) -> int:
    try:
        number = int(value)
    except ValueError:
        raise ApiError(400, "bad_request", f"{name} must be an integer") from None
    if number < 1:
        raise ApiError(400, "bad_request", f"{name} must be >= 1")
    return number


class ScreenloopServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, store: ProjectStore, ui_dir: Path | None,
                 verbose: bool = False):
        super().__init__(address, _Handler)
        self.store = store
        self.ui_dir = ui_dir
        self.verbose = verbose
        host = address[0]
        self.api_token = (
            os.environ.get("SCREENLOOP_API_TOKEN") if host not in _LOOPBACK else None
        )

    def shutdown_service(self) -> None:
        self.store.close()
        self.server_close()


def create_server(host: str, port: int, data_dir: Path,
                  ui_dir: Path | None = None, verbose: bool = False) -> ScreenloopServer:
    """Bind and return the server (call serve_forever to run it)."""
    store = ProjectStore(data_dir)
    return ScreenloopServer((host, port), store, ui_dir, verbose=verbose)
