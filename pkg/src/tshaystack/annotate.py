"""Chain-of-thought rationales from a chat-completion endpoint.

The request carries the sample's ground truth (timeline, needle boundaries, gold answer)
so the service explains a known answer instead of solving the question blind.
"""

from __future__ import annotations

import base64
import json
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import httpx
import numpy as np

from .qa.clock import format_clock
from .qa.plotting import render_plot
from .qa.prompts import timeline_lines


class AnnotateError(RuntimeError):
    pass


class AnnotateConfigError(AnnotateError):
    """Bad or incomplete client configuration, raised before any network traffic."""


class TransportError(AnnotateError):
    """The endpoint could not be reached after all attempts."""


class RateLimitError(AnnotateError):
    """The endpoint kept answering 429 until attempts ran out."""


class ServiceError(AnnotateError):
    def __init__(self, status: int, body: str):
        super().__init__(f"endpoint returned HTTP {status}: {body[:200]}")
        self.status = status


class EmptyCompletion(AnnotateError):
    pass


@dataclass(frozen=True)
class AnnotationRequest:
    sample_id: str
    prompt: str
    plot_svg: bytes | None = None


@dataclass
class ClientConfig:
    endpoint: str
    model: str
    api_key_env: str = "TSHAYSTACK_API_KEY"
    requests_per_second: float = 1.0
    max_attempts: int = 3
    backoff_s: float = 1.0
    timeout_s: float = 60.0
    concurrency: int = 1
    accepts_images: bool = False
    audit_log: str | None = None

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise AnnotateConfigError(f"credential environment variable {self.api_key_env} is not set")
        return key

    def check(self) -> None:
        if not self.endpoint.startswith(("http://", "https://")):
            raise AnnotateConfigError(f"endpoint must be an http(s) URL, got {self.endpoint!r}")
        if not self.model:
            raise AnnotateConfigError("model name is empty")
        if self.requests_per_second <= 0 or self.max_attempts < 1 or self.concurrency < 1:
            raise AnnotateConfigError("rate limit, attempts and concurrency must be positive")
        self.api_key()


def _stats(series: np.ndarray) -> list[str]:
    return [
        f"{axis}: mean {ch.mean():.4f}, variance {ch.var():.6f}"
        for axis, ch in zip("xyz", np.asarray(series, dtype=np.float64))
    ]


def build_cot_request(record: Mapping[str, Any], series: np.ndarray, with_plot: bool = False) -> AnnotationRequest:
    start = int(record["start_clock_ms"])
    rate = float(record["rate"])
    bounds = [
        f"{n['class']}: {format_clock(start + int(round(n['start'] * 1000 / rate)))}"
        f" to {format_clock(start + int(round(n['end'] * 1000 / rate)))}"
        for n in record.get("needles", [])
    ]
    parts = [
        "Write a short step-by-step explanation of how the accelerometer signal supports the given answer.",
        "Refer to visible signal changes, not to this metadata. Finish with the line 'Answer: <answer>'.",
        "",
        "Activity timeline:",
        *timeline_lines(record),
        "",
        "Inserted bout boundaries:",
        *(bounds or ["none"]),
        "",
        "Per-axis statistics:",
        *_stats(series),
        "",
        f"Question: {record['question']}",
        f"Correct answer: {record['answer_text']}",
    ]
    plot = render_plot(series, rate, start, str(record["id"])) if with_plot else None
    return AnnotationRequest(str(record["id"]), "\n".join(parts), plot)


def openai_style_body(req: AnnotationRequest, cfg: ClientConfig) -> dict[str, Any]:
    content: Any = req.prompt
    if req.plot_svg is not None and cfg.accepts_images:
        url = "data:image/svg+xml;base64," + base64.b64encode(req.plot_svg).decode()
        content = [{"type": "text", "text": req.prompt}, {"type": "image_url", "image_url": {"url": url}}]
    return {"model": cfg.model, "messages": [{"role": "user", "content": content}]}


def openai_style_text(payload: Mapping[str, Any]) -> str:
    try:
        return str(payload["choices"][0]["message"]["content"] or "")
    except (KeyError, IndexError, TypeError):
        return ""


class RateLimiter:
    def __init__(self, per_second: float, clock: Callable[[], float] = time.monotonic, sleep=time.sleep):
        self.interval = 1.0 / per_second
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock, self._sleep = clock, sleep

    def wait(self) -> None:
        with self._lock:
            now = self._clock()
            delay = self._next - now
            self._next = max(now, self._next) + self.interval
        if delay > 0:
            self._sleep(delay)


class AuditLog:
    def __init__(self, path: str | Path | None, secret: str = ""):
        self.path = Path(path) if path else None
        self.secret = secret
        self._lock = threading.Lock()

    def redact(self, text: str) -> str:
        return text.replace(self.secret, "***") if self.secret else text

    def write(self, **entry: Any) -> None:
        if self.path is None:
            return
        line = self.redact(json.dumps(entry, sort_keys=True))
        with self._lock, self.path.open("a") as fh:
            fh.write(line + "\n")


@dataclass
class RationaleClient:
    cfg: ClientConfig
    body: Callable[[AnnotationRequest, ClientConfig], dict] = openai_style_body
    text: Callable[[Mapping[str, Any]], str] = openai_style_text
    transport: httpx.BaseTransport | None = None
    sleep: Callable[[float], None] = time.sleep
    _limiter: RateLimiter = field(init=False)

    def __post_init__(self) -> None:
        self.cfg.check()
        self._key = self.cfg.api_key()
        self._limiter = RateLimiter(self.cfg.requests_per_second, sleep=self.sleep)
        self._audit = AuditLog(self.cfg.audit_log, self._key)
        self._http = httpx.Client(timeout=self.cfg.timeout_s, transport=self.transport)

    def close(self) -> None:
        self._http.close()

    def request_rationale(self, req: AnnotationRequest) -> str:
        headers = {"Authorization": f"Bearer {self._key}", "Content-Type": "application/json"}
        body = self.body(req, self.cfg)
        last: AnnotateError | None = None
        for attempt in range(1, self.cfg.max_attempts + 1):
            if attempt > 1:
                self.sleep(self.cfg.backoff_s * 2 ** (attempt - 2))
            self._limiter.wait()
            try:
                resp = self._http.post(self.cfg.endpoint, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last = TransportError(f"{type(exc).__name__}: {exc}")
                self._audit.write(sample_id=req.sample_id, attempt=attempt, url=self.cfg.endpoint, error=str(last), headers={"Authorization": "Bearer ***"})
                continue
            self._audit.write(sample_id=req.sample_id, attempt=attempt, url=self.cfg.endpoint, status=resp.status_code, response=resp.text[:2000], headers={"Authorization": "Bearer ***"})
            if resp.status_code == 429:
                last = RateLimitError(f"rate limited on {self.cfg.max_attempts} attempts")
                continue
            if resp.status_code >= 500:
                last = ServiceError(resp.status_code, resp.text)
                continue
            if resp.status_code >= 300:
                raise ServiceError(resp.status_code, resp.text)
            try:
                text = self.text(resp.json()).strip()
            except ValueError:
                raise ServiceError(resp.status_code, "response is not JSON") from None
            if not text:
                raise EmptyCompletion(f"{req.sample_id}: endpoint returned an empty completion")
            return text
        assert last is not None
        raise last


def _atomic_write(path: Path, data: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}.{threading.get_ident()}")
    tmp.write_text(data)
    os.replace(tmp, path)


def annotate_records(
    records: list[dict[str, Any]],
    load_series: Callable[[Mapping[str, Any]], np.ndarray],
    client: RationaleClient,
    work_dir: str | Path,
    force: bool = False,
) -> dict[str, str]:
    """Fill ``rationale`` on each record; returns sample id → error message for failures.

    Each rationale is first written atomically to ``work_dir/<id>.txt``; a rerun reuses
    those files and skips records that already have a rationale unless ``force`` is set.
    A failed sample's record is left exactly as it was.
    """
    work = Path(work_dir)
    work.mkdir(parents=True, exist_ok=True)
    errors: dict[str, str] = {}

    def one(rec: dict[str, Any]) -> tuple[str, str | None, str | None]:
        sid = rec["id"]
        side = work / f"{sid}.txt"
        if not force and rec.get("rationale"):
            return sid, rec["rationale"], None
        if not force and side.exists():
            return sid, side.read_text(), None
        try:
            req = build_cot_request(rec, load_series(rec), with_plot=client.cfg.accepts_images)
            text = client.request_rationale(req)
        except AnnotateError as exc:
            return sid, None, f"{type(exc).__name__}: {exc}"
        _atomic_write(side, text)
        return sid, text, None

    with ThreadPoolExecutor(max_workers=client.cfg.concurrency) as pool:
        results = list(pool.map(one, records))
    for rec, (sid, text, err) in zip(records, results):
        if err is not None:
            errors[sid] = err
        elif text is not None:
            rec["rationale"] = text
    return errors


def load_client_config(section: Mapping[str, Any]) -> ClientConfig:
    known = set(ClientConfig.__dataclass_fields__)
    unknown = set(section) - known
    if unknown:
        raise AnnotateConfigError(f"unknown annotate keys {sorted(unknown)}")
    if "endpoint" not in section or "model" not in section:
        raise AnnotateConfigError("annotate config needs 'endpoint' and 'model'")
    return ClientConfig(**section)

