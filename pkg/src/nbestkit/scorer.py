"""Client side of the newline-delimited JSON scoring protocols.

A scorer is an external process (or TCP service) that announces itself
with one handshake line and then answers request lines with response
lines, in any order and with any internal batching:

    handshake  {"protocol": "scorer/1", "name": ..., "needs_reference": ...}
    request    {"id": <int>, "src": ..., "mt": ..., "ref": <str or null>}
    response   {"id": <int>, "score": <finite number>}

The client owns a reader thread per connection, so callers may share a
handle across threads and pipeline batches; writes are serialized
internally. Scores are memoized process-wide by (scorer name, src, mt,
ref) — repeated triples cost one wire round-trip per process lifetime.
"""

from __future__ import annotations

import json
import math
import shlex
import socket
import subprocess
import threading
import time
from dataclasses import dataclass
from typing import Any, Sequence


class ScorerProtocolError(RuntimeError):
    """Handshake or response line violated the wire protocol."""


class ScorerTransportError(RuntimeError):
    """The underlying pipe/socket failed or timed out."""


@dataclass(frozen=True)
class ScoreRequest:
    id: int
    src: str
    mt: str
    ref: str | None = None


_SCORE_CACHE: dict[tuple[str, str, str, str | None], float] = {}
_CACHE_LOCK = threading.Lock()


def clear_score_cache() -> None:
    """Drop all memoized scores (test hook; values are idempotent)."""
    with _CACHE_LOCK:
        _SCORE_CACHE.clear()


class _Transport:
    """Byte-stream line transport over a subprocess or TCP connection."""

    def __init__(self, endpoint: str | Sequence[str], connect_timeout: float):
        self._proc: subprocess.Popen[bytes] | None = None
        self._sock: socket.socket | None = None
        if isinstance(endpoint, str) and endpoint.startswith("tcp://"):
            host, _, port = endpoint[len("tcp://") :].rpartition(":")
            self._sock = socket.create_connection((host, int(port)), timeout=connect_timeout)
            self._sock.settimeout(None)
            self._reader = self._sock.makefile("rb")
            self._writer = self._sock.makefile("wb")
        else:
            argv = shlex.split(endpoint) if isinstance(endpoint, str) else list(endpoint)
            self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
            assert self._proc.stdin is not None and self._proc.stdout is not None
            self._reader = self._proc.stdout
            self._writer = self._proc.stdin

    def send(self, data: str) -> None:
        self._writer.write(data.encode("utf-8"))
        self._writer.flush()

    def readline(self) -> bytes:
        return self._reader.readline()

    def close(self) -> None:
        for stream in (self._writer, self._reader):
            try:
                stream.close()
            except OSError:
                pass
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass
        if self._proc is not None:
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()


class LineProtocolClient:
    """Shared machinery for scorer/1-style request/response protocols."""

    def __init__(
        self,
        endpoint: str | Sequence[str],
        expected_protocol: str,
        handshake_timeout: float = 30.0,
        read_timeout: float = 30.0,
    ):
        self._read_timeout = read_timeout
        self._transport = _Transport(endpoint, connect_timeout=handshake_timeout)
        self._send_lock = threading.Lock()
        self._cond = threading.Condition()
        self._responses: dict[int, dict[str, Any]] = {}
        self._handshake: dict[str, Any] | None = None
        self._error: Exception | None = None
        self._closed = False
        self._next_id = 0
        self.wire_requests = 0
        self._thread = threading.Thread(target=self._read_loop, daemon=True)
        self._thread.start()
        handshake = self._await_handshake(handshake_timeout)
        got = handshake.get("protocol")
        if got != expected_protocol:
            self.close()
            raise ScorerProtocolError(f"expected protocol {expected_protocol!r}, got {got!r}")
        self.handshake = handshake

    def _read_loop(self) -> None:
        while True:
            try:
                raw = self._transport.readline()
            except (OSError, ValueError):
                raw = b""
            if not raw:
                with self._cond:
                    self._closed = True
                    self._cond.notify_all()
                return
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                with self._cond:
                    self._error = ScorerProtocolError(f"unparsable line from scorer: {line[:200]!r}")
                    self._cond.notify_all()
                return
            with self._cond:
                if self._handshake is None:
                    self._handshake = obj
                elif isinstance(obj, dict) and "id" in obj:
                    self._responses[obj["id"]] = obj
                else:
                    self._error = ScorerProtocolError(f"response without id: {line[:200]!r}")
                self._cond.notify_all()

    def _await_handshake(self, timeout: float) -> dict[str, Any]:
        with self._cond:
            ok = self._cond.wait_for(
                lambda: self._handshake is not None or self._closed or self._error is not None,
                timeout=timeout,
            )
            if self._error is not None:
                raise self._error
            if self._handshake is None:
                self.close()
                if not ok:
                    raise ScorerTransportError(f"no handshake within {timeout} s")
                raise ScorerTransportError("connection closed before handshake")
            return self._handshake

    def request_many(self, payloads: Sequence[dict[str, Any]]) -> list[dict[str, Any]]:
        """Send payloads (ids assigned here), block until all are answered.

        Responses may arrive in any order; the result is aligned to the
        payload order.
        """
        if not payloads:
            return []
        with self._send_lock:
            ids = list(range(self._next_id, self._next_id + len(payloads)))
            self._next_id += len(payloads)
            lines = []
            for wire_id, payload in zip(ids, payloads):
                lines.append(json.dumps({"id": wire_id, **payload}, ensure_ascii=False))
            try:
                self._transport.send("\n".join(lines) + "\n")
            except (OSError, ValueError) as exc:
                raise ScorerTransportError(f"failed to write requests: {exc}") from exc
            self.wire_requests += len(payloads)
        pending = set(ids)
        deadline = time.monotonic() + self._read_timeout
        with self._cond:
            while pending:
                pending -= self._responses.keys()
                if not pending:
                    break
                if self._error is not None:
                    raise self._error
                if self._closed:
                    raise ScorerTransportError(
                        f"connection closed with {len(pending)} unanswered request(s)"
                    )
                remaining = deadline - time.monotonic()
                if remaining <= 0 or not self._cond.wait(timeout=remaining):
                    raise ScorerTransportError(
                        f"no response for id(s) {sorted(pending)[:5]} within {self._read_timeout} s"
                    )
            return [self._responses.pop(i) for i in ids]

    def close(self) -> None:
        self._transport.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()


class ScorerHandle(LineProtocolClient):
    """Connected scorer with its declared capabilities."""

    def __init__(self, endpoint, handshake_timeout: float = 30.0, read_timeout: float = 30.0):
        super().__init__(endpoint, "scorer/1", handshake_timeout, read_timeout)
        name = self.handshake.get("name")
        needs_reference = self.handshake.get("needs_reference")
        if not isinstance(name, str) or not isinstance(needs_reference, bool):
            self.close()
            raise ScorerProtocolError("handshake must declare string 'name' and bool 'needs_reference'")
        self.name = name
        self.needs_reference = needs_reference

    def score_batch(self, requests: Sequence[ScoreRequest]) -> list[float]:
        """Score a batch, positionally aligned to the request order."""
        if not requests:
            return []
        seen_ids = set()
        for req in requests:
            if req.id in seen_ids:
                raise ValueError(f"duplicate request id {req.id} within batch")
            seen_ids.add(req.id)
            if self.needs_reference and req.ref is None:
                raise ValueError(f"scorer {self.name!r} needs a reference; request {req.id} has none")
        keys = [(self.name, r.src, r.mt, r.ref) for r in requests]
        with _CACHE_LOCK:
            missing: list[int] = []
            missing_keys = set()
            for pos, key in enumerate(keys):
                if key not in _SCORE_CACHE and key not in missing_keys:
                    missing.append(pos)
                    missing_keys.add(key)
        if missing:
            payloads = [
                {"src": requests[pos].src, "mt": requests[pos].mt, "ref": requests[pos].ref}
                for pos in missing
            ]
            responses = self.request_many(payloads)
            with _CACHE_LOCK:
                for pos, resp in zip(missing, responses):
                    score = resp.get("score")
                    if not isinstance(score, (int, float)) or isinstance(score, bool) or not math.isfinite(score):
                        raise ScorerProtocolError(
                            f"scorer {self.name!r} returned a non-finite or non-numeric score: {score!r}"
                        )
                    _SCORE_CACHE[keys[pos]] = float(score)
        with _CACHE_LOCK:
            return [_SCORE_CACHE[key] for key in keys]

    def score(self, src: str, mt: str, ref: str | None = None) -> float:
        return self.score_batch([ScoreRequest(id=0, src=src, mt=mt, ref=ref)])[0]


def scorer_connect(endpoint: str | Sequence[str], timeout: float = 30.0) -> ScorerHandle:
    """Spawn or dial a scorer and perform the scorer/1 handshake.

    ``endpoint`` is a subprocess command (argv list or shell-ish string)
    or a "tcp://host:port" address.
    """
    return ScorerHandle(endpoint, handshake_timeout=timeout)


def score_batch(handle: ScorerHandle, requests: Sequence[ScoreRequest]) -> list[float]:
    return handle.score_batch(requests)
