"""Client side of the external scorer bridge.

The wire protocol is one JSON object per line over a byte stream (child
process stdio or a TCP socket). The client sends a hello first, then one
request at a time per session; responses are matched by the echoed id.
Every response row is validated here: length, finiteness, and log-domain
normalization within 1e-6. Violations raise ScorerError with the raw
payload attached, so a misbehaving server is never silently trusted.

    {"id":1,"op":"hello","vocab_size":5}        -> {"id":1,"ok":true}
    {"id":2,"op":"score_next","prefix":[2,1],"frame_limit":7}
                                                -> {"id":2,"logp":[...]}
    {"id":3,"op":"cmlm_predict","slots":[2,-1]} -> {"id":3,"logp":[[...]]}
"""

from __future__ import annotations

import json
import queue
import shlex
import socket
import subprocess
import threading
from typing import Sequence

import numpy as np

from .lattice import Transcript
from .scorers import ScorerError

LOG_NORM_TOL = 1e-6
DEFAULT_TIMEOUT_S = 30.0


class BridgeScorer:
    """Adapts a protocol endpoint to the in-process scorer interfaces.

    Implements both ``score_next`` and ``predict``; a server may answer
    either op or both. Use as a context manager or call ``close``.
    """

    def __init__(self, num_tokens: int, *, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.num_tokens = num_tokens
        self.timeout_s = timeout_s
        self._lock = threading.Lock()
        self._next_id = 0
        self._lines: queue.Queue[str | None] = queue.Queue()
        self.requests_sent = 0
        self.id_mismatches = 0

    # transport hooks
    def _send_line(self, line: str) -> None:
        raise NotImplementedError

    def _start_reader(self, stream) -> None:
        def pump():
            try:
                for line in stream:
                    self._lines.put(line)
            except Exception:
                pass
            finally:
                self._lines.put(None)

        self._reader = threading.Thread(target=pump, daemon=True)
        self._reader.start()

    def _handshake(self) -> None:
        reply = self._request({"op": "hello", "vocab_size": self.num_tokens})
        if reply.get("ok") is not True:
            raise ScorerError(f"handshake rejected: {reply!r}", payload=reply)

    def _request(self, message: dict) -> dict:
        with self._lock:
            self._next_id += 1
            message = {"id": self._next_id, **message}
            try:
                self._send_line(json.dumps(message))
            except Exception as exc:
                raise ScorerError(f"bridge write failed: {exc}", payload=message) from exc
            self.requests_sent += 1
            try:
                line = self._lines.get(timeout=self.timeout_s)
            except queue.Empty:
                raise ScorerError(
                    f"scorer timed out after {self.timeout_s}s", payload=message
                ) from None
            if line is None:
                raise ScorerError("scorer endpoint closed the stream", payload=message)
            try:
                reply = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScorerError(f"malformed response: {exc}", payload=line) from exc
            if "id" in reply and reply["id"] != message["id"]:
                self.id_mismatches += 1
                raise ScorerError(
                    f"response id {reply['id']} does not match request {message['id']}",
                    payload=line,
                )
            if "error" in reply:
                raise ScorerError(f"scorer error: {reply['error']}", payload=line)
            return reply

    def _check_row(self, row, size: int, payload) -> np.ndarray:
        arr = np.asarray(row, dtype=np.float64)
        if arr.shape != (size,):
            raise ScorerError(f"row has shape {arr.shape}, expected ({size},)", payload=payload)
        if np.isnan(arr).any() or np.isposinf(arr).any():
            raise ScorerError("row contains nan or +inf", payload=payload)
        norm = float(np.logaddexp.reduce(arr))
        if abs(norm) > LOG_NORM_TOL:
            raise ScorerError(
                f"row is not normalized (log-sum {norm:+.3e})", payload=payload
            )
        return arr

    def score_next(self, prefix: Transcript, frame_limit: int) -> np.ndarray:
        reply = self._request(
            {"op": "score_next", "prefix": [int(i) for i in prefix], "frame_limit": int(frame_limit)}
        )
        if "logp" not in reply:
            raise ScorerError("response lacks 'logp'", prefix=prefix, payload=reply)
        return self._check_row(reply["logp"], self.num_tokens + 1, reply)

    def predict(self, slots: Sequence[int]) -> np.ndarray:
        reply = self._request({"op": "cmlm_predict", "slots": [int(s) for s in slots]})
        if "logp" not in reply:
            raise ScorerError("response lacks 'logp'", prefix=tuple(slots), payload=reply)
        rows = reply["logp"]
        n_masked = sum(1 for s in slots if s == -1)
        if not isinstance(rows, list) or len(rows) != n_masked:
            raise ScorerError(
                f"expected {n_masked} rows, got {len(rows) if isinstance(rows, list) else rows!r}",
                prefix=tuple(slots),
                payload=reply,
            )
        return np.asarray([self._check_row(r, self.num_tokens, reply) for r in rows]).reshape(
            n_masked, self.num_tokens
        )

    def close(self) -> None:
        raise NotImplementedError

    def __enter__(self) -> "BridgeScorer":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


class SubprocessScorer(BridgeScorer):
    """Bridge over a child process's stdin/stdout."""

    def __init__(self, command: Sequence[str] | str, num_tokens: int, *, timeout_s: float = DEFAULT_TIMEOUT_S):
        super().__init__(num_tokens, timeout_s=timeout_s)
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ScorerError(f"could not start scorer {argv!r}: {exc}") from exc
        self._start_reader(self._proc.stdout)
        self._handshake()

    def _send_line(self, line: str) -> None:
        assert self._proc.stdin is not None
        self._proc.stdin.write(line + "\n")
        self._proc.stdin.flush()

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._proc.stdin.close()
                self._proc.wait(timeout=0.5)
            except Exception:
                self._proc.kill()
                self._proc.wait()


class SocketScorer(BridgeScorer):
    """Bridge over a TCP connection."""

    def __init__(self, host: str, port: int, num_tokens: int, *, timeout_s: float = DEFAULT_TIMEOUT_S):
        super().__init__(num_tokens, timeout_s=timeout_s)
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout_s)
        except OSError as exc:
            raise ScorerError(f"could not connect to {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rw", encoding="utf-8", newline="\n")
        self._start_reader(self._file)
        self._handshake()

    def _send_line(self, line: str) -> None:
        self._file.write(line + "\n")
        self._file.flush()

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._file.close()
        except OSError:
            pass
        self._sock.close()


def bridge_serve(endpoint: str, num_tokens: int, *, timeout_s: float = DEFAULT_TIMEOUT_S) -> BridgeScorer:
    """Connect an endpoint spec: ``exec:CMD`` or ``tcp:HOST:PORT``."""
    if endpoint.startswith("exec:"):
        return SubprocessScorer(endpoint[len("exec:") :], num_tokens, timeout_s=timeout_s)
    if endpoint.startswith("tcp:"):
        host, _, port = endpoint[len("tcp:") :].rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp endpoint {endpoint!r}, expected tcp:HOST:PORT")
        return SocketScorer(host, int(port), num_tokens, timeout_s=timeout_s)
    raise ValueError(f"unknown bridge endpoint {endpoint!r}")
