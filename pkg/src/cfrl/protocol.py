"""JSON-lines wire protocol for external predictors.

One UTF-8 JSON object per line, over TCP or a child process's stdio:

    -> {"type": "info"}
    <- {"type": "info", "task": "classification", "n_features": 8, "n_classes": 2}
    -> {"type": "predict", "x": [0.1, 0.2]}
    <- {"type": "prediction", "y": 1}
    -> {"type": "predict_batch", "X": [[...], [...]]}
    <- {"type": "prediction_batch", "y": [0, 1]}
    <- {"type": "error", "message": "..."}      on any failure

Unknown fields are ignored; unknown types get an error reply. One request
is in flight per connection at a time.
"""

from __future__ import annotations

import json
import select
import shlex
import socket
import subprocess

import numpy as np

from .errors import ConfigError, TransportError

DEFAULT_TIMEOUT = 5.0


class _LineChannel:
    """Request/reply line transport over a socket or a child process."""

    def __init__(self, read_fd, write_fh, timeout, closer):
        self._read_fd = read_fd
        self._write_fh = write_fh
        self._timeout = timeout
        self._closer = closer
        self._buf = b""

    def send_line(self, text: str) -> None:
        try:
            self._write_fh.write(text.encode("utf-8") + b"\n")
            self._write_fh.flush()
        except (BrokenPipeError, OSError) as exc:
            raise TransportError(f"connection lost while sending: {exc}") from exc

    def recv_line(self) -> str:
        import os

        while b"\n" not in self._buf:
            ready, _, _ = select.select([self._read_fd], [], [], self._timeout)
            if not ready:
                raise TransportError(f"timed out after {self._timeout}s waiting for reply")
            try:
                if isinstance(self._read_fd, socket.socket):
                    chunk = self._read_fd.recv(65536)
                else:
                    # raw fd read: returns whatever is available, never
                    # blocks for a full buffer like BufferedReader.read
                    chunk = os.read(self._read_fd, 65536)
            except OSError as exc:
                raise TransportError(f"connection lost while reading: {exc}") from exc
            if not chunk:
                raise TransportError("connection closed by remote predictor")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line.decode("utf-8")

    def close(self) -> None:
        self._closer()


class RemotePredictor:
    """Handle backed by an external process or TCP endpoint speaking the
    protocol above. The handshake fixes task, n_features and n_classes."""

    def __init__(self, channel: _LineChannel):
        self._channel = channel
        info = self._request({"type": "info"})
        if info.get("type") != "info":
            raise TransportError(f"handshake returned {info.get('type')!r}, expected 'info'")
        try:
            self.task = info["task"]
            self.n_features = int(info["n_features"])
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed handshake reply: {info}") from exc
        if self.task not in ("classification", "regression"):
            raise TransportError(f"handshake reported unknown task {self.task!r}")
        self.n_classes = int(info["n_classes"]) if self.task == "classification" else None

    def _request(self, obj: dict) -> dict:
        self._channel.send_line(json.dumps(obj))
        line = self._channel.recv_line()
        try:
            reply = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TransportError(f"remote sent invalid JSON: {line[:200]!r}") from exc
        if not isinstance(reply, dict):
            raise TransportError(f"remote sent a non-object reply: {line[:200]!r}")
        if reply.get("type") == "error":
            raise TransportError(f"remote predictor error: {reply.get('message', '?')}")
        return reply

    def predict(self, x):
        reply = self._request({"type": "predict", "x": np.asarray(x, dtype=float).tolist()})
        if reply.get("type") != "prediction" or "y" not in reply:
            raise TransportError(f"unexpected predict reply: {reply}")
        y = reply["y"]
        return int(y) if self.task == "classification" else float(y)

    def predict_batch(self, X):
        X = np.asarray(X, dtype=float)
        reply = self._request({"type": "predict_batch", "X": X.tolist()})
        if reply.get("type") != "prediction_batch" or "y" not in reply:
            raise TransportError(f"unexpected batch reply: {reply}")
        y = np.asarray(reply["y"])
        if len(y) != len(X):
            raise TransportError(f"batch reply has {len(y)} values for {len(X)} inputs")
        return y.astype(np.int64) if self.task == "classification" else y.astype(np.float64)

    def close(self) -> None:
        self._channel.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def connect_tcp(host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> RemotePredictor:
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
    sock.setblocking(False)
    writer = sock.makefile("wb")
    return RemotePredictor(_LineChannel(sock, writer, timeout, sock.close))


def spawn(command, timeout: float = DEFAULT_TIMEOUT) -> RemotePredictor:
    """Start a child process serving the protocol on its stdio."""
    argv = shlex.split(command) if isinstance(command, str) else list(command)
    try:
        proc = subprocess.Popen(argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE)
    except OSError as exc:
        raise TransportError(f"cannot start predictor process {argv!r}: {exc}") from exc

    def _close():
        proc.stdin.close()
        proc.stdout.close()
        proc.wait(timeout=5)

    return RemotePredictor(_LineChannel(proc.stdout.fileno(), proc.stdin, timeout, _close))


def connect_external(endpoint, schema=None, timeout: float = DEFAULT_TIMEOUT) -> RemotePredictor:
    """Endpoint is 'host:port' or a command line (string or argv list).
    When a schema is given, the handshake is validated against it."""
    if isinstance(endpoint, str) and ":" in endpoint and " " not in endpoint:
        host, _, port = endpoint.rpartition(":")
        try:
            handle = connect_tcp(host, int(port), timeout)
        except ValueError as exc:
            raise ConfigError(f"bad endpoint {endpoint!r}: {exc}") from exc
    else:
        handle = spawn(endpoint, timeout)
    if schema is not None:
        from .predictor import check_schema

        try:
            check_schema(handle, schema)
        except ConfigError:
            handle.close()
            raise
    return handle


def serve(handle, rstream, wstream) -> None:
    """Answer protocol requests on a pair of byte streams until EOF. Bad
    lines produce error replies; the loop never raises on request content."""

    def reply(obj):
        wstream.write((json.dumps(obj) + "\n").encode("utf-8"))
        wstream.flush()

    for raw in rstream:
        line = raw.decode("utf-8", errors="replace").strip()
        if not line:
            continue
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict):
                raise ValueError("request must be a JSON object")
            kind = msg.get("type")
            if kind == "info":
                info = {"type": "info", "task": handle.task, "n_features": handle.n_features}
                if handle.task == "classification":
                    info["n_classes"] = handle.n_classes
                reply(info)
            elif kind == "predict":
                x = np.asarray(msg["x"], dtype=float)
                if x.ndim != 1 or len(x) != handle.n_features:
                    raise ValueError(f"predict expects {handle.n_features} features")
                y = handle.predict(x)
                reply({"type": "prediction", "y": int(y) if handle.task == "classification" else float(y)})
            elif kind == "predict_batch":
                X = np.asarray(msg["X"], dtype=float)
                if X.ndim != 2 or X.shape[1] != handle.n_features:
                    raise ValueError(f"predict_batch expects rows of {handle.n_features} features")
                ys = handle.predict_batch(X)
                out = [int(v) for v in ys] if handle.task == "classification" else [float(v) for v in ys]
                reply({"type": "prediction_batch", "y": out})
            else:
                raise ValueError(f"unknown request type {kind!r}")
        except Exception as exc:  # per-request containment, loop must survive
            try:
                reply({"type": "error", "message": str(exc)})
            except (BrokenPipeError, OSError):
                return


def serve_stdio(handle) -> None:
    import sys

    serve(handle, sys.stdin.buffer, sys.stdout.buffer)


class TcpServer:
    """TCP front for a handle, one thread per connection. ``port=0`` binds
    an ephemeral port exposed as ``.port``."""

    def __init__(self, handle, port: int = 0, host: str = "127.0.0.1"):
        import threading

        self._handle = handle
        self._server = socket.create_server((host, port))
        self._server.settimeout(0.2)
        self.host = host
        self.port = self._server.getsockname()[1]
        self._stop = threading.Event()
        self._thread = None

    def _conn_loop(self, conn):
        with conn:
            serve(self._handle, conn.makefile("rb"), conn.makefile("wb"))

    def serve_forever(self) -> None:
        import threading

        while not self._stop.is_set():
            try:
                conn, _ = self._server.accept()
            except socket.timeout:
                continue
            except OSError:
                break
            threading.Thread(target=self._conn_loop, args=(conn,), daemon=True).start()

    def start_background(self) -> "TcpServer":
        import threading

        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        self._server.close()
        if self._thread is not None:
            self._thread.join(timeout=2)
