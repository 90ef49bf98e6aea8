"""Newline-delimited JSON client for external embedding/scoring providers.

One JSON object per line, responses strictly in request order, over either
a spawned stdio subprocess or a TCP socket:

    -> {"op":"info"}                          <- {"name":..,"dim":..,"normalizes":..}
    -> {"op":"embed","texts":[..]}            <- {"vectors":[[..],..]}
    -> {"op":"score","pairs":[[q,d],..]}      <- {"scores":[..]}
    error responses:                          <- {"error": "..."}

A connection is a serial request/response channel; concurrent callers are
serialized through a lock.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import threading
from typing import Sequence

from .densevec import ProviderInfo, ProviderUnavailable


class WireProtocolError(ProviderUnavailable):
    """The provider answered with an {"error": ...} line."""


class WireProvider:
    """Client for one provider connection (stdio subprocess or TCP)."""

    def __init__(
        self,
        reader,
        writer,
        proc: subprocess.Popen | None = None,
        sock: socket.socket | None = None,
    ) -> None:
        self._reader = reader
        self._writer = writer
        self._proc = proc
        self._sock = sock
        self._lock = threading.Lock()
        self._info: ProviderInfo | None = None

    @classmethod
    def spawn(cls, command: str | Sequence[str]) -> "WireProvider":
        """Start a provider subprocess and talk NDJSON over its stdio."""
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ProviderUnavailable(f"cannot spawn provider {argv[0]!r}: {exc}") from exc
        return cls(reader=proc.stdout, writer=proc.stdin, proc=proc)

    @classmethod
    def connect_tcp(cls, host: str, port: int, timeout: float = 30.0) -> "WireProvider":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ProviderUnavailable(f"cannot connect to {host}:{port}: {exc}") from exc
        stream = sock.makefile("rw", encoding="utf-8", newline="\n")
        return cls(reader=stream, writer=stream, sock=sock)

    @classmethod
    def from_address(cls, address: str) -> "WireProvider":
        """Parse "tcp:HOST:PORT", "HOST:PORT" or "stdio:COMMAND ..."."""
        if address.startswith("stdio:"):
            return cls.spawn(address[len("stdio:") :])
        rest = address[len("tcp:") :] if address.startswith("tcp:") else address
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad provider address {address!r}")
        return cls.connect_tcp(host, int(port))

    def _request(self, payload: dict) -> dict:
        line = json.dumps(payload, ensure_ascii=False)
        with self._lock:
            try:
                self._writer.write(line + "\n")
                self._writer.flush()
                answer = self._reader.readline()
            except (OSError, ValueError) as exc:
                raise ProviderUnavailable(f"provider connection failed: {exc}") from exc
        if not answer:
            raise ProviderUnavailable("provider closed the connection")
        try:
            obj = json.loads(answer)
        except json.JSONDecodeError as exc:
            raise ProviderUnavailable(f"provider sent invalid JSON: {answer!r}") from exc
        if not isinstance(obj, dict):
            raise ProviderUnavailable(f"provider sent a non-object response: {obj!r}")
        if "error" in obj:
            raise WireProtocolError(str(obj["error"]))
        return obj

    def info(self) -> ProviderInfo:
        if self._info is None:
            obj = self._request({"op": "info"})
            self._info = ProviderInfo(
                name=str(obj["name"]), dim=int(obj["dim"]), normalizes=bool(obj["normalizes"])
            )
        return self._info

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        obj = self._request({"op": "embed", "texts": list(texts)})
        return [[float(x) for x in vector] for vector in obj["vectors"]]

    def score(self, pairs: Sequence[tuple[str, str]]) -> list[float]:
        obj = self._request({"op": "score", "pairs": [[a, b] for a, b in pairs]})
        return [float(x) for x in obj["scores"]]

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
            self._proc.terminate()
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()

    def __enter__(self) -> "WireProvider":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
