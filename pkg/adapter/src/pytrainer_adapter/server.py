"""Stdio protocol server: newline-delimited JSON requests, one reply per line.

Commands: init, train_stage, score, reset, shutdown.  Unknown fields in a
request are ignored; an unknown command or malformed line gets an
``{"ok": false, "error": ...}`` reply and the server keeps serving.
"""

from __future__ import annotations

import json
import sys
from typing import IO

from .model import HashedLogisticModel, IncrementalModel

SUPPORTED_PROTOCOL = 1
NAME = "pytrainer-adapter"


class _Shutdown(Exception):
    pass


class ProtocolServer:
    def __init__(self, model_class: type[IncrementalModel] = HashedLogisticModel):
        self._model_class = model_class
        self._model: IncrementalModel | None = None

    def _handle_init(self, msg: dict) -> dict:
        protocol = msg.get("protocol")
        if protocol != SUPPORTED_PROTOCOL:
            raise ValueError(f"unsupported protocol version: {protocol!r}")
        self._model = self._model_class(msg.get("config", {}), msg.get("seed", 0))
        return {"ok": True, "name": NAME}

    def _require_model(self) -> IncrementalModel:
        if self._model is None:
            raise ValueError("not initialized; send init first")
        return self._model

    def handle(self, msg: dict) -> dict:
        cmd = msg.get("cmd")
        if cmd == "init":
            return self._handle_init(msg)
        if cmd == "train_stage":
            examples = [
                (ex["text"], int(ex["label"])) for ex in msg.get("examples", [])
            ]
            self._require_model().train_stage(examples)
            return {"ok": True}
        if cmd == "score":
            scores = self._require_model().score(list(msg.get("texts", [])))
            return {"ok": True, "scores": scores}
        if cmd == "reset":
            self._require_model().reset()
            return {"ok": True}
        if cmd == "shutdown":
            raise _Shutdown
        raise ValueError(f"unknown cmd: {cmd!r}")

    def serve(self, stdin: IO[str], stdout: IO[str]) -> int:
        """Serve until shutdown or EOF; exactly one reply line per request."""

        def respond(obj: dict) -> None:
            stdout.write(json.dumps(obj, ensure_ascii=False) + "\n")
            stdout.flush()

        for line in stdin:
            if not line.strip():
                continue
            try:
                msg = json.loads(line)
                if not isinstance(msg, dict):
                    raise ValueError("request is not a JSON object")
                respond(self.handle(msg))
            except _Shutdown:
                respond({"ok": True})
                return 0
            except BrokenPipeError:
                return 1
            except Exception as exc:  # malformed input must not kill the server
                try:
                    respond({"ok": False, "error": str(exc)})
                except BrokenPipeError:
                    return 1
        return 0


def main() -> int:
    return ProtocolServer().serve(sys.stdin, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
