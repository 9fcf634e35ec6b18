"""Text bus-master protocol: one command line in, exactly one response line out.

Grammar: ``R <addr>``, ``W <addr> <data>``, ``?``, ``Q``; verbs are
case-insensitive, numbers are hex with or without a 0x prefix. Responses are
fixed strings (``0x`` + 8 hex digits, ``OK``, ``ERR <KIND>``) so scripted
sessions are portable across hosts. The serving loop is the sole owner of the
model for a session; a second concurrent connection is refused busy.
"""

from __future__ import annotations

import re
import selectors
import socket
from dataclasses import dataclass, field

from . import busmodel
from .busmodel import BusError, SocModel
from .script import RESP_OK, TestScript, format_word

HELP_LINE = "R <addr> | W <addr> <data> | ? (help) | Q (quit)"
BUSY_LINE = "ERR BUSY"

_ERR_KIND = {
    busmodel.ERR_UNMAPPED: "UNMAPPED",
    busmodel.ERR_MISALIGNED: "MISALIGNED",
    busmodel.ERR_XREAD: "XREAD",
}

_HEX_RE = re.compile(r"^(0[xX])?[0-9a-fA-F]+$")


class ParseError(Exception):
    def __init__(self, token: str):
        super().__init__(token)
        self.token = token


@dataclass(frozen=True)
class Command:
    op: str  # R | W | ? | Q
    addr: int | None = None
    data: int | None = None


def _parse_word(token: str) -> int:
    if not _HEX_RE.match(token):
        raise ParseError(token)
    value = int(token, 16)
    if value > 0xFFFFFFFF:
        raise ParseError(token)
    return value


def parse_command(line: str):
    """Command for a line, or None for a blank line. Raises ParseError."""
    text = line.strip()
    if not text:
        return None
    parts = re.split(r"[ \t]+", text)
    verb = parts[0].upper()
    if verb == "R":
        if len(parts) < 2:
            raise ParseError(text)
        if len(parts) > 2:
            raise ParseError(parts[2])
        return Command("R", addr=_parse_word(parts[1]))
    if verb == "W":
        if len(parts) < 3:
            raise ParseError(text)
        if len(parts) > 3:
            raise ParseError(parts[3])
        return Command("W", addr=_parse_word(parts[1]), data=_parse_word(parts[2]))
    if verb == "?":
        if len(parts) > 1:
            raise ParseError(parts[1])
        return Command("?")
    if verb == "Q":
        if len(parts) > 1:
            raise ParseError(parts[1])
        return Command("Q")
    raise ParseError(parts[0])


def execute(soc: SocModel, cmd: Command) -> str:
    """One response line per command; never raises."""
    if cmd.op == "R":
        result = busmodel.bus_read(soc, cmd.addr)
        if isinstance(result, BusError):
            return f"ERR {_ERR_KIND[result.kind]}"
        return format_word(result)
    if cmd.op == "W":
        result = busmodel.bus_write(soc, cmd.addr, cmd.data)
        if isinstance(result, BusError):
            return f"ERR {_ERR_KIND[result.kind]}"
        return RESP_OK
    if cmd.op == "?":
        return HELP_LINE
    return RESP_OK  # Q


def execute_line(soc: SocModel, line: str):
    """Response text for one raw line; None for blank lines."""
    try:
        cmd = parse_command(line)
    except ParseError as exc:
        return f"ERR PARSE {exc.token}"
    if cmd is None:
        return None
    return execute(soc, cmd)


# ---------------------------------------------------------------------------
# scripted runs

@dataclass(frozen=True)
class StepFailure:
    index: int
    command: str
    expected: str
    actual: str


@dataclass
class TestReport:
    __test__ = False  # keep pytest from collecting this as a test class

    total: int = 0
    passed: int = 0
    failures: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.passed == self.total


def run_script(soc: SocModel, script: TestScript, stop_on_fail: bool = False) -> TestReport:
    report = TestReport()
    for i, step in enumerate(script.steps):
        actual = execute_line(soc, step.command)
        actual = "" if actual is None else actual
        report.total += 1
        if actual == step.expected:
            report.passed += 1
        else:
            report.failures.append(StepFailure(i, step.command, step.expected, actual))
            if stop_on_fail:
                break
    return report


def format_report(report: TestReport) -> str:
    lines = [f"{report.passed}/{report.total} steps passed"]
    for f in report.failures:
        lines.append(f"step {f.index}: {f.command} -> expected {f.expected!r}, got {f.actual!r}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# interactive serving

@dataclass
class SessionSummary:
    lines: int = 0
    responses: int = 0
    sessions: int = 0
    quit_seen: bool = False


def serve(soc: SocModel, rfile, wfile, prompt: bool = False) -> SessionSummary:
    """Line loop over byte streams; ends on Q, EOF, or stream failure."""
    summary = SessionSummary(sessions=1)
    try:
        while True:
            if prompt:
                wfile.write(b"> ")
                wfile.flush()
            raw = rfile.readline()
            if not raw:
                break
            summary.lines += 1
            line = raw.decode("utf-8", errors="replace")
            try:
                cmd = parse_command(line)
            except ParseError as exc:
                cmd = None
                response = f"ERR PARSE {exc.token}"
            else:
                if cmd is None:
                    continue
                response = execute(soc, cmd)
            wfile.write(response.encode("utf-8") + b"\n")
            wfile.flush()
            summary.responses += 1
            if cmd is not None and cmd.op == "Q":
                summary.quit_seen = True
                break
    except OSError:
        pass
    return summary


def open_listener(host: str = "127.0.0.1", port: int = 0) -> socket.socket:
    listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    listener.bind((host, port))
    listener.listen(4)
    return listener


def serve_tcp(soc: SocModel, listener: socket.socket, prompt: bool = False) -> SessionSummary:
    """Serve sessions one at a time until a client quits.

    EOF ends a session but keeps the server alive (model state persists);
    connections arriving while a session is active are refused with a busy
    line, which keeps transaction ordering trivially serial.
    """
    summary = SessionSummary()
    sel = selectors.DefaultSelector()
    sel.register(listener, selectors.EVENT_READ)
    active: socket.socket | None = None
    buffer = b""
    try:
        while True:
            events = sel.select()
            # handle session traffic (including EOFs) before new connects, so a
            # client that disconnected and immediately reconnected is not
            # refused against its own dead session
            events.sort(key=lambda item: 1 if item[0].fileobj is listener else 0)
            for key, _ in events:
                if key.fileobj is listener:
                    conn, _addr = listener.accept()
                    if active is not None:
                        try:
                            conn.sendall(BUSY_LINE.encode() + b"\n")
                        finally:
                            conn.close()
                        continue
                    active = conn
                    buffer = b""
                    summary.sessions += 1
                    sel.register(conn, selectors.EVENT_READ)
                    if prompt:
                        conn.sendall(b"> ")
                    continue
                conn = key.fileobj
                try:
                    chunk = conn.recv(4096)
                except OSError:
                    chunk = b""
                if not chunk:
                    sel.unregister(conn)
                    conn.close()
                    active = None
                    continue
                buffer += chunk
                while b"\n" in buffer:
                    raw, buffer = buffer.split(b"\n", 1)
                    summary.lines += 1
                    line = raw.decode("utf-8", errors="replace")
                    try:
                        cmd = parse_command(line)
                    except ParseError as exc:
                        cmd = None
                        response = f"ERR PARSE {exc.token}"
                    else:
                        if cmd is None:
                            continue
                        response = execute(soc, cmd)
                    conn.sendall(response.encode("utf-8") + b"\n")
                    summary.responses += 1
                    if prompt:
                        conn.sendall(b"> ")
                    if cmd is not None and cmd.op == "Q":
                        summary.quit_seen = True
                        sel.unregister(conn)
                        conn.close()
                        return summary
    finally:
        sel.close()
