import io
import re
import socket
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chipkit import busmodel, emit, uart_host
from chipkit.memmap import MemoryMap, Region
from chipkit.regdb import RegDb, update_db
from chipkit.script import ScriptStep, TestScript, load_script, save_script
from chipkit.sv_scan import CsrCandidate
from chipkit.uart_host import (
    Command,
    ParseError,
    execute,
    execute_line,
    open_listener,
    parse_command,
    run_script,
    serve,
    serve_tcp,
)

MAP = MemoryMap([
    Region("csr0", "csr", 0x50000000, 0x1000),
    Region("sram0", "sram", 0x60000000, 0x10000),
])


def make_db(reset=0xF):
    db, _ = update_db(RegDb(), [CsrCandidate("cfg_a", 4, "RW", "m1", 1)])
    db.entry("cfg_a").reset_value = reset
    return db


def make_soc(db=None):
    return busmodel.build_soc(MAP, [("csr0", db or make_db())])


class TestParse:
    def test_read_verbatim(self):
        assert parse_command("R 0x70000000") == Command("R", addr=0x70000000)

    def test_write(self):
        assert parse_command("W 0x50000004 0xdead0001") == \
            Command("W", addr=0x50000004, data=0xDEAD0001)

    def test_bad_token_reported(self):
        with pytest.raises(ParseError) as err:
            parse_command("R 0xZZ")
        assert err.value.token == "0xZZ"

    def test_empty_line_is_noop(self):
        assert parse_command("") is None
        assert parse_command("   \t ") is None

    def test_case_insensitive_verbs(self):
        assert parse_command("r 10") == Command("R", addr=0x10)
        assert parse_command("w 10 2") == Command("W", addr=0x10, data=2)

    def test_bare_hex(self):
        assert parse_command("R 70000000") == Command("R", addr=0x70000000)

    def test_tabs_and_padding(self):
        assert parse_command("  R\t0x4  ") == Command("R", addr=4)

    def test_crlf_tolerated(self):
        assert parse_command("R 0x4\r") == Command("R", addr=4)

    def test_value_too_wide(self):
        with pytest.raises(ParseError):
            parse_command("R 0x100000000")

    def test_arity_errors(self):
        with pytest.raises(ParseError):
            parse_command("R")
        with pytest.raises(ParseError):
            parse_command("W 0x4")
        with pytest.raises(ParseError) as err:
            parse_command("R 0x4 junk")
        assert err.value.token == "junk"

    def test_unknown_verb(self):
        with pytest.raises(ParseError) as err:
            parse_command("X 0x4")
        assert err.value.token == "X"

    def test_help_and_quit(self):
        assert parse_command("?") == Command("?")
        assert parse_command("q") == Command("Q")


class TestExecute:
    def test_read_format(self):
        soc = make_soc()
        assert execute(soc, Command("R", addr=0x50000004)) == "0x0000000f"

    def test_unmapped_read(self):
        assert execute(make_soc(), Command("R", addr=0x10)) == "ERR UNMAPPED"

    def test_misaligned(self):
        assert execute(make_soc(), Command("R", addr=0x50000001)) == "ERR MISALIGNED"

    def test_xread(self):
        assert execute(make_soc(), Command("R", addr=0x60000000)) == "ERR XREAD"

    def test_write_ok(self):
        assert execute(make_soc(), Command("W", addr=0x60000000, data=1)) == "OK"

    def test_help_single_line(self):
        text = execute(make_soc(), Command("?"))
        assert "\n" not in text and "R <addr>" in text

    def test_parse_error_line(self):
        assert execute_line(make_soc(), "R 0xZZ") == "ERR PARSE 0xZZ"
        assert execute_line(make_soc(), "") is None


class TestRunScript:
    def test_generated_selftest_passes(self):
        db = make_db()
        cfg = emit.EmitConfig(block_name="b", base_address=0x50000000)
        report = run_script(make_soc(db), emit.emit_selftest(db, cfg))
        assert report.ok and report.total == report.passed > 0

    def test_different_db_fails_id_step(self):
        db = make_db()
        other = make_db(reset=0x3)
        cfg = emit.EmitConfig(block_name="b", base_address=0x50000000)
        report = run_script(make_soc(other), emit.emit_selftest(db, cfg))
        assert not report.ok
        assert report.failures[0].index == 0  # ID step

    def test_single_wrong_expectation(self):
        sc = TestScript([
            ScriptStep("W 0x60000000 0x1", "OK"),
            ScriptStep("R 0x60000000", "0x00000002"),
            ScriptStep("R 0x60000000", "0x00000001"),
        ])
        report = run_script(make_soc(), sc)
        assert report.total == 3 and report.passed == 2
        assert [f.index for f in report.failures] == [1]

    def test_stop_on_fail(self):
        sc = TestScript([ScriptStep("R 0x0", "0x0"), ScriptStep("W 0x60000000 0x1", "OK")])
        report = run_script(make_soc(), sc, stop_on_fail=True)
        assert report.total == 1 and not report.ok

    def test_invariant_passed_plus_failures(self):
        sc = TestScript([ScriptStep("R 0x0", "nope"), ScriptStep("W 0x60000000 0x1", "OK")])
        report = run_script(make_soc(), sc)
        assert report.passed + len(report.failures) == report.total == 2


class TestScriptFile:
    def test_round_trip(self):
        sc = TestScript([ScriptStep("R 0x4", "0x00000000", "first"),
                         ScriptStep("W 0x4 0x1", "OK")])
        assert load_script(save_script(sc)) == sc

    def test_comments_and_blanks(self):
        text = "# leading note\n\n> R 0x4\n< OK\n"
        sc = load_script(text)
        assert sc.steps == [ScriptStep("R 0x4", "OK", "leading note")]

    def test_malformed(self):
        with pytest.raises(Exception):
            load_script("> R 0x4\n> R 0x8\n")
        with pytest.raises(Exception):
            load_script("< OK\n")
        with pytest.raises(Exception):
            load_script("> R 0x4\n")


def run_session(soc, lines, prompt=False):
    rfile = io.BytesIO(("".join(line + "\n" for line in lines)).encode())
    wfile = io.BytesIO()
    summary = serve(soc, rfile, wfile, prompt=prompt)
    return summary, wfile.getvalue().decode()


class TestServe:
    def test_bad_line_then_continues(self):
        soc = make_soc()
        summary, out = run_session(soc, ["R", "R 0x50000004"])
        assert out.splitlines() == ["ERR PARSE R", "0x0000000f"]
        assert summary.responses == 2

    def test_quit_ends_and_state_persists(self):
        soc = make_soc()
        _, out = run_session(soc, ["W 0x60000000 0x7", "Q", "R 0x60000000"])
        assert out.splitlines() == ["OK", "OK"]  # third line never processed
        # model retains the write across sessions
        _, out2 = run_session(soc, ["R 0x60000000"])
        assert out2.splitlines() == ["0x00000007"]

    def test_response_bijection(self):
        lines = ["R 0x50000000", "garbage", "W 0x50000004 0x1", "?", "R 0xZZ"] * 20
        summary, out = run_session(make_soc(), lines)
        assert len(out.splitlines()) == len(lines) == summary.responses

    def test_blank_lines_are_noops(self):
        _, out = run_session(make_soc(), ["", "R 0x50000004", ""])
        assert out.splitlines() == ["0x0000000f"]

    def test_prompt_mode(self):
        _, out = run_session(make_soc(), ["R 0x50000004"], prompt=True)
        assert out.startswith("> ")

    def test_read_format_law(self):
        lines = [f"R 0x{0x50000000 + 4 * i:08x}" for i in range(32)]
        _, out = run_session(make_soc(), lines)
        for line in out.splitlines():
            assert re.fullmatch(r"0x[0-9a-f]{8}|ERR \w+( .*)?", line)

    def test_script_serve_equivalence(self):
        db = make_db()
        cfg = emit.EmitConfig(block_name="b", base_address=0x50000000)
        sc = emit.emit_selftest(db, cfg)
        _, out = run_session(make_soc(db), [s.command for s in sc.steps])
        via_serve = out.splitlines()
        report = run_script(make_soc(db), sc)
        assert report.ok
        assert via_serve == [s.expected for s in sc.steps]

    def test_stats_conservation(self):
        soc = make_soc()
        lines = ["R 0x50000000", "W 0x60000000 0x1", "?", "", "R 0xZZ", "R 0x60000000"]
        run_session(soc, lines)
        transactions = soc.stats.reads + soc.stats.writes
        assert transactions == 3  # two reads + one write; ?, blank, parse error excluded


def _client(port, lines):
    with socket.create_connection(("127.0.0.1", port), timeout=5) as conn:
        conn.sendall(("".join(l + "\n" for l in lines)).encode())
        conn.shutdown(socket.SHUT_WR)
        data = b""
        while True:
            chunk = conn.recv(4096)
            if not chunk:
                return data.decode()
            data += chunk


class TestServeTcp:
    def test_session_busy_reject_and_quit(self):
        soc = make_soc()
        listener = open_listener()
        port = listener.getsockname()[1]
        result = {}

        def server():
            result["summary"] = serve_tcp(soc, listener)

        t = threading.Thread(target=server, daemon=True)
        t.start()
        try:
            first = socket.create_connection(("127.0.0.1", port), timeout=5)
            ffile = first.makefile("rwb")
            ffile.write(b"R 0x50000004\n")
            ffile.flush()
            assert ffile.readline() == b"0x0000000f\n"

            # second connection while the first is active: refused busy
            second = socket.create_connection(("127.0.0.1", port), timeout=5)
            assert second.makefile("rb").readline() == b"ERR BUSY\n"
            second.close()

            # first session still works, EOF keeps the server alive
            ffile.write(b"W 0x60000000 0x2a\n")
            ffile.flush()
            assert ffile.readline() == b"OK\n"
            ffile.close()  # makefile holds a reference; close both to send FIN
            first.close()

            # third session sees persisted state and shuts the server down
            out = _client(port, ["R 0x60000000", "Q"])
            assert out.splitlines() == ["0x0000002a", "OK"]
        finally:
            t.join(timeout=5)
            listener.close()
        assert not t.is_alive()
        assert result["summary"].sessions == 2
        assert result["summary"].quit_seen

    def test_ordered_batch(self):
        soc = make_soc()
        listener = open_listener()
        port = listener.getsockname()[1]
        t = threading.Thread(target=serve_tcp, args=(soc, listener), daemon=True)
        t.start()
        try:
            lines = [f"W 0x{0x60000000 + 4 * i:08x} 0x{i:x}" for i in range(100)]
            lines += [f"R 0x{0x60000000 + 4 * i:08x}" for i in range(100)]
            lines.append("Q")
            out = _client(port, lines).splitlines()
            assert len(out) == 201
            assert out[:100] == ["OK"] * 100
            assert out[100:200] == [f"0x{i:08x}" for i in range(100)]
        finally:
            t.join(timeout=5)
            listener.close()


class TestResponseProperties:
    @settings(max_examples=100)
    @given(st.lists(st.sampled_from(
        ["R 0x50000000", "W 0x50000004 0x3", "R 0x123", "junk", "?", "R 0x60000010"]),
        min_size=1, max_size=30))
    def test_one_response_per_command(self, lines):
        summary, out = run_session(make_soc(), lines)
        assert len(out.splitlines()) == len(lines)
