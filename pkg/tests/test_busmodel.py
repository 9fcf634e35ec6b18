import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chipkit import busmodel, emit, uart_host
from chipkit.busmodel import (
    ERR_MISALIGNED,
    ERR_UNMAPPED,
    ERR_XREAD,
    BusError,
    FaultConfig,
    build_soc,
    bus_read,
    bus_write,
    gen_region_test,
    get_control,
    reset,
    set_status,
)
from chipkit.memmap import MemoryMap, Region
from chipkit.regdb import RegDb, UNMAPPED_READ_VALUE, db_hash, update_db
from chipkit.sv_scan import CsrCandidate

MAP = MemoryMap([
    Region("uart0", "peripheral", 0x40000000, 0x100),
    Region("csr0", "csr", 0x50000000, 0x1000),
    Region("sram0", "sram", 0x60000000, 0x10000),
])

CSR_BASE = 0x50000000
SRAM_BASE = 0x60000000


def make_db():
    db, _ = update_db(RegDb(), [
        CsrCandidate("cfg_a", 4, "RW", "m1", 1),
        CsrCandidate("sts_b", 8, "RO", "m1", 2),
    ])
    db.entry("cfg_a").reset_value = 0x5
    return db


@pytest.fixture
def soc():
    return build_soc(MAP, [("csr0", make_db())])


class TestBuild:
    def test_regions_populated(self, soc):
        assert set(soc.csr_blocks) == {"csr0"}
        assert set(soc.srams) == {"uart0", "sram0"}

    def test_reset_values_visible_immediately(self, soc):
        assert get_control(soc, "csr0", "cfg_a") == 0x5
        assert bus_read(soc, CSR_BASE + 4) == 0x5

    def test_zero_region_map_everything_unmapped(self):
        empty = build_soc(MemoryMap([]), [])
        for addr in (0x0, 0x1000, 0xFFFFFFFC):
            assert bus_read(empty, addr) == BusError(ERR_UNMAPPED, addr)

    def test_unpaired_csr_region(self):
        with pytest.raises(busmodel.ConfigError):
            build_soc(MAP, [])

    def test_db_for_unknown_region(self):
        with pytest.raises(busmodel.ConfigError):
            build_soc(MemoryMap([]), [("nope", make_db())])

    def test_entry_outside_region(self):
        tiny = MemoryMap([Region("csr0", "csr", 0x50000000, 0x8)])
        db, _ = update_db(RegDb(), [CsrCandidate(f"cfg_{i}", 1, "RW", "m", i) for i in range(3)])
        with pytest.raises(busmodel.ConfigError):
            build_soc(tiny, [("csr0", db)])


class TestReadWrite:
    def test_unmapped_read(self, soc):
        assert bus_read(soc, 0x30000000) == BusError(ERR_UNMAPPED, 0x30000000)

    def test_misaligned(self, soc):
        assert bus_read(soc, CSR_BASE + 2) == BusError(ERR_MISALIGNED, CSR_BASE + 2)
        assert bus_write(soc, CSR_BASE + 2, 0) == BusError(ERR_MISALIGNED, CSR_BASE + 2)

    def test_id_register_returns_hash(self, soc):
        assert bus_read(soc, CSR_BASE) == db_hash(make_db())

    def test_write_masked_to_width(self, soc):
        assert bus_write(soc, CSR_BASE + 4, 0xFFFFFFFF) is None
        assert bus_read(soc, CSR_BASE + 4) == 0xF

    def test_write_to_ro_ignored(self, soc):
        before = bus_read(soc, CSR_BASE + 8)
        assert bus_write(soc, CSR_BASE + 8, 0x77) is None
        assert bus_read(soc, CSR_BASE + 8) == before

    def test_write_to_id_ignored(self, soc):
        assert bus_write(soc, CSR_BASE, 0x123) is None
        assert bus_read(soc, CSR_BASE) == db_hash(make_db())

    def test_in_region_unmapped_constant_matches_emit(self, soc):
        assert bus_read(soc, CSR_BASE + 0x100) == UNMAPPED_READ_VALUE
        assert UNMAPPED_READ_VALUE == emit.EmitConfig().unmapped_value

    def test_strict_x_read_before_write(self, soc):
        addr = SRAM_BASE + 0x40
        assert bus_read(soc, addr) == BusError(ERR_XREAD, addr)
        assert bus_write(soc, addr, 0xCAFE0001) is None
        assert bus_read(soc, addr) == 0xCAFE0001

    def test_random_mode_deterministic_and_unmarked(self):
        a = build_soc(MAP, [("csr0", make_db())], sram_mode="random", seed=7)
        b = build_soc(MAP, [("csr0", make_db())], sram_mode="random", seed=7)
        c = build_soc(MAP, [("csr0", make_db())], sram_mode="random", seed=8)
        addr = SRAM_BASE + 0x123 * 4
        va = bus_read(a, addr)
        assert va == bus_read(a, addr) == bus_read(b, addr)
        assert isinstance(va, int)
        assert bus_read(c, addr) != va or True  # different seed may collide; just type-check
        assert bus_write(a, addr, 5) is None and bus_read(a, addr) == 5


class TestStatusControl:
    def test_set_status_then_read(self, soc):
        set_status(soc, "csr0", "sts_b", 0x21)
        assert bus_read(soc, CSR_BASE + 8) == 0x21

    def test_set_status_masks(self, soc):
        set_status(soc, "csr0", "sts_b", 0x1FF)
        assert bus_read(soc, CSR_BASE + 8) == 0xFF

    def test_get_control_after_write(self, soc):
        bus_write(soc, CSR_BASE + 4, 0x3)
        assert get_control(soc, "csr0", "cfg_a") == 0x3

    def test_usage_errors(self, soc):
        with pytest.raises(busmodel.UsageError):
            set_status(soc, "csr0", "cfg_a", 1)  # RW name
        with pytest.raises(busmodel.UsageError):
            get_control(soc, "csr0", "sts_b")
        with pytest.raises(busmodel.UsageError):
            set_status(soc, "nope", "sts_b", 1)
        with pytest.raises(busmodel.UsageError):
            set_status(soc, "csr0", "missing", 1)


class TestReset:
    def test_csr_back_to_reset(self, soc):
        bus_write(soc, CSR_BASE + 4, 0xF)
        reset(soc)
        assert bus_read(soc, CSR_BASE + 4) == 0x5

    def test_sram_survives_reset(self, soc):
        bus_write(soc, SRAM_BASE, 0xAB)
        reset(soc)
        assert bus_read(soc, SRAM_BASE) == 0xAB

    def test_stats_survive_reset(self, soc):
        bus_read(soc, CSR_BASE)
        bus_write(soc, SRAM_BASE, 1)
        reset(soc)
        assert (soc.stats.reads, soc.stats.writes) == (1, 1)


def snapshot(soc):
    return (
        {n: dict(b.values) for n, b in soc.csr_blocks.items()},
        {n: (dict(s.words), set(s.initialized)) for n, s in soc.srams.items()},
    )


class TestDefaultSlave:
    def test_unmapped_access_never_mutates(self, soc):
        bus_write(soc, SRAM_BASE, 0x11)
        bus_write(soc, CSR_BASE + 4, 0x2)
        before = snapshot(soc)
        rng = random.Random(42)
        for _ in range(200):
            addr = rng.randrange(0, 1 << 32) & ~0x3
            if soc.memmap.region_at(addr) is not None:
                continue
            bus_read(soc, addr)
            bus_write(soc, addr, rng.randrange(1 << 32))
        assert snapshot(soc) == before

    def test_decode_matches_interval_oracle(self, soc):
        rng = random.Random(7)

        def oracle_mapped(addr):
            return any(r.base <= addr < r.base + r.size_bytes for r in MAP.regions)

        for _ in range(2000):
            addr = rng.randrange(0, 1 << 30) * 4
            verdict = bus_read(soc, addr)
            model_mapped = not (isinstance(verdict, BusError) and verdict.kind == ERR_UNMAPPED)
            assert model_mapped == oracle_mapped(addr), hex(addr)


class TestProperties:
    @settings(max_examples=200)
    @given(offset=st.integers(0, 0xFFF), value=st.integers(0, 0xFFFFFFFF))
    def test_read_your_write_sram(self, offset, value):
        soc = build_soc(MAP, [("csr0", make_db())])
        addr = SRAM_BASE + offset * 4
        assert bus_write(soc, addr, value) is None
        assert bus_read(soc, addr) == value

    @settings(max_examples=200)
    @given(value=st.integers(0, 0xFFFFFFFF))
    def test_read_your_write_csr(self, value):
        soc = build_soc(MAP, [("csr0", make_db())])
        bus_write(soc, CSR_BASE + 4, value)
        assert bus_read(soc, CSR_BASE + 4) == (value & 0xF)


class TestRegionTest:
    def test_1k_region_probe_bits(self):
        m = MemoryMap([Region("sram0", "sram", 0x60000000, 0x400)])
        sc = gen_region_test(m, "sram0")
        probe_writes = [s for s in sc.steps if "address bit" in s.comment and s.command.startswith("W")]
        assert len(probe_writes) == 8  # bits 2..9
        assert probe_writes[0].command.split()[1] == "0x60000004"
        assert probe_writes[-1].command.split()[1] == "0x60000200"

    def test_single_word_region(self):
        m = MemoryMap([Region("s", "sram", 0x60000000, 0x4)])
        sc = gen_region_test(m, "s")
        assert not any("address bit" in s.comment for s in sc.steps)
        data_steps = [s for s in sc.steps if "data bit" in s.comment and s.command.startswith("W")]
        assert len(data_steps) == 32

    def test_passes_on_fault_free_model(self, soc):
        sc = gen_region_test(MAP, "sram0")
        report = uart_host.run_script(soc, sc)
        assert report.ok, uart_host.format_report(report)

    def test_csr_region_rejected(self):
        with pytest.raises(busmodel.UsageError):
            gen_region_test(MAP, "csr0")

    @pytest.mark.parametrize("bit", [2, 7, 15])
    def test_address_fault_detected(self, bit):
        fault = FaultConfig("mask_address_bit", bit, "sram0")
        soc = build_soc(MAP, [("csr0", make_db())], fault=fault)
        report = uart_host.run_script(soc, gen_region_test(MAP, "sram0"))
        assert not report.ok
        assert any(f"bit {bit}" in gen_region_test(MAP, "sram0").steps[f.index].comment
                   or "base" in gen_region_test(MAP, "sram0").steps[f.index].comment
                   for f in report.failures)

    @pytest.mark.parametrize("bit", [0, 13, 31])
    def test_data_fault_detected(self, bit):
        fault = FaultConfig("mask_data_bit", bit, "sram0")
        soc = build_soc(MAP, [("csr0", make_db())], fault=fault)
        report = uart_host.run_script(soc, gen_region_test(MAP, "sram0"))
        assert not report.ok
        failing_comments = {gen_region_test(MAP, "sram0").steps[f.index].comment
                            for f in report.failures}
        assert any(f"data bit {bit} read back" == c for c in failing_comments)

    def test_fault_on_csr_region_rejected(self):
        with pytest.raises(busmodel.ConfigError):
            build_soc(MAP, [("csr0", make_db())], fault=FaultConfig("mask_address_bit", 3, "csr0"))

    def test_bad_fault_spec(self):
        with pytest.raises(busmodel.ConfigError):
            build_soc(MAP, [("csr0", make_db())], fault=FaultConfig("zap", 3, "sram0"))
        with pytest.raises(busmodel.ConfigError):
            build_soc(MAP, [("csr0", make_db())], fault=FaultConfig("mask_data_bit", 32, "sram0"))
