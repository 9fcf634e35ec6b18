"""SoC memory map: named, non-overlapping address regions over a 32-bit space.

The map is both a generator input (interconnect header emission) and the
decode table for the transaction-level model. File format is one region per
line: ``region <name> <kind> <base-hex> <size-hex>``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

REGION_KINDS = ("csr", "sram", "peripheral")

ADDR_SPACE = 1 << 32


class MapError(Exception):
    """Malformed memory map text."""

    exit_code = 2


class MapInvariantError(Exception):
    """Structurally valid map that violates region invariants."""

    exit_code = 3


@dataclass(frozen=True)
class Region:
    name: str
    kind: str
    base: int
    size_bytes: int

    @property
    def end(self) -> int:
        """One past the last byte of the region."""
        return self.base + self.size_bytes

    def contains(self, addr: int) -> bool:
        return self.base <= addr < self.end


@dataclass
class MemoryMap:
    regions: list[Region] = field(default_factory=list)

    def validate(self) -> list[str]:
        problems = []
        names = set()
        for r in self.regions:
            if r.kind not in REGION_KINDS:
                problems.append(f"region {r.name}: unknown kind {r.kind!r}")
            if r.size_bytes <= 0 or r.size_bytes & (r.size_bytes - 1):
                problems.append(f"region {r.name}: size 0x{r.size_bytes:x} not a power of two")
            elif r.base % r.size_bytes:
                problems.append(f"region {r.name}: base 0x{r.base:08x} not aligned to size")
            if r.base < 0 or r.end > ADDR_SPACE:
                problems.append(f"region {r.name}: exceeds 32-bit address space")
            if r.name in names:
                problems.append(f"duplicate region name {r.name}")
            names.add(r.name)
        ordered = sorted(self.regions, key=lambda r: r.base)
        for lo, hi in zip(ordered, ordered[1:]):
            if lo.end > hi.base:
                problems.append(f"regions {lo.name} and {hi.name} overlap")
        return problems

    def check(self) -> "MemoryMap":
        problems = self.validate()
        if problems:
            raise MapInvariantError("; ".join(problems))
        return self

    def region(self, name: str) -> Region:
        for r in self.regions:
            if r.name == name:
                return r
        raise KeyError(name)

    def region_at(self, addr: int) -> Region | None:
        """Decode an address to its region, or None for the default slave."""
        bases = [r.base for r in self.regions]
        i = bisect.bisect_right(bases, addr) - 1
        if i >= 0 and self.regions[i].contains(addr):
            return self.regions[i]
        return None


def load_memory_map(text: str) -> MemoryMap:
    """Parse map text; returns regions sorted by base. Raises MapError on syntax."""
    regions = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 5 or fields[0] != "region":
            raise MapError(f"line {lineno}: expected 'region <name> <kind> <base> <size>'")
        _, name, kind, base_s, size_s = fields
        try:
            base = int(base_s, 16)
            size = int(size_s, 16)
        except ValueError:
            raise MapError(f"line {lineno}: bad hex number") from None
        regions.append(Region(name=name, kind=kind, base=base, size_bytes=size))
    regions.sort(key=lambda r: r.base)
    return MemoryMap(regions=regions)


def format_memory_map(memmap: MemoryMap) -> str:
    lines = [f"region {r.name} {r.kind} 0x{r.base:08x} 0x{r.size_bytes:x}" for r in memmap.regions]
    return "\n".join(lines) + "\n"
