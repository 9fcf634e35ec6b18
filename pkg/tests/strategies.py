"""Hypothesis strategies shared by the database property tests."""

from __future__ import annotations

from hypothesis import strategies as st

from chipkit.regdb import ACTIVE, RETIRED, RegDb, RegEntry, allocate_offsets
from chipkit.sv_scan import ACCESS_RO, ACCESS_RW, CsrCandidate

names = st.from_regex(r"[a-z][a-z0-9_]{0,11}", fullmatch=True)
module_names = st.sampled_from(["alpha", "beta", "gamma", "delta"])
access = st.sampled_from([ACCESS_RW, ACCESS_RO])
# printable text that exercises CSV quoting (commas, quotes, newlines)
descriptions = st.text(
    alphabet=st.sampled_from(list("abc XYZ09_,\"'\n|;")), max_size=24)


@st.composite
def reg_entries(draw, name):
    width = draw(st.integers(1, 32))
    return RegEntry(
        name=name,
        width_bits=width,
        access=draw(access),
        reset_value=draw(st.integers(0, (1 << width) - 1)),
        origin_module=draw(module_names),
        description=draw(descriptions),
        state=draw(st.sampled_from([ACTIVE, RETIRED])),
    )


@st.composite
def reg_dbs(draw, max_entries=8):
    entry_names = draw(st.lists(names, max_size=max_entries, unique=True))
    db = RegDb(entries=[draw(reg_entries(n)) for n in entry_names])
    return allocate_offsets(db)


@st.composite
def candidate_lists(draw, max_candidates=6):
    cand_names = draw(st.lists(names, max_size=max_candidates, unique=True))
    return [
        CsrCandidate(
            name=n,
            width_bits=draw(st.integers(1, 32)),
            access=draw(access),
            origin_module=draw(module_names),
            source_line=i + 1,
        )
        for i, n in enumerate(cand_names)
    ]
