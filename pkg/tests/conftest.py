from __future__ import annotations

import itertools

import pytest

from raxon import kernels
from raxon.cs import CharacteristicSet, SubjectRecord


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run the test once per available kernel backend."""
    previous = kernels.BACKEND
    kernels.use(request.param)
    yield request.param
    kernels.use(previous)


_subject_ids = itertools.count(10_000)


def make_cs(cs_id: int, props, rows: int) -> CharacteristicSet:
    """A CS with ``rows`` synthetic records, one value per property."""
    props = frozenset(props)
    recs = []
    for _ in range(rows):
        s = next(_subject_ids)
        recs.append(SubjectRecord(s, {p: [s * 100 + p] for p in sorted(props)}))
    return CharacteristicSet(cs_id, props, recs)


def make_css(layout) -> list[CharacteristicSet]:
    """``layout`` is a sequence of ``(property iterable, row count)``; ids follow order."""
    return [make_cs(i, props, rows) for i, (props, rows) in enumerate(layout)]


def nt(*lines: str) -> bytes:
    return ("\n".join(lines) + "\n").encode("utf-8")


# -- acceptance reporting ---------------------------------------------------------

_verdicts: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and rep.passed):
        return
    number, title = mark.args
    status = "SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL")
    if _verdicts.get(number, ("",))[0] != "FAIL":
        _verdicts[number] = (status, title)


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_verdicts):
            status, title = _verdicts[number]
            terminalreporter.write_line(f"criterion {number:>2} {status}: {title}")
