from collections import defaultdict

import pytest
from hypothesis import settings

# reproducible property tests: the same examples on every run
settings.register_profile("repro", derandomize=True, deadline=None, print_blob=True)
settings.load_profile("repro")

CRITERIA = {
    1: "exit-time law",
    2: "hitting-time remainder",
    3: "SRW embedding",
    4: "excursion-count clock",
    5: "one-point exactness",
    6: "exponent asymptotics",
    7: "h-transform excursion counts",
    8: "decoupling and REM bound",
    9: "Green's function",
    10: "cover-time bracket and trend",
    11: "determinism",
}

_RESULTS: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)


@pytest.fixture
def record():
    """record(criterion, part, ok, detail) -- one sub-check of an acceptance criterion."""

    def _record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
        _RESULTS[criterion].append((part, bool(ok), detail))
        status = "PASS" if ok else "FAIL"
        print(f"[criterion {criterion:2d}] {status} {part}: {detail}")
        return bool(ok)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for c, name in CRITERIA.items():
        parts = _RESULTS.get(c)
        if not parts:
            tr.write_line(f"criterion {c:2d} NOT RUN  {name}")
            continue
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{p}{'' if good else ' FAILED'} ({d})" for p, good, d in parts)
        tr.write_line(f"criterion {c:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
