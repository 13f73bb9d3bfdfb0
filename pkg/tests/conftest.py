import pytest

# criterion -> list of (check name, passed, detail)
ACCEPTANCE: dict = {}


@pytest.fixture
def ac_record():
    def record(criterion, name, ok, detail=""):
        ACCEPTANCE.setdefault(criterion, []).append((name, bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted(ACCEPTANCE, key=lambda c: int(c.split("-")[1])):
        checks = ACCEPTANCE[crit]
        ok = all(c[1] for c in checks)
        failed = [c for c in checks if not c[1]]
        tail = "; ".join(f"{n}: {d}" for n, _, d in failed) if failed else "; ".join(n for n, _, _ in checks)
        tr.write_line(f"{crit} {'PASS' if ok else 'FAIL'} ({len(checks) - len(failed)}/{len(checks)} checks) {tail}")
