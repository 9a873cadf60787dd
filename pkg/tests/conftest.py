"""Collects acceptance verdicts and prints one line per criterion at the end of the run."""

ACCEPTANCE: dict[int, tuple[bool, str, str]] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    ACCEPTANCE[number] = (bool(ok), title, detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
