"""Collects acceptance verdicts and prints them as one block after the run."""

VERDICTS = {}


def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
    VERDICTS[number] = (title, passed, detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        title, passed, detail = VERDICTS[n]
        line = f"[{'PASS' if passed else 'FAIL'}] {n:2d}. {title}"
        terminalreporter.write_line(f"{line} :: {detail}" if detail else line)
