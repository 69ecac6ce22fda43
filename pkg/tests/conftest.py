import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_criterion_lines: list[tuple[int, str]] = []


def record_criterion(number: int, description: str, passed: bool, detail: str = ""):
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    _criterion_lines.append((number, f"criterion {number:2d} [{status}] {description}{suffix}"))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _criterion_lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_criterion_lines):
        terminalreporter.write_line(line)
