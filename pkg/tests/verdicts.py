"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, name: str, passed: bool, detail: str) -> None:
    LINES.append(f"[{'PASS' if passed else 'FAIL'}] {number:2d} {name}: {detail}")
    print(LINES[-1])
