LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"
    LINES.append(line)
    print(line)
