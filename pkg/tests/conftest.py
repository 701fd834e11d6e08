import contextlib

_CRITERIA = {}


@contextlib.contextmanager
def criterion(number, description):
    """Record the outcome of one acceptance criterion for the terminal summary."""
    detail = {"text": ""}
    try:
        yield detail
    except BaseException:
        _CRITERIA[number] = ("FAIL", description, detail["text"])
        raise
    _CRITERIA[number] = ("PASS", description, detail["text"])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, description, text = _CRITERIA[number]
        line = f"criterion {number}: {status} - {description}"
        terminalreporter.write_line(line + (f" ({text})" if text else ""))
