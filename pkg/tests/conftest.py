import sys


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        status, title, detail = results[number]
        line = f"criterion {number:2d}: {status}  {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
