import sys


def pytest_terminal_summary(terminalreporter):
    mod = (sys.modules.get("test_acceptance")
           or sys.modules.get("tests.test_acceptance"))
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num, desc, ok in sorted(results):
        state = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"criterion {num:02d}: {state} - {desc}")
