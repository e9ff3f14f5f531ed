"""Terminal summary hook for the acceptance suite."""

import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        label, passed, detail = results[num]
        status = "PASS" if passed else "FAIL"
        line = f"criterion {num:2d} {status}  {label}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
