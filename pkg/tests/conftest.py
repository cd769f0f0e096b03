import sys


def pytest_terminal_summary(terminalreporter):
    # echo the one-line verdicts of the acceptance criteria after the run
    for name, mod in list(sys.modules.items()):
        if name.endswith("test_acceptance") and getattr(mod, "RESULTS", None):
            terminalreporter.section("acceptance criteria")
            for k in sorted(mod.RESULTS):
                terminalreporter.write_line(mod.RESULTS[k])
