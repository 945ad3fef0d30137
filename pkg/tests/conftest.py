def pytest_terminal_summary(terminalreporter):
    try:
        from tests import test_acceptance
    except ImportError:  # pragma: no cover
        return
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, 12):
        terminalreporter.write_line(test_acceptance.report_line(n))
