def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(test_acceptance.VERDICTS):
            verdict = test_acceptance.VERDICTS[number]
            terminalreporter.write_line(verdict.line())
            for label in verdict.failures():
                terminalreporter.write_line(f"      failed: {label}")
