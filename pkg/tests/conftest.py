import _scoreboard


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _scoreboard.LINES:
        terminalreporter.write_sep("-", "acceptance scoreboard")
        for line in _scoreboard.LINES:
            terminalreporter.write_line(line)
