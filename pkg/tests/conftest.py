from hypothesis import settings

# the first call of a numba kernel includes compilation time
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def pytest_configure(config):
    config.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.acceptance_lines
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
