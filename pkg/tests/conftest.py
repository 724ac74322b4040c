"""Collects the acceptance verdict lines and repeats them in the terminal summary."""

ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])


from hypothesis import settings

settings.register_profile("repo", derandomize=True)
settings.load_profile("repo")
