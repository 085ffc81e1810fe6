import sys

from hypothesis import settings

# the first example of a property pays numba compile time, so wall-clock deadlines are meaningless
settings.register_profile("default", deadline=None)
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for cid in mod.IDS:
        if cid in results:
            terminalreporter.write_line(mod.describe(cid))
