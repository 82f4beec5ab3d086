import os
import sys
from functools import lru_cache

from hypothesis import settings

settings.register_profile("ci", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

sys.path.insert(0, os.path.dirname(__file__))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(mod.RESULTS):
        parts = mod.RESULTS[num]
        ok = all(p[1] for p in parts)
        detail = "; ".join(f"{label} {elapsed:.2f}s/{budget:g}s{' ' + note if note else ''}{'' if good else ' [failed]'}"
                           for label, good, elapsed, budget, note in parts)
        terminalreporter.write_line(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
