import contextlib
import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# acceptance tests record one line per criterion here
ACCEPTANCE_RESULTS = {}


class _Criterion:
    @contextlib.contextmanager
    def __call__(self, number, title):
        """Run one acceptance criterion; the block may fill ``note["detail"]``."""
        note = {"detail": ""}
        try:
            yield note
        except pytest.skip.Exception as exc:
            ACCEPTANCE_RESULTS[number] = (title, None, note["detail"] or str(exc))
            raise
        except BaseException as exc:
            detail = note["detail"] or f"{type(exc).__name__}: {exc}".splitlines()[0]
            ACCEPTANCE_RESULTS[number] = (title, False, detail)
            raise
        else:
            ACCEPTANCE_RESULTS[number] = (title, True, note["detail"])


@pytest.fixture
def criterion():
    return _Criterion()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        status = {True: "PASS", False: "FAIL", None: "SKIP"}[passed]
        line = f"[{status}] {number:>2}. {title}"
        if detail:
            line += f": {detail}"
        terminalreporter.write_line(line)


def quick_mode() -> bool:
    return os.environ.get("LAYERCRYPT_QUICK", "") not in ("", "0")
