import pytest


@pytest.fixture
def report(capsys):
    """Print a one-line verdict straight to the terminal, then assert."""

    def _report(num, ok, detail):
        line = f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})"
        with capsys.disabled():
            print(f"\n{line}")
        assert ok, line

    return _report
