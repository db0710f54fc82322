import numpy as np
import pandas as pd
import pytest

from windvol.ingest import Panel, make_stations

_ACCEPTANCE: list[tuple[str, str, str]] = []


@pytest.fixture
def record_criterion():
    """Register a one-line verdict for the acceptance summary."""

    def record(label: str, ok: bool | None, detail: str = "") -> None:
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        _ACCEPTANCE.append((label, verdict, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, verdict, detail in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"{verdict} {label}: {detail}")


def make_panel(values, start="2020-01-01", ids=None, lon=None, lat=None, variable="ws10", directions=None) -> Panel:
    values = np.asarray(values, dtype=float)
    T, N = values.shape
    ids = ids or [f"S{j}" for j in range(N)]
    lon = np.full(N, 9.0) + 0.1 * np.arange(N) if lon is None else lon
    lat = np.full(N, 45.0) if lat is None else lat
    return Panel(values, pd.date_range(start, periods=T, freq="D"), make_stations(ids, lon, lat), variable, directions)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_run(tmp_path_factory):
    """One full reproduce run on the bundled synthetic dataset, shared across tests."""
    from windvol.cli import main

    out = tmp_path_factory.mktemp("synthetic") / "run"
    assert main(["reproduce", "--out", str(out), "--threads", "1"]) == 0
    return out


def tree_digest(root) -> dict:
    import hashlib
    from pathlib import Path

    root = Path(root)
    return {p.relative_to(root).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(root.rglob("*")) if p.is_file()}
