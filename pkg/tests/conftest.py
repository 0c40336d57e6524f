import numpy as np
import pytest
import yaml

from egfc.corpus import write_raw_csv

_acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.get_closest_marker("acceptance") is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.skipped):
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = "; ".join(str(v) for k, v in rep.user_properties if k == "detail")
        if rep.skipped and not detail:
            detail = str(rep.longrepr[-1]) if isinstance(rep.longrepr, tuple) else ""
        _acceptance.append((rep.outcome, doc, detail))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for outcome, doc, detail in _acceptance:
        tag = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[outcome]
        tr.write_line(f"[{tag}] {doc}" + (f" -- {detail}" if detail else ""))


CHANNELS = ["AF3", "AF4", "T7"]
GAME_HZ = {1: 3.0, 2: 6.0, 3: 10.0, 4: 20.0}  # dominant rhythm per class


def _recording(rng, label, seconds, fs=128):
    t = np.arange(int(seconds * fs)) / fs
    cols = []
    for k in range(len(CHANNELS)):
        f = GAME_HZ[label] + 0.25 * k
        cols.append(40 * np.sin(2 * np.pi * f * t) + rng.normal(0, 5, t.size) + 4000)
    return np.column_stack(cols)


@pytest.fixture
def fake_corpus(tmp_path):
    """2 players x 4 games of 40 s, 3 channels, class-specific dominant rhythm."""
    rng = np.random.default_rng(7)
    segs = []
    for player in (1, 2):
        for game in (1, 2, 3, 4):
            rel = f"S{player:02d}/G{game}.csv"
            (tmp_path / rel).parent.mkdir(exist_ok=True)
            write_raw_csv(tmp_path / rel, _recording(rng, game, 40), CHANNELS)
            segs.append({"player": player, "game": f"G{game}", "label": game, "path": rel})
    manifest = tmp_path / "manifest.yaml"
    manifest.write_text(yaml.safe_dump({"sampling_rate": 128, "channels": CHANNELS, "segments": segs}))
    return manifest
