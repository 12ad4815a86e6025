import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fame.synth import SynthConfig, generate  # noqa: E402


@pytest.fixture(scope="session")
def small_config():
    return SynthConfig(n_speakers=12, n_train=8, n_test=4, d_face=24, d_voice=20, identity_dim=6,
                       utterances_per_speaker_per_language=4, faces_per_speaker=2, n_trials=80, seed=3)


@pytest.fixture(scope="session")
def small_dataset(small_config):
    return generate(small_config)


@pytest.fixture(scope="session")
def small_keys(small_dataset):
    return small_dataset.keys()


# -- acceptance summary ---------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "setup" and report.skipped)
    if report.when == "call" or failed:
        details = [str(v) for k, v in item.user_properties if k == "detail"]
        crash = getattr(report.longrepr, "reprcrash", None)
        if report.failed and crash is not None:
            details.append(crash.message.splitlines()[0])
        detail = "; ".join(details)
        _ACCEPTANCE[number] = ("PASS" if report.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"[{status}] criterion {number}: {title}"
        terminalreporter.write_line(line + (f" ({detail})" if detail else ""))
