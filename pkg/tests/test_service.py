import json
import threading
from datetime import timedelta

import pytest
from fastapi.testclient import TestClient

from fame.service import AuthError, PhaseConfig, PhaseService, load_config
from fame.service.app import create_app
from fame.service.store import LOG_NAME, SubmissionRecord

from service_helpers import ADMIN, T0, FakeClock, bundles, phases


@pytest.fixture
def env(tmp_path, small_keys, small_dataset):
    clock = FakeClock()
    svc = PhaseService(tmp_path / "data", admin_token=ADMIN, phases=phases(), clock=clock)
    layout, archives = bundles(small_keys, small_dataset.languages)
    svc.load_keys("progress", small_keys, layout, ADMIN)
    svc.load_keys("evaluation", small_keys, layout, ADMIN)
    tokens = {t: svc.register_team(t, t.title(), ADMIN, token=f"tok-{t}") for t in ("alpha", "beta")}
    return svc, clock, archives, tokens, layout


def test_daily_limit_progress(env):
    svc, clock, archives, tokens, _ = env
    results = [svc.submit(tokens["alpha"], archives["noisy"]) for _ in range(11)]
    assert all(r.counted for r in results[:10])
    assert results[10].reason == "daily_limit" and not results[10].counted
    clock.advance(days=1)
    assert svc.submit(tokens["alpha"], archives["noisy"]).counted
    # other teams have their own quota
    assert svc.submit(tokens["beta"], archives["noisy"]).counted


def test_total_limit_progress(env):
    svc, clock, archives, tokens, _ = env
    for day in range(10):
        for _ in range(10):
            assert svc.submit(tokens["alpha"], archives["noisy"]).counted
        clock.advance(days=1)
    assert svc.submit(tokens["alpha"], archives["noisy"]).reason == "total_limit"


def test_evaluation_limit(env):
    svc, clock, archives, tokens, _ = env
    clock.now = phases()["evaluation"].start
    results = [svc.submit(tokens["alpha"], archives["noisy"]) for _ in range(6)]
    assert [r.counted for r in results] == [True] * 5 + [False]
    assert results[5].reason == "total_limit"
    assert all(r.phase == "evaluation" for r in results)


def test_admin_lowered_evaluation_limit(env):
    svc, clock, archives, tokens, _ = env
    ev = phases()["evaluation"]
    svc.set_phase_config(PhaseConfig(**{**ev.__dict__, "max_total": 2}), ADMIN)
    clock.now = ev.start
    assert [svc.submit(tokens["alpha"], archives["noisy"]).counted for _ in range(3)] == [True, True, False]


def test_window_boundaries(env):
    svc, clock, archives, tokens, _ = env
    ev_end = phases()["evaluation"].end
    clock.now = ev_end
    assert svc.submit(tokens["alpha"], archives["noisy"]).counted
    clock.now = ev_end + timedelta(seconds=1)
    record = svc.submit(tokens["alpha"], archives["noisy"])
    assert record.reason == "outside_window" and record.phase is None and not record.counted
    clock.now = T0 - timedelta(seconds=1)
    assert svc.submit(tokens["alpha"], archives["noisy"]).reason == "outside_window"


def test_invalid_submissions_do_not_count(env):
    svc, clock, archives, tokens, _ = env
    for _ in range(5):
        r = svc.submit(tokens["alpha"], archives["broken"])
        assert r.reason.startswith("invalid") and not r.counted
    assert sum(svc.submit(tokens["alpha"], archives["noisy"]).counted for _ in range(10)) == 10




def test_auth(env):
    svc, _, archives, _, _ = env
    with pytest.raises(AuthError):
        svc.submit("wrong", archives["noisy"])
    with pytest.raises(AuthError):
        svc.register_team("gamma", "Gamma", "not-admin")
    with pytest.raises(AuthError):
        svc.export_audit(None)


def test_leaderboard_order_and_ties(env):
    svc, clock, archives, tokens, _ = env
    assert svc.leaderboard("progress")["entries"] == []
    svc.submit(tokens["beta"], archives["constant"])
    clock.advance(seconds=5)
    svc.submit(tokens["alpha"], archives["noisy"])
    clock.advance(seconds=5)
    svc.submit(tokens["beta"], archives["noisy"])  # ties alpha's best but later
    board = svc.leaderboard("progress")["entries"]
    assert [e["team_id"] for e in board] == ["alpha", "beta"]
    assert board[0]["best_overall"] == board[1]["best_overall"]
    assert board[1]["n_submissions"] == 2


def _inject(svc, team, overall, when, sub_id):
    report = {"overall": round(overall, 4), "overall_full": overall, "overall_display": "",
              "configurations": {}, "languages": [], "warnings": []}
    rec = SubmissionRecord(sub_id, team, when, "progress", "0" * 64, "scored", True, report=report)
    with svc._lock:
        svc._append("submission", rec.to_dict())


def test_leaderboard_table_values(env):
    svc, *_ = env
    _inject(svc, "beta", 40.25, "2025-09-01T09:00:00Z", "s1")
    _inject(svc, "alpha", 33.35, "2025-09-01T10:00:00Z", "s2")
    assert [e["team_id"] for e in svc.leaderboard("progress")["entries"]] == ["alpha", "beta"]


def test_leaderboard_tie_earlier_first(env):
    svc, *_ = env
    _inject(svc, "beta", 33.35, "2025-09-01T10:00:00Z", "s1")
    _inject(svc, "alpha", 33.35, "2025-09-01T09:00:00Z", "s2")
    assert [e["team_id"] for e in svc.leaderboard("progress")["entries"]] == ["alpha", "beta"]


def test_evaluation_leaderboard_hidden_until_end(env):
    svc, clock, archives, tokens, _ = env
    ev = phases()["evaluation"]
    clock.now = ev.start
    svc.submit(tokens["alpha"], archives["noisy"])
    assert svc.leaderboard("evaluation") == {"phase": "evaluation", "hidden": True, "entries": []}
    clock.now = ev.end + timedelta(seconds=1)
    assert len(svc.leaderboard("evaluation")["entries"]) == 1


def test_concurrent_submits_respect_daily_limit(env):
    svc, _, archives, tokens, _ = env
    barrier = threading.Barrier(50)
    out = []

    def worker():
        barrier.wait()
        out.append(svc.submit(tokens["alpha"], archives["noisy"]))

    threads = [threading.Thread(target=worker) for _ in range(50)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert sum(r.counted for r in out) == 10
    assert len(svc.export_audit(ADMIN)["submissions"]) == 50


def test_restart_and_snapshot_recovery(tmp_path, small_keys, small_dataset):
    clock = FakeClock()
    data = tmp_path / "svc"
    svc = PhaseService(data, admin_token=ADMIN, phases=phases(), clock=clock, snapshot_every=4)
    layout, archives = bundles(small_keys, small_dataset.languages)
    svc.load_keys("progress", small_keys, layout, ADMIN)
    token = svc.register_team("alpha", "Alpha", ADMIN)
    for i in range(13):
        svc.submit(token, archives["noisy" if i % 2 else "perfect"])
    before = svc.export_audit(ADMIN)
    svc.close()
    assert (data / "snapshot.json").exists()
    again = PhaseService(data, admin_token=ADMIN, phases=phases(), clock=clock, snapshot_every=4)
    assert again.export_audit(ADMIN) == before
    # full replay without the snapshot gives the same state
    (data / "snapshot.json").unlink()
    again.close()
    third = PhaseService(data, admin_token=ADMIN, phases=phases(), clock=clock)
    assert third.export_audit(ADMIN) == before
    assert third.submit(token, archives["noisy"]).reason == "daily_limit"


def test_torn_write_and_tamper_detection(tmp_path, small_keys, small_dataset):
    clock = FakeClock()
    data = tmp_path / "svc"
    svc = PhaseService(data, admin_token=ADMIN, phases=phases(), clock=clock)
    layout, archives = bundles(small_keys, small_dataset.languages)
    svc.load_keys("progress", small_keys, layout, ADMIN)
    token = svc.register_team("alpha", "Alpha", ADMIN)
    svc.submit(token, archives["noisy"])
    before = svc.export_audit(ADMIN)
    svc.close()
    with open(data / LOG_NAME, "a") as fh:
        fh.write('{"seq": 99, "type": "subm')
    recovered = PhaseService(data, admin_token=ADMIN, phases=phases(), clock=clock)
    assert recovered.export_audit(ADMIN) == before
    recovered.close()
    lines = (data / LOG_NAME).read_text().splitlines(keepends=True)
    rec = json.loads(lines[-1])
    rec["data"]["counted"] = False
    lines[-1] = json.dumps(rec) + "\n"
    (data / LOG_NAME).write_text("".join(lines))
    with pytest.raises(RuntimeError):
        PhaseService(data, admin_token=ADMIN, phases=phases(), clock=clock)


# -- HTTP ----------------------------------------------------------------------


def _walk(obj):
    if isinstance(obj, dict):
        for k, v in obj.items():
            yield k
            yield from _walk(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from _walk(v)
    else:
        yield obj


def test_http_flow_and_ground_truth_isolation(tmp_path, small_keys, small_dataset):
    clock = FakeClock()
    svc = PhaseService(tmp_path / "http", admin_token=ADMIN, clock=clock)
    client = TestClient(create_app(svc))
    admin = {"Authorization": f"Bearer {ADMIN}"}
    for name, cfg in phases().items():
        r = client.post("/api/v1/admin/phase", json=cfg.to_dict(), headers=admin)
        assert r.status_code == 200
    layout, archives = bundles(small_keys, small_dataset.languages)
    r = client.post("/api/v1/admin/keys", headers=admin, json={
        "phase": "progress", "languages": list(layout.languages), "configurations": small_keys.to_texts()})
    assert r.status_code == 200, r.text
    assert client.post("/api/v1/admin/keys", json={}, headers={"Authorization": "Bearer x"}).status_code == 401
    bad = client.post("/api/v1/admin/keys", headers=admin, json={"phase": "progress",
                                                                  "languages": ["A", "B"], "configurations": {}})
    assert bad.status_code == 400

    r = client.post("/api/v1/admin/teams", headers=admin, json={"team_id": "alpha"})
    token = r.json()["token"]
    team = {"Authorization": f"Bearer {token}"}

    responses = []
    r = client.post("/api/v1/submissions", files={"archive": ("s.zip", archives["noisy"])}, headers=team)
    assert r.status_code == 201
    body = r.json()
    responses.append(body)
    assert set(body["report"]["configurations"]) == {"English_heard", "English_unheard",
                                                     "German_heard", "German_unheard"}
    r = client.post("/api/v1/submissions", files={"archive": ("s.zip", archives["broken"])}, headers=team)
    assert r.status_code == 422
    responses.append(r.json())
    assert client.post("/api/v1/submissions", files={"archive": ("s.zip", archives["noisy"])}).status_code == 401

    got = client.get(f"/api/v1/submissions/{body['submission_id']}", headers=team)
    assert got.json() == body
    responses.append(got.json())
    board = client.get("/api/v1/leaderboard", params={"phase": "progress"}).json()
    responses.append(board)
    assert board["entries"][0]["team_id"] == "alpha"
    assert client.get("/api/v1/leaderboard", params={"phase": "nope"}).status_code == 400

    # no response carries per-trial labels
    truth_lines = {f"{p} {int(l)}" for e in small_keys.entries.values() for p, l in e.truth.labels.items()}
    trial_ids = {p for e in small_keys.entries.values() for p in e.truth.labels}
    for resp in responses:
        values = set(map(str, _walk(resp)))
        assert not values & trial_ids
        assert not values & truth_lines
        assert "labels" not in values and "truth" not in values


def test_load_config_env_overrides(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"service": {"port": 9000, "data_dir": "x", "phases": {
        "progress": {"start": "2025-09-01T00:00:00Z", "end": "2025-10-31T23:59:59Z"}}}}))
    cfg = load_config(cfg_path, env={"FAME_PORT": "9100", "FAME_ADMIN_TOKEN": "t"})
    assert cfg.port == 9100 and cfg.admin_token == "t" and str(cfg.data_dir) == "x"
    progress = cfg.phases["progress"]
    assert (progress.max_total, progress.max_per_day) == (100, 10)
    ev = PhaseConfig.from_dict("evaluation", {"start": "2025-11-01T00:00:00Z", "end": "2025-11-15T23:59:59Z"})
    assert (ev.max_total, ev.max_per_day, ev.hide_until_end) == (5, None, True)
