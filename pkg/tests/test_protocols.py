import json
import math

import numpy as np
import pytest

from nhsta.dynamics import IntegratorConfig
from nhsta.errors import IntegrationError, ParameterError
from nhsta.model import DiagonalSign
from nhsta.protocols import (
    ExperimentPreset,
    PresetNotFound,
    calibrate,
    get_preset,
    preset_registry,
    run_preset,
)


def test_registry_contents():
    names = [p.name for p in preset_registry()]
    assert names == ["NHS-a", "NHS-b", "NHS-c", "NHS-d", "CD-a", "CD-b", "CD-c", "CD-d"]
    assert len(set(names)) == len(names)
    for p in preset_registry():
        assert (p.params.omega_c, p.params.omega_m, p.params.epsilon_m, p.params.omega_d) == (85, 35, 50, 1)
        assert p.time_span == (0.0, 2.0)
    assert [get_preset(f"NHS-{k}").params.g_m for k in "abcd"] == [0.1, 0.3, 0.6, 1.0]
    assert [(get_preset(f"CD-{k}").params.kappa_c, get_preset(f"CD-{k}").params.kappa_m) for k in "abcd"] == [
        (1.0, 0.3), (1.0, 0.6), (1.0, 1.0), (2.0, 2.0)]


def test_lookup():
    assert get_preset("NHS-a").params.g_m == 0.1
    cd_d = get_preset("CD-d")
    assert (cd_d.params.kappa_c, cd_d.params.kappa_m) == (2.0, 2.0)
    assert cd_d.expected.kind == "above" and cd_d.expected.value == 0.999
    with pytest.raises(PresetNotFound):
        get_preset("NHS-z")


@pytest.mark.parametrize("preset", preset_registry(), ids=lambda p: p.name)
def test_serialization_round_trip(preset):
    doc = json.loads(json.dumps(preset.to_config()))
    assert ExperimentPreset.from_config(doc) == preset


def test_overrides_do_not_touch_registry():
    patched = get_preset("NHS-a").with_overrides(g_m=0.0)
    assert patched.params.g_m == 0.0 and get_preset("NHS-a").params.g_m == 0.1
    with pytest.raises(ParameterError):
        get_preset("NHS-a").with_overrides(gm=1.0)


def test_run_preset_zero_coupling():
    traj, summary = run_preset("CD-a", g_m=0.0)
    assert np.all(traj.p1r == 0.0)
    assert summary.endpoints["raw"]["p1r"] == 0.0 and summary.endpoints["period"]["p1r"] == 0.0


def test_run_preset_summary_reproducible():
    _, a = run_preset("CD-a", diagonal_sign=DiagonalSign.LOSS_GAIN)
    _, b = run_preset("CD-a", diagonal_sign=DiagonalSign.LOSS_GAIN)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    assert a.endpoints["period"]["t_end"] == pytest.approx(4 * math.pi)
    assert 0.0 <= a.min_tracking_fidelity <= 1.0


def test_run_preset_best_conventions():
    _, nhs = run_preset("NHS-a")
    assert nhs.endpoints["raw"]["p1r"] == pytest.approx(0.976, abs=0.02)
    _, cd = run_preset("CD-d", diagonal_sign="loss-gain")
    assert cd.endpoints["raw"]["p1r"] >= 0.999


def test_run_preset_pole_propagates():
    with pytest.raises(IntegrationError):
        run_preset("CD-c")
    # the shortcut schedule is 0/0 at zero detuning without coupling
    with pytest.raises(IntegrationError):
        run_preset("NHS-a", g_m=0.0)


def test_calibration_report():
    rep = calibrate(IntegratorConfig())
    assert len(rep["entries"]) == 8 * 2 * 3
    combos = {(e["preset"], e["time_convention"], e["diagonal_sign"]) for e in rep["entries"]}
    assert len(combos) == 48
    devs = [e["deviation"] for e in rep["entries"] if e["deviation"] is not None]
    assert devs and all(d >= 0 for d in devs)
    diverged = [e for e in rep["entries"] if e["status"] == "diverged"]
    assert {e["preset"] for e in diverged} == {"CD-c"}
    if not rep["nhs_a_within_0.05"]:
        assert "no convention match" in rep["flags"]
    json.dumps(rep, allow_nan=False)
