import json

import numpy as np
import pytest

from lagtrend.features import build_gradient_matrix, make_labels
from lagtrend.panel import align_panel, build_panel, ingest_ticks
from lagtrend.sessions import SessionCalendar
from lagtrend.synth import (
    Dependency,
    LagStructure,
    SynthConfig,
    bayes_accuracy,
    bayes_accuracy_exact,
    calibrate_noise,
    default_structure,
    generate_panel,
    label_agreement,
    oracle_accuracy,
    panel_records,
    write_synthetic,
)

from oracles import phi


def single_driver(noise, seed=0):
    return LagStructure((Dependency("SYN001", ("SYN000",), (1.0,)),), noise_level=noise, seed=seed)


def test_noiseless_single_driver_follows_previous_driver_slope():
    synth = generate_panel(3, 300, 7, single_driver(0.0))
    g = build_gradient_matrix(synth.panel)
    driver = g.slopes[g.index("SYN000")]
    assert np.array_equal(synth.directions["SYN001"], (driver[:-1] > 0).astype(int))
    assert label_agreement(g, synth.directions)["SYN001"] == 1.0
    assert oracle_accuracy(g, synth.structure)["SYN001"] == 1.0


def test_huge_noise_decorrelates_directions():
    synth = generate_panel(3, 2000, 7, single_driver(1e6, seed=4))
    g = build_gradient_matrix(synth.panel)
    driver_up = (g.slopes[g.index("SYN000"), :-1] > 0).astype(float)
    corr = np.corrcoef(driver_up, synth.directions["SYN001"].astype(float))[0, 1]
    assert abs(corr) < 0.1


def test_generation_is_seeded():
    s = single_driver(0.3, seed=9)
    a, b = generate_panel(4, 40, 7, s), generate_panel(4, 40, 7, s)
    assert np.array_equal(a.panel.prices, b.panel.prices)
    assert np.array_equal(a.directions["SYN001"], b.directions["SYN001"])
    c = generate_panel(4, 40, 7, single_driver(0.3, seed=10))
    assert not np.array_equal(a.panel.prices, c.panel.prices)


def test_generated_panel_is_valid_and_already_aligned():
    synth = generate_panel(5, 30, 7, single_driver(0.5))
    panel = synth.panel
    assert np.all(panel.prices > 0) and panel.n_filled == 0
    again = align_panel(panel_records(panel), panel.grid, panel.instrument_ids)
    assert np.array_equal(again.prices, panel.prices)
    assert again.n_filled == 0


def test_labels_match_latent_directions_without_noise():
    structure = LagStructure(
        (Dependency("SYN009", ("SYN000", "SYN001", "SYN002"), (1.0, -1.0, 1.0)),
         Dependency("SYN008", ("SYN003", "SYN004"), (0.5, 2.0))),
        noise_level=0.0,
        seed=3,
    )
    synth = generate_panel(10, 400, 7, structure)
    g = build_gradient_matrix(synth.panel)
    for ric, truth in synth.directions.items():
        assert np.array_equal(make_labels(g.slopes[g.index(ric)])[:, 1], truth)


def test_class_balance_of_generated_labels():
    synth = generate_panel(6, 1000, 7, LagStructure((Dependency("SYN005", ("SYN000", "SYN001", "SYN002"), (1.0, 1.0, -1.0)),), 1.0, seed=2))
    g = build_gradient_matrix(synth.panel)
    for k in range(6):
        assert abs(make_labels(g.slopes[k])[:, 1].mean() - 0.5) <= 0.05


def test_bayes_accuracy_reference_values():
    assert bayes_accuracy(single_driver(0.0)) == 1.0
    assert bayes_accuracy_exact(single_driver(0.0)) == 1.0
    # signal +-1 against unit Gaussian noise survives with probability Phi(1)
    assert bayes_accuracy_exact(single_driver(1.0)) == pytest.approx(phi(1.0), abs=1e-12)
    assert bayes_accuracy(single_driver(1.0), realizations=200_000, seed=1) == pytest.approx(phi(1.0), abs=0.005)
    assert bayes_accuracy(single_driver(1e9), realizations=200_000) == pytest.approx(0.5, abs=0.005)


def test_calibrated_default_scenario():
    cfg = SynthConfig()
    structure = default_structure(cfg)
    assert bayes_accuracy_exact(structure) == pytest.approx(0.65, abs=1e-6)
    assert bayes_accuracy(structure, realizations=100_000) == pytest.approx(0.65, abs=0.01)
    assert len(structure.dependencies) == 10
    assert all(len(d.sources) == 3 for d in structure.dependencies)
    assert calibrate_noise(single_driver(0.0), phi(1.0)) == pytest.approx(1.0, rel=1e-6)


def test_structure_validation():
    ids = [f"SYN{i:03d}" for i in range(4)]
    bad = [
        LagStructure((Dependency("SYN001", ("SYN001",), (1.0,)),)),
        LagStructure((Dependency("SYN001", ("SYN000",), (1.0, 2.0)),)),
        LagStructure((Dependency("SYN001", ("SYN009",), (1.0,)),)),
        LagStructure((Dependency("SYN001", ("SYN000",), (float("inf"),)),)),
        LagStructure((Dependency("SYN001", ("SYN000",), (1.0,)),), noise_level=-1.0),
        LagStructure((Dependency("SYN001", ("SYN000",), (1.0,)), Dependency("SYN002", ("SYN001",), (1.0,)))),
    ]
    for structure in bad:
        with pytest.raises(ValueError):
            structure.validate(ids)
        with pytest.raises(ValueError):
            generate_panel(4, 30, 7, structure)
    with pytest.raises(ValueError):
        generate_panel(1, 30, 7, LagStructure(()))


def test_structure_round_trip():
    s = default_structure(SynthConfig(n_instruments=12, n_dependents=2, seed=5))
    assert LagStructure.from_dict(json.loads(json.dumps(s.to_dict()))) == s


def test_written_files_ingest_without_rejects(tmp_path):
    synth = generate_panel(4, 25, 7, single_driver(0.2))
    paths = write_synthetic(synth, tmp_path)
    result = ingest_ticks(paths["ticks"])
    assert result.n_rejected == 0 and len(result.records) == 4 * 25 * 7
    panel, summary = build_panel(paths["ticks"], SessionCalendar.load(paths["calendar"]))
    assert summary.discarded == [] and panel.n_filled == 0
    assert np.allclose(panel.prices, synth.panel.prices, rtol=1e-15, atol=0)
    truth = json.loads(paths["truth"].read_text())
    assert truth["directions"]["SYN001"] == synth.directions["SYN001"].tolist()
