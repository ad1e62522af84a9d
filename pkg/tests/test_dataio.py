import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from r0gp import matca
from r0gp.dataio import (
    MobilityData,
    SweepSpec,
    build_contact_matrix,
    calibrate_alpha,
    generate_sweep,
    load_mobility,
    seir_from_mobility,
    sweep_manifest,
    synth_mobility,
)
from r0gp.errors import ContractError
from r0gp.r0core import r0_eigen

BASE = (0.1, 0.2, 0.1)


def test_identity_mobility():
    np.testing.assert_array_equal(build_contact_matrix(MobilityData(np.eye(2), [1.0, 1.0]), 1.0), np.eye(2))


def test_identical_rows_rank_one():
    P = np.tile([0.5, 0.3, 0.1], (3, 1))
    A = build_contact_matrix(MobilityData(P, [1.0, 2.0, 3.0]), 2.0)
    assert np.allclose(A, A[0, 0])
    assert np.linalg.matrix_rank(A) == 1


def test_contact_matrix_triple_loop():
    mob = synth_mobility(3, seed=5)
    P, alpha = mob.P, 0.7
    A = build_contact_matrix(mob, alpha)
    ref = np.zeros((3, 3))
    for i in range(3):
        for j in range(3):
            for k in range(3):
                ref[i, j] += alpha * P[i, k] * P[j, k]
    np.testing.assert_allclose(A, ref, rtol=1e-14)
    assert np.max(np.abs(A - A.T)) <= 1e-12


@pytest.mark.parametrize(
    "P, pop",
    [
        ([[0.9, 0.2], [0.1, 0.8]], [1.0, 1.0]),
        ([[-0.1, 0.0], [0.0, 1.0]], [1.0, 1.0]),
        ([[1.0]], [0.0]),
        ([[1.0]], [1.0, 2.0]),
    ],
)
def test_mobility_validation(P, pop):
    with pytest.raises(ContractError):
        MobilityData(P, pop)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_calibration_hits_target(seed):
    mob = synth_mobility(8, seed=seed)
    alpha = calibrate_alpha(mob, BASE)
    r0 = r0_eigen(seir_from_mobility(mob, alpha, *BASE).linearize())
    assert r0 == pytest.approx(2.5, rel=1e-9)


def test_calibration_linear_in_target():
    mob = synth_mobility(6, seed=1)
    assert calibrate_alpha(mob, BASE, target_r0=5.0) == pytest.approx(2 * calibrate_alpha(mob, BASE), rel=1e-12)


def test_calibration_one_region_closed_form():
    mob = MobilityData([[0.8]], [5000.0])
    b, _, d = BASE
    assert calibrate_alpha(mob, BASE) == pytest.approx(2.5 * d / (b * 5000.0 * 0.64), rel=1e-12)


def test_calibration_errors():
    mob = MobilityData(np.zeros((2, 2)), [1.0, 1.0])
    with pytest.raises(ContractError):
        calibrate_alpha(mob, BASE)
    with pytest.raises(ContractError):
        calibrate_alpha(synth_mobility(2), BASE, target_r0=0.0)


def test_synth_one_region():
    mob = synth_mobility(1, seed=3)
    assert mob.P.shape == (1, 1) and 0 < mob.P[0, 0] <= 1


@pytest.mark.parametrize("kind", ["gravity", "uniform-noise"])
def test_synth_deterministic(kind):
    a, b = synth_mobility(10, seed=42, kind=kind), synth_mobility(10, seed=42, kind=kind)
    np.testing.assert_array_equal(a.P, b.P)
    np.testing.assert_array_equal(a.populations, b.populations)
    assert not np.array_equal(a.P, synth_mobility(10, seed=43, kind=kind).P)


@pytest.mark.parametrize("kind", ["gravity", "uniform-noise"])
def test_synth_58_structure(kind):
    mob = synth_mobility(58, seed=0, kind=kind)
    rows = mob.P.sum(axis=1)
    assert np.all(rows > 0) and np.all(rows <= 1 + 1e-12)
    off = mob.P - np.diag(np.diag(mob.P))
    assert np.all(np.diag(mob.P)[:, None] >= off)
    assert mob.populations.min() >= 1e4 and mob.populations.max() <= 1e7


def test_synth_unknown_kind():
    with pytest.raises(ContractError):
        synth_mobility(3, kind="radiation")


def test_default_sweep():
    triples = generate_sweep()
    assert len(triples) == 2000
    betas = sorted({t[0] for t in triples})
    assert len(betas) == 20
    assert betas[0] == pytest.approx(0.025) and betas[-1] == pytest.approx(0.5)
    assert {len({t[1] for t in triples}), len({t[2] for t in triples})} == {10}
    assert min(t[2] for t in triples) == pytest.approx(0.05)


def test_single_triple_sweep():
    assert generate_sweep(SweepSpec([0.1], [0.2], [0.3])) == [(0.1, 0.2, 0.3)]


def test_sweep_order_beta_slowest():
    tr = generate_sweep(SweepSpec.linear((0.1, 0.2, 2), (0.3, 0.4, 2), (0.5, 0.6, 2)))
    assert [t[0] for t in tr] == [0.1] * 4 + [0.2] * 4
    assert tr[1] == (0.1, 0.3, 0.6)


@pytest.mark.parametrize("grid", [[], [0.1, -0.2], [np.nan]])
def test_sweep_spec_validation(grid):
    with pytest.raises(ContractError):
        SweepSpec(grid, [0.2], [0.1])


def test_sweep_r0_span():
    mob = synth_mobility(5, seed=0)
    alpha = calibrate_alpha(mob, BASE)
    r0 = [seir_from_mobility(mob, alpha, *t).r0() for t in generate_sweep()]
    assert min(r0) <= 0.5 and max(r0) >= 10


@settings(max_examples=30, deadline=None)
@given(b=st.floats(0.01, 1), g=st.floats(0.01, 1), d=st.floats(0.01, 1), seed=st.integers(0, 1000))
def test_calibrated_r0_scaling(b, g, d, seed):
    mob = synth_mobility(4, seed=seed)
    alpha = calibrate_alpha(mob, BASE)
    r0 = seir_from_mobility(mob, alpha, b, g, d).r0()
    assert r0 == pytest.approx(2.5 * (b / 0.1) * (0.1 / d), rel=1e-9)


def test_manifest(tmp_path):
    p = tmp_path / "manifest.json"
    doc = sweep_manifest([(0.1, 0.2, 0.3), (0.4, 0.5, 0.6)], p)
    assert json.loads(p.read_text()) == doc
    assert doc["models"][1] == {"id": 1, "beta": 0.4, "gamma": 0.5, "delta": 0.6}


def test_load_mobility_roundtrip(tmp_path):
    mob = synth_mobility(4, seed=7)
    pp, pop = tmp_path / "P.csv", tmp_path / "pop.csv"
    matca.write_matrix_csv(pp, mob.P)
    pop.write_text("\n".join(repr(float(v)) for v in mob.populations) + "\n")
    back = load_mobility(pp, pop)
    np.testing.assert_array_equal(back.P, mob.P)
    np.testing.assert_array_equal(back.populations, mob.populations)
