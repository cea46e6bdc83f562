import numpy as np
import pytest

import bubbledyn as bd


def test_tool_sets():
    draw = bd.drawing_tool_set()
    piv = bd.pivoting_tool_set()
    assert len(draw) == 8 and len(piv) == 8
    assert len({t.name for t in draw + piv}) == 16
    for t in draw + piv:
        assert 0.0 < t.extrusion_half_width < 0.05


def test_action_boxes():
    lo, hi = bd.drawing_action_box_lo_hi()
    assert np.all(np.asarray(lo) <= np.asarray(hi))
    lo, hi = bd.pivoting_action_box_lo_hi(0.01)
    assert np.all(np.asarray(lo) <= np.asarray(hi))
    # In table contact there is no room to move down.
    lo, _ = bd.pivoting_action_box_lo_hi(-0.003)
    assert lo[2] == 0.0


def test_sim_step_and_render():
    tool = bd.pivoting_tool_set()[0]
    sim = bd.MembraneSimulator(tool, bd.SimConfig(), seed=1)
    st = sim.make_grasp(bd.PoseAA.planar(0.0, 0.12, 0.0), width=0.016)
    assert sim.grip_force(0.016) > 0.0
    nxt = sim.sim_step(st, bd.Action4(0.016, 0.005, 0.0, 0.1))
    assert nxt.grasp_pose.position[1] == pytest.approx(0.005)
    maps = sim.render(nxt)
    assert maps.shape[0] == 2 and maps.dtype == np.float32
    assert maps.max() > 1e-4  # the grasp leaves a visible imprint
    # Same seed renders identically, different noise seeds differ.
    a = sim.render(nxt, noise=True, seed=5)
    b = sim.render(nxt, noise=True, seed=5)
    c = sim.render(nxt, noise=True, seed=6)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_pooling_roundtrip_shapes():
    rng = np.random.default_rng(0)
    full = rng.normal(0, 1e-3, size=(2, 175, 140)).astype(np.float32)
    pooled = bd.downsample(full)
    assert pooled.shape == (2, 25, 20)
    up = bd.upsample(pooled)
    assert up.shape == (2, 175, 140)
    # Pooling is a plain 7x7 block mean.
    ref = full.reshape(2, 25, 7, 20, 7).mean(axis=(2, 4))
    np.testing.assert_allclose(pooled, ref, atol=1e-7)


def test_scores():
    assert bd.pivoting_score(350.0, -10.0) == 0.0
    assert bd.pivoting_score(30.0, 50.0) == pytest.approx(20.0)
    meas = np.zeros((10, 10), dtype=np.uint8)
    goal = np.zeros((10, 10), dtype=np.uint8)
    meas[2, 2:6] = 1
    goal[2, 4:8] = 1
    on_line, coverage = bd.drawing_score(meas, goal)
    assert on_line == pytest.approx(0.5)
    assert coverage == pytest.approx(0.5)


def test_autoencoder_shapes():
    ae = bd.TactileAutoencoder(seed=3)
    pooled = np.random.default_rng(1).normal(0, 1e-3, (2, 25, 20)).astype(
        np.float32)
    z = ae.encode(pooled)
    assert z.shape == (15,)
    out = ae.decode(z)
    assert out.shape == (2, 25, 20)
