import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hck.formats import DatasetManifest, read_cloud
from hck.geometry import (CameraModel, DepthImage, LabeledPointCloud, build_distance_accelerator,
                          grid_mesh, merge_meshes)
from hck.geometry.camera import pixel_rays
from hck.synthesis import (ComposedScene, NoiseConfig, PlacementError, SynthConfig, compose_scene,
                           default_assets, filter_sparse, find_floor, generate_dataset,
                           generate_labeled_scene, make_body, make_room, place_humans,
                           render_scene, sample_cameras, scene_rng, simulate_kinect_noise)

SMALL = dict(width=160, height=120, fx=130.0)


def plane_depth(z, shape=(48, 64)):
    return DepthImage.from_array(np.full(shape, float(z)))


def cam64():
    return CameraModel(60, 60, 31.5, 23.5, 64, 48, np.eye(3), np.zeros(3))


# --- noise ----------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(z_near=5, z_far=1)
    with pytest.raises(ValueError):
        NoiseConfig(filter_size=0)
    with pytest.raises(ValueError):
        NoiseConfig(baseline=-1)


def test_near_identity_configuration(rng):
    cfg = NoiseConfig(sigma=0.0, scale_factor=1e9)
    out = simulate_kinect_noise(plane_depth(2.0), cam64(), cfg, rng)
    assert out.valid.all()
    assert np.abs(out.depth - 2.0).max() <= 1e-6


@pytest.mark.parametrize("z", [25.0, 0.005])
def test_out_of_range_invalid(z, rng):
    out = simulate_kinect_noise(plane_depth(z), cam64(), NoiseConfig(sigma=0.0), rng)
    assert not out.valid.any()


def slanted_depth(cam, rng):
    rows, cols = np.mgrid[0:cam.height, 0:cam.width]
    d = 1.5 + 0.01 * rows + 0.02 * cols + 0.3 * (cols > cam.width // 2)
    d[rng.random(d.shape) < 0.05] = 0
    return DepthImage.from_array(d)


@given(st.integers(0, 10_000))
def test_grid_subset_and_range(seed):
    rng = np.random.default_rng(seed)
    cam = cam64()
    cfg = NoiseConfig()
    src = slanted_depth(cam, rng)
    out = simulate_kinect_noise(src, cam, cfg, rng)
    assert np.all(~out.valid | src.valid)
    z = out.depth[out.valid]
    assert np.all((z >= cfg.z_near) & (z <= cfg.z_far))
    disp = cam.fx * cfg.baseline / z
    assert np.all(np.abs(disp * 100 - np.round(disp * 100)) <= 1e-9 * 100)
    assert np.all(out.depth[~out.valid] == 0)


def test_seeded_determinism():
    cam = cam64()
    src = slanted_depth(cam, np.random.default_rng(0))
    a = simulate_kinect_noise(src, cam, NoiseConfig(), np.random.default_rng(5))
    b = simulate_kinect_noise(src, cam, NoiseConfig(), np.random.default_rng(5))
    assert np.array_equal(a.depth, b.depth)


def test_coarse_step_keeps_validity():
    # zero noise and a step wider than the disparity span: nothing is invalidated
    cam = cam64()
    rows, cols = np.mgrid[0:cam.height, 0:cam.width]
    d = 2.0 + 0.002 * (rows + cols)
    d[np.random.default_rng(1).random(d.shape) < 0.05] = 0
    src = DepthImage.from_array(d)
    cfg = NoiseConfig(sigma=0.0, scale_factor=1.0)
    out = simulate_kinect_noise(src, cam, cfg, np.random.default_rng(0))
    d = cam.fx * cfg.baseline / src.depth[src.valid]
    assert d.max() - d.min() < 1.0
    assert np.array_equal(out.valid, src.valid)
    assert np.allclose(out.depth[out.valid], cam.fx * cfg.baseline / np.round(d))


def test_discontinuity_invalidates_edge():
    cam = cam64()
    # a 2-pixel sliver in front of a far wall: most of each window is far, so it drops out
    d = np.full(cam.shape, 4.0)
    d[:, 30:32] = 2.0
    out = simulate_kinect_noise(DepthImage.from_array(d), cam, NoiseConfig(sigma=0.0), np.random.default_rng(0))
    assert not out.valid[:, 30:32].any()
    assert out.valid[:, :26].all() and out.valid[:, 36:].all()


# --- placement ------------------------------------------------------------------------

def test_zero_humans():
    room = make_room(np.random.default_rng(0))
    comp = place_humans(room, [], SynthConfig(), np.random.default_rng(0))
    assert comp.bodies == () and comp.scene is room


def _disjoint(bodies):
    boxes = [b.mesh.bounds() for b in bodies]
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            (a0, a1), (b0, b1) = boxes[i], boxes[j]
            assert np.any((a1 <= b0) | (b1 <= a0))


def test_two_humans_disjoint(rng):
    floor = grid_mesh([0, 0, 0], [20, 0, 0], [0, 20, 0], 1, 1)
    humans = [make_body(rng, subdiv=1) for _ in range(2)]
    comp = place_humans(floor, humans, SynthConfig(), rng)
    assert [b.instance_id for b in comp.bodies] == [1, 2]
    _disjoint(comp.bodies)
    for b in comp.bodies:
        assert b.mesh.bounds()[0][2] == pytest.approx(0.0, abs=1e-12)


def test_ten_humans_in_ten_metre_room(rng):
    room = make_room(rng, size=(10.0, 10.0), n_furniture=0)
    humans = [make_body(rng, subdiv=1) for _ in range(10)]
    comp = place_humans(room, humans, SynthConfig(), rng)
    assert len(comp.bodies) == 10
    _disjoint(comp.bodies)
    fl = find_floor(room)
    for b in comp.bodies:
        lo, hi = b.mesh.bounds()
        assert np.all(lo[:2] >= fl.lo) and np.all(hi[:2] <= fl.hi)


def test_placement_failure_names_human(rng):
    floor = grid_mesh([0, 0, 0], [1.2, 0, 0], [0, 1.2, 0], 1, 1)
    humans = [make_body(rng, subdiv=1) for _ in range(3)]
    with pytest.raises(PlacementError, match="placement failed: human"):
        place_humans(floor, humans, SynthConfig(placement_retries=20, wall_margin=0.0), rng)


def test_floor_detection():
    room = make_room(np.random.default_rng(0), size=(6.0, 7.0), n_furniture=2)
    fl = find_floor(room)
    assert fl.height == 0.0
    assert np.allclose(fl.lo, [0, 0]) and np.allclose(fl.hi, [6, 7])


# --- labeled scenes ------------------------------------------------------------------

def small_scene(seed, n_humans=(1, 3)):
    rooms, bodies = default_assets(0, n_bodies=3, n_rooms=2)
    cfg = SynthConfig(humans_per_scene=n_humans, **SMALL)
    rng = scene_rng(seed, 0)
    _, comp = compose_scene(rooms, bodies, cfg, rng)
    return comp, rng


def test_zero_noise_masks_equal_render():
    comp, rng = small_scene(1)
    out = generate_labeled_scene(comp, None, rng, keep_renders=True)
    cloud, render = out.clouds[0], out.renders[0]
    prov = cloud.provenance
    img = np.zeros(render.instance.value.shape, int)
    img[prov[:, 1], prov[:, 2]] = cloud.instance
    assert np.array_equal(img, render.instance.value)
    assert len(cloud) == render.depth.valid.sum()


def test_labels_only_on_surviving_pixels():
    comp, rng = small_scene(2)
    out = generate_labeled_scene(comp, NoiseConfig(), rng, keep_renders=True)
    cloud, render = out.clouds[0], out.renders[0]
    prov = cloud.provenance
    assert np.all(render.depth.valid[prov[:, 1], prov[:, 2]])
    assert np.array_equal(cloud.instance, render.instance.value[prov[:, 1], prov[:, 2]])
    assert np.array_equal(cloud.part, render.part.value[prov[:, 1], prov[:, 2]])


def _human_distance_bound(comp, cloud, render, cam, cfg):
    prov = cloud.provenance
    z_true = render.depth.depth[prov[:, 1], prov[:, 2]]
    ray = np.linalg.norm(pixel_rays(cam, prov[:, 1], prov[:, 2]), axis=1)
    z_noisy = cam.to_camera(cloud.positions)[:, 2]
    return ray, z_true, z_noisy


def test_human_points_near_mesh_under_defaults():
    comp, rng = small_scene(3, (1, 1))
    cfg = NoiseConfig()
    out = generate_labeled_scene(comp, cfg, rng, keep_renders=True)
    cloud, render, cam = out.clouds[0], out.renders[0], comp.cameras[0]
    human = cloud.instance > 0
    if not human.any():
        pytest.skip("human fully invalidated in this view")
    ray, z_true, z_noisy = _human_distance_bound(comp, cloud, render, cam, cfg)
    acc = comp.bodies[0].accelerator
    d, _ = acc.query(cloud.positions[human])
    assert np.all(d <= 0.05 + ray[human] * np.abs(z_noisy - z_true)[human] + 1e-9)


def test_quantization_only_bound():
    comp, rng = small_scene(3, (1, 1))
    cfg = NoiseConfig(sigma=0.0)
    out = generate_labeled_scene(comp, cfg, rng, keep_renders=True)
    cloud, render, cam = out.clouds[0], out.renders[0], comp.cameras[0]
    human = cloud.instance > 0
    assert human.any()
    ray, z_true, _ = _human_distance_bound(comp, cloud, render, cam, cfg)
    fb = cam.fx * cfg.baseline
    disp = fb / z_true
    step_depth = fb / (disp - cfg.step) - fb / disp
    d, _ = comp.bodies[0].accelerator.query(cloud.positions[human])
    assert np.all(d <= 0.05 + (ray * step_depth)[human])


def test_filter_sparse_boundary():
    mk = lambda n: LabeledPointCloud(np.zeros((n, 3)))
    kept, log = filter_sparse([mk(19_999), mk(20_000)], 20_000)
    assert [len(c) for c in kept] == [20_000]
    assert log == [{"index": 0, "points": 19_999}]
    assert filter_sparse([], 20_000) == ([], [])


@given(st.lists(st.integers(0, 50), max_size=8), st.integers(0, 50))
def test_filter_sparse_property(sizes, m):
    kept, log = filter_sparse([LabeledPointCloud(np.zeros((n, 3))) for n in sizes], m)
    assert all(len(c) >= m for c in kept)
    assert len(kept) + len(log) == len(sizes)


# --- datasets ----------------------------------------------------------------------

def _dataset(tmp, n, seed, humans=(1, 3), workers=1, noise=None):
    rooms, bodies = default_assets(0, n_bodies=3, n_rooms=2)
    cfg = SynthConfig(humans_per_scene=humans, rng_seed=seed, min_points=0, **SMALL)
    return generate_dataset(rooms, bodies, cfg, noise, tmp, n, workers=workers)


def test_degenerate_human_range(tmp_path):
    m = _dataset(tmp_path, 4, 1, humans=(1, 1))
    assert all(s["humans"] == 1 for s in m.scenes if s["status"] == "ok")


def test_human_count_replay(tmp_path):
    m = _dataset(tmp_path, 50, 7, humans=(1, 10))
    recorded = [s.get("humans") for s in m.scenes]
    replay = [int(np.random.default_rng(np.random.SeedSequence(7, spawn_key=(i,))).integers(1, 11))
              for i in range(50)]
    ok = [s["status"] == "ok" for s in m.scenes]
    assert [r for r, o in zip(recorded, ok) if o] == [r for r, o in zip(replay, ok) if o]
    assert sum(ok) >= 40
    assert np.bincount([r for r, o in zip(recorded, ok) if o], minlength=11).sum() == sum(ok)


def test_manifest_contents(tmp_path):
    m = _dataset(tmp_path, 2, 3, noise=NoiseConfig())
    back = DatasetManifest.read(tmp_path / "manifest.json")
    back.validate(tmp_path)
    assert back.seed == 3 and back.configs["noise"]["scale_factor"] == 100.0
    for rec in back.clouds:
        assert len(read_cloud(tmp_path / rec.path)) == rec.points
    cams = json.loads((tmp_path / "scenes" / "scene_00000" / "cameras.json").read_text())
    assert CameraModel.from_dict(cams[0]).width == SMALL["width"]
