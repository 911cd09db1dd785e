import numpy as np
import pytest

from helpers import random_pose
from posebench.colmap_io import (
    ImagePair,
    SfmImage,
    SfmModel,
    SfmPoint3D,
    covisibility,
    gt_relative_pose,
    parse_model,
    read_pairs_csv,
    sample_pairs,
    write_model_binary,
    write_model_text,
    write_pairs_csv,
)
from posebench.errors import (
    FormatError,
    MissingImage,
    NoValidPairs,
    UnsupportedCameraModel,
)
from posebench.geometry import CameraIntrinsics, Pose, rotation_about_axis


def _fixture_model(rng=None):
    """2 cameras, 3 images, 4 points; hand-checkable covisibility."""
    rng = rng or np.random.default_rng(0)
    model = SfmModel()
    model.cameras[1] = CameraIntrinsics(600.0, 580.0, 320.0, 240.0, 640, 480, model="PINHOLE")
    model.cameras[2] = CameraIntrinsics(500.0, 500.0, 200.0, 150.0, 400, 300, model="SIMPLE_PINHOLE")
    poses = [random_pose(rng) for _ in range(3)]
    # image 1 sees points 1,2,3 ; image 2 sees 2,3,4 ; image 3 sees 1,4
    seen = {1: [1, 2, 3], 2: [2, 3, 4], 3: [1, 4]}
    feats = {
        iid: np.array([[10.0 * i + iid, 5.0 * i] for i in range(len(pids) + 1)])
        for iid, pids in seen.items()
    }
    for iid, pids in seen.items():
        ids = np.array(pids + [-1], dtype=np.int64)  # one unmatched feature each
        model.images[iid] = SfmImage(f"im{iid}.png", poses[iid - 1], 1 if iid < 3 else 2, feats[iid], ids)
    tracks = {1: [(1, 0), (3, 0)], 2: [(1, 1), (2, 0)], 3: [(1, 2), (2, 1)], 4: [(2, 2), (3, 1)]}
    for pid, track in tracks.items():
        model.points3d[pid] = SfmPoint3D(
            np.array([0.1 * pid, -0.2 * pid, 3.0 + pid]),
            np.array([10 * pid, 20, 30], dtype=np.uint8),
            0.5,
            track,
        )
    model.validate()
    return model


def _models_equal(a: SfmModel, b: SfmModel):
    assert sorted(a.cameras) == sorted(b.cameras)
    for cid in a.cameras:
        ca, cb = a.cameras[cid], b.cameras[cid]
        assert (ca.fx, ca.fy, ca.cx, ca.cy, ca.width, ca.height, ca.model) == (
            cb.fx, cb.fy, cb.cx, cb.cy, cb.width, cb.height, cb.model,
        )
    assert sorted(a.images) == sorted(b.images)
    for iid in a.images:
        ia, ib = a.images[iid], b.images[iid]
        assert ia.name == ib.name
        assert ia.camera_id == ib.camera_id
        assert np.allclose(ia.pose.R, ib.pose.R, atol=1e-12)
        assert np.allclose(ia.pose.t, ib.pose.t, atol=1e-12)
        assert np.array_equal(ia.point3d_ids, ib.point3d_ids)
        assert np.allclose(ia.xys, ib.xys, atol=1e-12)
    assert sorted(a.points3d) == sorted(b.points3d)
    for pid in a.points3d:
        pa, pb = a.points3d[pid], b.points3d[pid]
        assert np.allclose(pa.xyz, pb.xyz, atol=1e-12)
        assert np.array_equal(pa.rgb, pb.rgb)
        assert pa.error == pytest.approx(pb.error, abs=1e-15)
        assert pa.track == pb.track


class TestParsing:
    def test_text_fixture_counts(self, tmp_path):
        model = _fixture_model()
        write_model_text(model, tmp_path)
        parsed = parse_model(tmp_path, format="text")
        assert (len(parsed.cameras), len(parsed.images), len(parsed.points3d)) == (2, 3, 4)

    def test_text_binary_field_for_field(self, tmp_path):
        model = _fixture_model()
        write_model_text(model, tmp_path / "t")
        write_model_binary(model, tmp_path / "b")
        pt = parse_model(tmp_path / "t")
        pb = parse_model(tmp_path / "b")
        _models_equal(pt, pb)
        _models_equal(pt, model)

    def test_auto_prefers_binary(self, tmp_path):
        model = _fixture_model()
        write_model_text(model, tmp_path)
        write_model_binary(model, tmp_path)
        parsed = parse_model(tmp_path)  # no error, picks binary
        _models_equal(parsed, model)

    def test_truncated_binary_reports_offset(self, tmp_path):
        model = _fixture_model()
        write_model_binary(model, tmp_path)
        full = (tmp_path / "images.bin").read_bytes()
        (tmp_path / "images.bin").write_bytes(full[: len(full) // 2])
        with pytest.raises(FormatError, match="offset"):
            parse_model(tmp_path, format="binary")

    def test_unsupported_camera_model(self, tmp_path):
        write_model_text(_fixture_model(), tmp_path)
        cams = (tmp_path / "cameras.txt").read_text().replace("PINHOLE", "OPENCV", 1)
        (tmp_path / "cameras.txt").write_text(cams)
        with pytest.raises(UnsupportedCameraModel):
            parse_model(tmp_path, format="text")

    def test_simple_radial_warns_and_drops_distortion(self, tmp_path):
        model = _fixture_model()
        write_model_text(model, tmp_path)
        lines = (tmp_path / "cameras.txt").read_text().splitlines()
        # rewrite camera 2 as SIMPLE_RADIAL with a distortion coefficient
        lines = [
            ln if not ln.startswith("2 ") else "2 SIMPLE_RADIAL 400 300 500 200 150 0.125"
            for ln in lines
        ]
        (tmp_path / "cameras.txt").write_text("\n".join(lines) + "\n")
        with pytest.warns(UserWarning, match="distortion"):
            parsed = parse_model(tmp_path, format="text")
        cam = parsed.cameras[2]
        assert cam.model == "SIMPLE_RADIAL"
        assert cam.fx == cam.fy == 500.0

    def test_comment_lines_tolerated(self, tmp_path):
        model = _fixture_model()
        write_model_text(model, tmp_path)
        for name in ("cameras.txt", "images.txt", "points3D.txt"):
            p = tmp_path / name
            p.write_text("# extra comment\n\n" + p.read_text())
        _models_equal(parse_model(tmp_path, format="text"), model)

    def test_missing_model(self, tmp_path):
        with pytest.raises(FormatError):
            parse_model(tmp_path)


class TestRelativePose:
    def test_same_image_gives_identity(self):
        model = _fixture_model()
        rel = gt_relative_pose(model, 1, 1)
        assert np.allclose(rel.R, np.eye(3), atol=1e-12)
        assert np.allclose(rel.t, 0, atol=1e-12)

    def test_pure_translation_convention(self):
        # image 2 is image 1 moved by world (1,0,0) with R1 = R2 = I:
        # world point X maps to X in cam1 and X - (1,0,0) in cam2
        model = SfmModel()
        model.cameras[1] = CameraIntrinsics(600, 600, 320, 240, 640, 480)
        model.images[1] = SfmImage("a", Pose(np.eye(3), np.zeros(3)), 1, np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
        model.images[2] = SfmImage("b", Pose(np.eye(3), -np.array([1.0, 0, 0])), 1, np.zeros((0, 2)), np.zeros(0, dtype=np.int64))
        rel = gt_relative_pose(model, 1, 2)
        X = np.array([0.3, 0.7, 5.0])
        via_world = model.images[2].pose.R @ X + model.images[2].pose.t
        via_rel = rel.R @ (model.images[1].pose.R @ X + model.images[1].pose.t) + rel.t
        assert np.allclose(via_world, via_rel, atol=1e-12)
        assert np.allclose(rel.t, [-1.0, 0.0, 0.0], atol=1e-12)

    def test_point_transport_oracle(self):
        rng = np.random.default_rng(3)
        model = _fixture_model(rng)
        rel = gt_relative_pose(model, 1, 2)
        p1, p2 = model.images[1].pose, model.images[2].pose
        for _ in range(100):
            X = rng.normal(size=3) * 5
            direct = p2.R @ X + p2.t
            chained = rel.R @ (p1.R @ X + p1.t) + rel.t
            assert np.abs(direct - chained).max() < 1e-10

    def test_inverse_composition_is_identity(self):
        model = _fixture_model(np.random.default_rng(4))
        ab = gt_relative_pose(model, 1, 2)
        ba = gt_relative_pose(model, 2, 1)
        comp = ab.compose(ba)  # applies ba then ab
        assert np.abs(comp.R - np.eye(3)).max() < 1e-10
        assert np.abs(comp.t).max() < 1e-10

    def test_missing_image(self):
        with pytest.raises(MissingImage):
            gt_relative_pose(_fixture_model(), 1, 99)


class TestCovisibility:
    def test_hand_counted_fixture(self):
        model = _fixture_model()
        ov = covisibility(model)
        # image1 sees {1,2,3}, image2 sees {2,3,4}: share 2 of min(3,3)
        assert ov[(1, 2)] == pytest.approx(2 / 3)
        # image1 vs image3: share {1} of min(3,2)
        assert ov[(1, 3)] == pytest.approx(1 / 2)
        assert ov[(2, 3)] == pytest.approx(1 / 2)

    def test_identical_observations_give_one(self):
        model = _fixture_model()
        # make image 2 observe exactly image 1's points
        model.images[2].point3d_ids = model.images[1].point3d_ids.copy()
        model.points3d = {
            1: SfmPoint3D(np.zeros(3), np.zeros(3, np.uint8), 0.0, [(1, 0), (2, 0)]),
            2: SfmPoint3D(np.zeros(3), np.zeros(3, np.uint8), 0.0, [(1, 1), (2, 1)]),
            3: SfmPoint3D(np.zeros(3), np.zeros(3, np.uint8), 0.0, [(1, 2), (2, 2)]),
        }
        model.images[1].point3d_ids = np.array([1, 2, 3, -1], dtype=np.int64)
        model.images[2].point3d_ids = np.array([1, 2, 3, -1], dtype=np.int64)
        model.images[3].point3d_ids = np.array([-1, -1], dtype=np.int64)
        ov = covisibility(model)
        assert ov[(1, 2)] == 1.0
        assert (1, 3) not in ov and (2, 3) not in ov

    def test_asymmetric_min_normalization(self):
        # |P1| = 10, |P2| = 4, shared = 2 -> 2 / 4 = 0.5
        model = SfmModel()
        model.cameras[1] = CameraIntrinsics(600, 600, 320, 240, 640, 480)
        ids1 = list(range(1, 11))
        ids2 = [1, 2, 101, 102]
        def img(name, ids):
            return SfmImage(name, Pose(np.eye(3), np.zeros(3)), 1,
                            np.zeros((len(ids), 2)), np.array(ids, dtype=np.int64))
        model.images[1] = img("a", ids1)
        model.images[2] = img("b", ids2)
        all_ids = sorted(set(ids1) | set(ids2))
        for pid in all_ids:
            track = []
            if pid in ids1:
                track.append((1, ids1.index(pid)))
            if pid in ids2:
                track.append((2, ids2.index(pid)))
            model.points3d[pid] = SfmPoint3D(np.zeros(3), np.zeros(3, np.uint8), 0.0, track)
        model.validate()
        ov = covisibility(model)
        assert ov[(1, 2)] == pytest.approx(0.5)
        assert 0.0 <= ov[(1, 2)] <= 1.0

    def test_symmetry_and_range(self):
        ov = covisibility(_fixture_model())
        for (i, j), v in ov.items():
            assert i < j
            assert 0.0 <= v <= 1.0


class TestSamplePairs:
    def test_fewer_available_than_requested(self):
        model = _fixture_model()
        pairs = sample_pairs(model, min_overlap=0.1, n=10, seed=0)
        assert len(pairs) == 3
        assert {(p.id1, p.id2) for p in pairs} == {(1, 2), (1, 3), (2, 3)}

    def test_deterministic_for_fixed_seed(self):
        model = _fixture_model()
        a = sample_pairs(model, n=2, seed=7)
        b = sample_pairs(model, n=2, seed=7)
        assert [(p.id1, p.id2) for p in a] == [(q.id1, q.id2) for q in b]

    def test_inclusive_threshold_boundary(self):
        model = _fixture_model()
        pairs = sample_pairs(model, min_overlap=0.5, n=10, seed=0)
        keys = {(p.id1, p.id2) for p in pairs}
        assert (1, 3) in keys and (2, 3) in keys  # overlap exactly 0.5

    def test_no_valid_pairs(self):
        with pytest.raises(NoValidPairs):
            sample_pairs(_fixture_model(), min_overlap=1.1, n=5, seed=0)

    def test_pair_csv_roundtrip(self, tmp_path):
        model = _fixture_model()
        pairs = sample_pairs(model, n=3, seed=1)
        path = tmp_path / "pairs.csv"
        write_pairs_csv(pairs, model, path)
        rows = read_pairs_csv(path)
        assert len(rows) == len(pairs)
        for row, pair in zip(rows, pairs):
            assert (row.id1, row.id2) == (pair.id1, pair.id2)
            assert row.overlap == pytest.approx(pair.overlap, abs=1e-15)
            assert np.allclose(row.gt_relative_pose.R, pair.gt_relative_pose.R, atol=1e-12)
            assert np.allclose(row.gt_relative_pose.t, pair.gt_relative_pose.t, atol=1e-12)


def test_image_pair_requires_canonical_order():
    with pytest.raises(ValueError):
        ImagePair(2, 1, 0.5, Pose(np.eye(3), np.zeros(3)))


def test_validate_catches_inconsistent_track(tmp_path):
    model = _fixture_model()
    model.points3d[1].track.append((2, 3))  # image 2 feature 3 is unmatched (-1)
    with pytest.raises(FormatError):
        model.validate()
