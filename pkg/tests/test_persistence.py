import json
import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afforda.codecs import (
    RleMask,
    decode_rle,
    encode_rle,
    load_grayscale_mask,
    load_heatmap,
    load_trajectories,
    save_heatmap_png,
    save_mask_png,
    save_trajectories,
)
from afforda.core import AffordanceMap, BinaryMask, Trajectory3D
from afforda.errors import (
    BadCountsError,
    MissingFileError,
    NonFiniteError,
    ParseError,
    RaggedTrajectoryError,
    TornLogWarning,
    UnsupportedFormatError,
    ZeroMassError,
)
from afforda.logs import JsonlWriter, read_jsonl
from afforda.manifest import load_manifest, save_manifest


class TestRle:
    def test_all_zero(self):
        rle = encode_rle(BinaryMask.zeros(2, 2))
        assert rle.counts == (4,)

    def test_all_one(self):
        rle = encode_rle(BinaryMask.full(2, 2))
        assert rle.counts == (0, 4)

    def test_column_major_order(self):
        pixels = np.array([[True, False], [False, False]])
        rle = encode_rle(BinaryMask(pixels))
        assert rle.counts == (0, 1, 3)

    def test_random_round_trip(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            w = int(rng.integers(1, 24))
            h = int(rng.integers(1, 24))
            mask = BinaryMask(rng.random((h, w)) < rng.random())
            assert decode_rle(encode_rle(mask)) == mask

    def test_bad_counts(self):
        with pytest.raises(BadCountsError):
            decode_rle(RleMask(width=2, height=2, counts=(3,)))
        with pytest.raises(BadCountsError):
            decode_rle(RleMask(width=2, height=2, counts=(-1, 5)))

    @given(st.lists(st.booleans(), min_size=1, max_size=64),
           st.integers(1, 8))
    @settings(max_examples=50, deadline=None)
    def test_round_trip_property(self, bits, width):
        height = (len(bits) + width - 1) // width
        padded = bits + [False] * (width * height - len(bits))
        mask = BinaryMask(np.array(padded).reshape(height, width))
        assert decode_rle(encode_rle(mask)) == mask


class TestRasterCodecs:
    def test_mask_png_round_trip(self, tmp_path):
        rng = np.random.default_rng(1)
        mask = BinaryMask(rng.random((20, 30)) < 0.5)
        save_mask_png(mask, tmp_path / "m.png")
        assert load_grayscale_mask(tmp_path / "m.png") == mask

    def test_mask_popcount_matches_nonzero(self, tmp_path):
        from PIL import Image
        values = np.zeros((10, 10), dtype=np.uint8)
        values[2:4, 3:8] = 255
        Image.fromarray(values, mode="L").save(tmp_path / "m.png")
        assert load_grayscale_mask(tmp_path / "m.png").popcount == 10

    def test_rgb_rejected(self, tmp_path):
        from PIL import Image
        Image.new("RGB", (4, 4)).save(tmp_path / "c.png")
        with pytest.raises(UnsupportedFormatError):
            load_grayscale_mask(tmp_path / "c.png")

    def test_uniform_heatmap(self, tmp_path):
        from PIL import Image
        Image.fromarray(np.full((6, 6), 128, dtype=np.uint8), "L").save(
            tmp_path / "h.png")
        amap = load_heatmap(tmp_path / "h.png")
        normalized = amap.normalized_copy()
        assert np.abs(normalized.values - 1.0 / 36).max() <= 1e-12

    def test_zero_heatmap(self, tmp_path):
        from PIL import Image
        Image.fromarray(np.zeros((6, 6), dtype=np.uint8), "L").save(
            tmp_path / "z.png")
        with pytest.raises(ZeroMassError):
            load_heatmap(tmp_path / "z.png")

    def test_normalized_after_round_trip(self, tmp_path):
        rng = np.random.default_rng(2)
        amap = AffordanceMap(rng.random((12, 12)) + 0.01).normalized_copy()
        save_heatmap_png(amap, tmp_path / "a.png")
        back = load_heatmap(tmp_path / "a.png").normalized_copy()
        assert abs(back.total - 1.0) <= 1e-9


class TestTrajectories:
    def test_round_trip(self, tmp_path):
        trajs = [Trajectory3D(0, [(0.0, 1.0, 2.0), (1.0, 1.5, 2.5)]),
                 Trajectory3D(1, [(5.0, 5.0, 5.0), (6.0, 6.0, 6.0)])]
        save_trajectories(trajs, tmp_path / "t.json")
        back = load_trajectories(tmp_path / "t.json")
        assert len(back) == 2
        assert back[0].pixel_id == 0 and len(back[0]) == 2
        assert np.allclose(back[1].points, trajs[1].points)

    def test_nan_rejected(self, tmp_path):
        doc = {"trajectories": [
            {"pixel_id": 3, "points": [[0.0, 0.0, 0.0], [1.0, None, 1.0]]}]}
        (tmp_path / "bad.json").write_text(json.dumps(doc).replace("null", "NaN"))
        with pytest.raises(NonFiniteError) as err:
            load_trajectories(tmp_path / "bad.json")
        assert "pixel 3" in str(err.value) and "frame 1" in str(err.value)

    def test_ragged_rejected(self, tmp_path):
        doc = {"trajectories": [
            {"pixel_id": 0, "points": [[0, 0, 0], [1, 1, 1]]},
            {"pixel_id": 1, "points": [[0, 0, 0]]}]}
        (tmp_path / "r.json").write_text(json.dumps(doc))
        with pytest.raises(RaggedTrajectoryError):
            load_trajectories(tmp_path / "r.json")

    def test_short_point_rejected(self, tmp_path):
        doc = {"trajectories": [{"pixel_id": 0, "points": [[0, 0]]}]}
        (tmp_path / "s.json").write_text(json.dumps(doc))
        with pytest.raises(RaggedTrajectoryError):
            load_trajectories(tmp_path / "s.json")

    def test_empty_ok(self, tmp_path):
        (tmp_path / "e.json").write_text(json.dumps({"trajectories": []}))
        assert load_trajectories(tmp_path / "e.json") == []


class TestJsonlLog:
    def test_append_then_read(self, tmp_path):
        path = tmp_path / "log.jsonl"
        with JsonlWriter(path) as log:
            for i in range(3):
                log.append({"i": i})
        records = read_jsonl(path)
        assert [r["i"] for r in records] == [0, 1, 2]

    def test_concurrent_appends(self, tmp_path):
        path = tmp_path / "log.jsonl"
        log = JsonlWriter(path)

        def worker(worker_id):
            for i in range(100):
                log.append({"worker": worker_id, "i": i})

        threads = [threading.Thread(target=worker, args=(w,)) for w in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        log.close()
        records = read_jsonl(path)
        assert len(records) == 400
        per_worker = {}
        for record in records:
            per_worker.setdefault(record["worker"], []).append(record["i"])
        assert all(seq == list(range(100)) for seq in per_worker.values())

    def test_torn_tail_ignored_with_warning(self, tmp_path):
        path = tmp_path / "log.jsonl"
        with JsonlWriter(path) as log:
            for i in range(5):
                log.append({"i": i})
        with open(path, "a", encoding="utf-8") as fh:
            fh.write('{"i": 5, "tr')  # torn write: no newline
        with pytest.warns(TornLogWarning):
            records = read_jsonl(path)
        assert len(records) == 5

    def test_mid_file_corruption_is_error(self, tmp_path):
        path = tmp_path / "log.jsonl"
        path.write_text('{"a": 1}\nnot json\n{"b": 2}\n')
        with pytest.raises(ParseError):
            read_jsonl(path)


class TestManifest:
    def test_round_trip_byte_identical(self, fixture_dir, tmp_path):
        original = fixture_dir / "manifest.jsonl"
        manifest = load_manifest(original)
        copy1 = fixture_dir / "copy1.jsonl"
        save_manifest(manifest, copy1)
        assert copy1.read_bytes() == original.read_bytes()
        copy2 = fixture_dir / "copy2.jsonl"
        save_manifest(load_manifest(copy1), copy2)
        assert copy2.read_bytes() == copy1.read_bytes()

    def test_missing_file_lists_every_path(self, fixture_dir, tmp_path):
        manifest = load_manifest(fixture_dir / "manifest.jsonl")
        text = (fixture_dir / "manifest.jsonl").read_text()
        broken = text.replace("images/s1.png", "images/absent1.png") \
                     .replace("images/s2.png", "images/absent2.png")
        path = tmp_path / "broken.jsonl"
        path.write_text(broken)
        # referenced files live relative to the manifest, so copy the tree ref
        (tmp_path / "images").mkdir()
        (tmp_path / "maps").mkdir()
        with pytest.raises(MissingFileError) as err:
            load_manifest(path)
        assert len(err.value.paths) >= 2

    def test_duplicate_id_rejected(self, tmp_path):
        lines = [
            json.dumps({"kind": "manifest", "version": 1}),
            json.dumps({"kind": "sample", "id": "s", "instruction": "open the x",
                        "image": {"path": "i.png", "width": 4, "height": 4}}),
            json.dumps({"kind": "sample", "id": "s", "instruction": "open the y",
                        "image": {"path": "i.png", "width": 4, "height": 4}}),
        ]
        path = tmp_path / "m.jsonl"
        path.write_text("\n".join(lines) + "\n")
        from PIL import Image
        Image.new("L", (4, 4)).save(tmp_path / "i.png")
        with pytest.raises(ParseError) as err:
            load_manifest(path)
        assert "'s'" in str(err.value)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "m.jsonl"
        path.write_text(json.dumps({"kind": "manifest", "version": 99}) + "\n")
        with pytest.raises(ParseError):
            load_manifest(path)

    def test_random_manifests_round_trip(self, tmp_path):
        from PIL import Image
        rng = np.random.default_rng(9)
        Image.new("L", (4, 4)).save(tmp_path / "img.png")
        from afforda.manifest import Manifest, SampleRecord
        for trial in range(50):
            n = int(rng.integers(1, 6))
            samples = [
                SampleRecord(
                    id=f"s{trial}_{i}",
                    image_path="img.png", width=4, height=4,
                    instruction=f"open the thing{i}",
                    source=("real_world", "laboratory")[int(rng.integers(2))],
                    gt_direction=(1, 0, 0) if rng.random() < 0.5 else None,
                ) for i in range(n)]
            manifest = Manifest(version=1, samples=samples, root=tmp_path)
            path = tmp_path / f"m{trial}.jsonl"
            save_manifest(manifest, path)
            again = tmp_path / f"m{trial}b.jsonl"
            save_manifest(load_manifest(path), again)
            assert again.read_bytes() == path.read_bytes()
