import numpy as np
import pytest

from afforda.core import BBox, BinaryMask, DiscreteDirection
from afforda.errors import (
    BackendError,
    BadKError,
    InvalidDirectionLabelError,
    UnparseableReplyError,
)
from afforda.loop import (
    Backends,
    LoopConfig,
    ReplayModelBackend,
    StubSegmentation,
    grid_partition,
    run_actor_initial,
    run_contact_stage,
    run_direction_stage,
    run_sample,
    run_verifier_best,
    run_verifier_diagnose,
    trace_records,
)
from afforda.loop import parsing
from afforda.loop.stages import Observation
from afforda.manifest import load_manifest


REJECT = ("VERDICT: reject\nSUGGESTED_PART: the handle\n"
          "APPEARANCE_AND_POSITION: metallic, upper-left\n"
          "RELATIVE_POSITION: left of the spout")


def make_backends(lines):
    return Backends(model=ReplayModelBackend(lines),
                    segmentation=StubSegmentation())


def load_sample(fixture_dir, index=0):
    manifest = load_manifest(fixture_dir / "manifest.jsonl")
    return manifest.samples[index].load(manifest.root)


def fake_observation(width=64, height=48):
    image = np.zeros((height, width, 3), dtype=np.uint8)
    from afforda.core import ImageRef
    return Observation(image=image, ref=ImageRef("x.png", width, height))


class TestParsing:
    def test_bbox(self):
        assert parsing.parse_bbox("(120, 80, 200, 160)") == BBox(120, 80, 200, 160)

    def test_bbox_in_prose(self):
        assert parsing.parse_bbox("I suggest x0=10, y0=20, x1=30, y1=44 here") \
            == BBox(10, 20, 30, 44)

    def test_bbox_invalid(self):
        assert parsing.parse_bbox("no coordinates at all") is None
        assert parsing.parse_bbox("(30, 20, 10, 44)") is None

    def test_candidate_set(self):
        assert parsing.parse_candidate_set("regions: 3, 7", 12) == (3, 7)

    def test_candidate_set_out_of_range(self):
        assert parsing.parse_candidate_set("regions: 3, 99", 12) is None

    def test_choice(self):
        assert parsing.parse_choice("I pick 2 of these") == 2
        assert parsing.parse_choice("none") is None

    def test_verdict_bare_approve(self):
        verdict, fields, degraded = parsing.parse_verdict("APPROVE")
        assert verdict == "approve" and not degraded

    def test_verdict_labelled_reject(self):
        verdict, fields, degraded = parsing.parse_verdict(REJECT)
        assert verdict == "reject" and not degraded
        assert fields["suggested_part"] == "the handle"
        assert fields["appearance_and_position"] == "metallic, upper-left"
        assert fields["relative_position"] == "left of the spout"

    def test_verdict_compact_reject(self):
        verdict, fields, degraded = parsing.parse_verdict(
            "reject: grasp the handle; metallic, upper-left; left of the spout")
        assert verdict == "reject" and not degraded
        assert fields["suggested_part"] == "grasp the handle"
        assert fields["relative_position"] == "left of the spout"

    def test_verdict_garbage_degrades(self):
        verdict, fields, degraded = parsing.parse_verdict("hmm, not sure!")
        assert verdict == "reject" and degraded

    def test_direction_reply(self):
        got = parsing.parse_direction_reply("I'd go [backward, upward, leftward].")
        assert got == DiscreteDirection(-1, -1, 1)
        assert parsing.parse_direction_reply("[sideways]") is None


class TestGridPartition:
    def test_four_tiles(self):
        tiles = grid_partition(100, 100, 4)
        assert len(tiles) == 4
        assert all(t.popcount == 2500 for t in tiles)

    def test_six_tiles_aspect(self):
        tiles = grid_partition(90, 60, 6)
        assert len(tiles) == 6
        assert all(t.popcount == 900 for t in tiles)

    def test_cover_and_disjoint(self):
        tiles = grid_partition(37, 23, 5)
        total = np.zeros((23, 37), dtype=int)
        for t in tiles:
            total += t.pixels
        assert (total == 1).all()

    def test_bad_k(self):
        with pytest.raises(BadKError):
            grid_partition(10, 10, 0)
        with pytest.raises(BadKError):
            grid_partition(3, 3, 11)  # prime > both dimensions


class TestActorVerifierOps:
    def test_initial_coordinate(self):
        backends = make_backends(["(120, 80, 200, 160)"])
        cfg = LoopConfig()
        prop = run_actor_initial(fake_observation(256, 256), "open the drawer",
                                 cfg, backends)
        assert prop.payload == BBox(120, 80, 200, 160)

    def test_initial_som(self):
        cfg = LoopConfig(mode="som")
        backends = make_backends(["regions: 3, 7"])
        obs = fake_observation()
        obs.partitions = backends.segmentation.partition(obs.image, 12)
        from afforda.loop import render_som_overlay
        obs.som_overlay = render_som_overlay(obs.image, obs.partitions)
        prop = run_actor_initial(obs, "open the drawer", cfg, backends)
        assert prop.payload == (3, 7)

    def test_unparseable_after_retry(self):
        backends = make_backends(["prose only", "still prose"])
        with pytest.raises(UnparseableReplyError):
            run_actor_initial(fake_observation(), "open the drawer",
                              LoopConfig(), backends)
        assert backends.model.consumed == 2

    def test_diagnose_approve(self):
        backends = make_backends(["APPROVE"])
        obs = fake_observation()
        from afforda.loop.stages import RegionProposal, _materialize_region
        prop = RegionProposal(step=0, payload=BBox(1, 1, 10, 10))
        _materialize_region(obs, prop, LoopConfig(), backends, None, "s")
        fb = run_verifier_diagnose(obs, "open the drawer", prop,
                                   LoopConfig(), backends)
        assert fb.verdict == "approve" and not fb.degraded

    def test_diagnose_garbage_degrades(self):
        backends = make_backends(["???"])
        obs = fake_observation()
        from afforda.loop.stages import RegionProposal, _materialize_region
        prop = RegionProposal(step=0, payload=BBox(1, 1, 10, 10))
        _materialize_region(obs, prop, LoopConfig(), backends, None, "s")
        fb = run_verifier_diagnose(obs, "open the drawer", prop,
                                   LoopConfig(), backends)
        assert fb.verdict == "reject" and fb.degraded

    def test_best_short_circuit(self):
        backends = make_backends([])
        from afforda.loop.stages import DirectionProposal
        choice = run_verifier_best(fake_observation(), "x",
                                   [DirectionProposal(0, DiscreteDirection(1, 0, 0))],
                                   LoopConfig(), backends, stage="direction")
        assert choice.index == 0
        assert backends.model.consumed == 0

    def test_best_picks_and_clamps(self):
        from afforda.loop.stages import DirectionProposal
        obs = fake_observation()
        obs.region_overlay = obs.image
        proposals = [DirectionProposal(i, DiscreteDirection(1, 0, 0))
                     for i in range(4)]
        choice = run_verifier_best(obs, "x", proposals, LoopConfig(),
                                   make_backends(["2"]), stage="direction")
        assert choice.index == 2 and not choice.clamped
        choice = run_verifier_best(obs, "x", proposals, LoopConfig(),
                                   make_backends(["9"]), stage="direction")
        assert choice.index == 3 and choice.clamped


class TestContactStage:
    def test_approve_first(self, fixture_dir):
        sample = load_sample(fixture_dir)
        backends = make_backends(["(10, 10, 40, 40)", "VERDICT: approve"])
        mask, trace = run_contact_stage(sample, LoopConfig(max_iterations=3),
                                        backends)
        assert len(trace.proposals) == 1
        assert len(trace.feedbacks) == 1
        assert trace.termination == "approved"
        assert trace.final_index == 0
        assert backends.model.consumed == 2
        assert mask.popcount > 0

    def test_always_reject_exhausts(self, fixture_dir):
        sample = load_sample(fixture_dir)
        lines = ["(10, 10, 20, 20)"]
        for i in range(3):
            lines += [REJECT, f"({12 + i}, 12, 30, 30)"]
        lines += [REJECT, "1"]
        backends = make_backends(lines)
        mask, trace = run_contact_stage(sample, LoopConfig(max_iterations=3),
                                        backends)
        assert len(trace.proposals) == 4
        assert len(trace.feedbacks) == 4
        assert all(f.verdict == "reject" for f in trace.feedbacks)
        assert trace.termination == "exhausted"
        assert trace.final_index == 1
        assert backends.model.consumed == 9  # 1 + 4 + 3 + 1

    def test_approve_at_second(self, fixture_dir):
        sample = load_sample(fixture_dir)
        lines = ["(10, 10, 20, 20)", REJECT, "(12, 12, 30, 30)",
                 "VERDICT: approve"]
        backends = make_backends(lines)
        _, trace = run_contact_stage(sample, LoopConfig(max_iterations=3),
                                     backends)
        assert len(trace.proposals) == 2
        assert trace.termination == "approved"
        assert trace.final_index == 1

    def test_stagnant_flag(self, fixture_dir):
        sample = load_sample(fixture_dir)
        lines = ["(10, 10, 20, 20)", REJECT, "(10, 10, 20, 20)",
                 "VERDICT: approve"]
        backends = make_backends(lines)
        _, trace = run_contact_stage(sample, LoopConfig(max_iterations=3),
                                     backends)
        assert "stagnant@1" in trace.flags

    def test_t_zero_goes_straight_to_best(self, fixture_dir):
        sample = load_sample(fixture_dir)
        backends = make_backends(["(10, 10, 20, 20)", REJECT])
        _, trace = run_contact_stage(sample, LoopConfig(max_iterations=0),
                                     backends)
        assert trace.termination == "exhausted"
        assert len(trace.proposals) == 1
        assert trace.final_index == 0  # short-circuit, no backend call
        assert backends.model.consumed == 2

    def test_som_stage(self, fixture_dir):
        sample = load_sample(fixture_dir)
        cfg = LoopConfig(mode="som", som_candidates=12)
        backends = make_backends(["regions: 1, 2", "VERDICT: approve"])
        mask, trace = run_contact_stage(sample, cfg, backends)
        expected = backends.segmentation.partition(
            np.zeros((sample.image.height, sample.image.width, 3), np.uint8), 12)
        assert mask.popcount == expected[0].popcount + expected[1].popcount

    def test_replay_exhaustion_is_backend_error(self, fixture_dir):
        sample = load_sample(fixture_dir)
        backends = make_backends(["(10, 10, 20, 20)"])
        with pytest.raises(BackendError):
            run_contact_stage(sample, LoopConfig(), backends)


class TestDirectionStage:
    def region(self, w=96, h=48):
        pixels = np.zeros((h, w), dtype=bool)
        pixels[10:20, 10:30] = True
        return BinaryMask(pixels)

    def test_approve_first(self, fixture_dir):
        sample = load_sample(fixture_dir)
        backends = make_backends(["[forward]", "VERDICT: approve"])
        direction, trace = run_direction_stage(sample, self.region(96, 72),
                                               LoopConfig(), backends)
        assert direction == DiscreteDirection(1, 0, 0)
        assert trace.termination == "approved"

    def test_invalid_label_after_retry(self, fixture_dir):
        sample = load_sample(fixture_dir)
        backends = make_backends(["[sideways]", "[sideways]"])
        with pytest.raises(InvalidDirectionLabelError):
            run_direction_stage(sample, self.region(96, 72), LoopConfig(),
                                backends)

    def test_always_reject(self, fixture_dir):
        sample = load_sample(fixture_dir)
        labels = ["[forward]", "[backward]", "[downward]", "[upward]"]
        lines = [labels[0]]
        for label in labels[1:]:
            lines += [REJECT, label]
        lines += [REJECT, "2"]
        backends = make_backends(lines)
        direction, trace = run_direction_stage(sample, self.region(96, 72),
                                               LoopConfig(max_iterations=3),
                                               backends)
        assert len(trace.proposals) == 4
        assert trace.termination == "exhausted"
        assert direction == DiscreteDirection(0, 1, 0)

    def test_empty_region_rejected(self, fixture_dir):
        sample = load_sample(fixture_dir)
        from afforda.errors import EmptyMaskError
        with pytest.raises(EmptyMaskError):
            run_direction_stage(sample, BinaryMask.zeros(96, 72), LoopConfig(),
                                make_backends([]))


class TestOrderingAndTrace:
    def test_direction_calls_after_contact_calls(self, fixture_dir):
        sample = load_sample(fixture_dir)
        lines = ["(10, 10, 40, 40)", "VERDICT: approve",
                 "[forward]", "VERDICT: approve"]
        backends = make_backends(lines)
        run_sample(sample, LoopConfig(), backends)
        prompts = [text for text, _ in backends.model.calls]
        direction_calls = [i for i, p in enumerate(prompts)
                           if "motion" in p.lower()]
        contact_calls = [i for i in range(len(prompts))
                         if i not in direction_calls]
        assert direction_calls and contact_calls
        assert max(contact_calls) < min(direction_calls)

    def test_trace_records_are_serializable(self, fixture_dir):
        import json
        sample = load_sample(fixture_dir)
        backends = make_backends(["(10, 10, 40, 40)", "VERDICT: approve"])
        _, trace = run_contact_stage(sample, LoopConfig(), backends)
        records = trace_records(sample.id, trace)
        assert records[-1]["termination"] == "approved"
        for record in records:
            json.dumps(record)

    def test_trace_integrity_invariants(self, fixture_dir):
        sample = load_sample(fixture_dir)
        lines = ["(10, 10, 20, 20)"]
        for i in range(3):
            lines += [REJECT, f"({12 + i}, 12, 30, 30)"]
        lines += [REJECT, "0"]
        _, trace = run_contact_stage(sample, LoopConfig(max_iterations=3),
                                     make_backends(lines))
        assert trace.termination == "exhausted"
        assert all(f.verdict == "reject" for f in trace.feedbacks)
        assert trace.final_index < len(trace.proposals)
        assert len(trace.feedbacks) in (len(trace.proposals) - 1,
                                        len(trace.proposals))
