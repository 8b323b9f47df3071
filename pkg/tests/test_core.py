import numpy as np
import pytest
from hypothesis import given, strategies as st

from afforda.core import (
    AffordanceMap,
    BBox,
    BinaryMask,
    DiscreteDirection,
    FrameDetection,
    ImageRef,
    InteractionClip,
    Sample,
    parse_narration,
    select_peak_detection,
)
from afforda.errors import (
    EmptySideError,
    MissingArticleError,
    NoDetectionsError,
    ZeroMassError,
)


def make_clip(confidences, flags=None):
    n = len(confidences)
    flags = flags or [False] * n
    return InteractionClip(
        frames=tuple(ImageRef(f"f{i}.png", 8, 8) for i in range(n)),
        contact_index=n - 1,
        pre_contact_count=n - 1,
        detections=tuple(FrameDetection(confidence=c, contact=f)
                         for c, f in zip(confidences, flags)),
    )


class TestParseNarration:
    def test_canonical(self):
        ins = parse_narration("open the drawer")
        assert (ins.verb, ins.noun) == ("open", "drawer")

    def test_multiword_verb(self):
        ins = parse_narration("pick up the kettle")
        assert (ins.verb, ins.noun) == ("pick up", "kettle")

    def test_missing_article(self):
        with pytest.raises(MissingArticleError):
            parse_narration("drawer")

    def test_last_article_wins(self):
        ins = parse_narration("pick up the lid of the pot")
        assert (ins.verb, ins.noun) == ("pick up the lid of", "pot")

    def test_empty_sides(self):
        with pytest.raises(EmptySideError):
            parse_narration("the drawer")
        with pytest.raises(EmptySideError):
            parse_narration("open the")

    def test_lowercasing(self):
        ins = parse_narration("Open The Drawer")
        assert (ins.verb, ins.noun) == ("open", "drawer")

    @given(st.lists(st.sampled_from(["open", "lift", "pot", "red", "lid"]),
                    min_size=1, max_size=3),
           st.lists(st.sampled_from(["drawer", "pan", "door", "big", "jar"]),
                    min_size=1, max_size=3))
    def test_render_round_trip(self, verb_tokens, noun_tokens):
        raw = " ".join(verb_tokens) + " the " + " ".join(noun_tokens)
        ins = parse_narration(raw)
        assert ins.render() == " ".join(raw.lower().split())


class TestSelectPeakDetection:
    def test_argmax(self):
        assert select_peak_detection(make_clip([0.2, 0.9, 0.5])) == 1

    def test_tie_breaks_earliest(self):
        assert select_peak_detection(make_clip([0.7, 0.7])) == 0

    def test_no_detections(self):
        with pytest.raises(NoDetectionsError):
            select_peak_detection(make_clip([None, None]))

    def test_skips_missing(self):
        assert select_peak_detection(make_clip([None, 0.4, None])) == 1


class TestDiscreteDirection:
    def test_enumeration_is_26(self):
        values = DiscreteDirection.enumerate()
        assert len(values) == 26
        assert len(set(values)) == 26

    def test_zero_rejected(self):
        with pytest.raises(ValueError):
            DiscreteDirection(0, 0, 0)

    def test_components_validated(self):
        with pytest.raises(ValueError):
            DiscreteDirection(2, 0, 0)


class TestAffordanceMap:
    def test_normalized_invariant(self):
        with pytest.raises(ValueError):
            AffordanceMap(np.full((2, 2), 0.3), normalized=True)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            AffordanceMap(np.array([[-0.1, 1.0]]))

    def test_normalized_copy(self):
        amap = AffordanceMap(np.array([[1.0, 3.0]])).normalized_copy()
        assert amap.normalized
        assert abs(amap.total - 1.0) <= 1e-9

    def test_zero_mass(self):
        with pytest.raises(ZeroMassError):
            AffordanceMap(np.zeros((2, 2))).normalized_copy()

    def test_argmax_xy(self):
        values = np.zeros((3, 4))
        values[2, 1] = 1.0
        assert AffordanceMap(values).argmax() == (1, 2)


class TestClipInvariants:
    def test_contact_index_equals_pre_count(self):
        with pytest.raises(ValueError):
            InteractionClip(
                frames=(ImageRef("a.png", 4, 4), ImageRef("b.png", 4, 4)),
                contact_index=1, pre_contact_count=0)

    def test_mask_dimensions_checked(self):
        with pytest.raises(ValueError):
            InteractionClip(
                frames=(ImageRef("a.png", 4, 4),),
                contact_index=0, pre_contact_count=0,
                hand_masks=(BinaryMask.zeros(8, 8),))

    def test_sample_gt_dims(self):
        image = ImageRef("a.png", 4, 4)
        gt = AffordanceMap(np.full((2, 2), 0.25), normalized=True)
        with pytest.raises(ValueError):
            Sample(id="s", image=image,
                   instruction=parse_narration("open the door"), gt_map=gt)

    def test_bbox_validation(self):
        with pytest.raises(ValueError):
            BBox(5, 5, 5, 9)
        box = BBox(0, 0, 4, 4)
        assert box.contains(4, 4) and not box.contains(4.5, 2)
