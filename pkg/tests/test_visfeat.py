import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmsarc.corpus import Post
from mmsarc.vector import Block, DuplicateBlockError, FeatureVector, LayoutMismatch, concat, to_csr
from mmsarc.visfeat import (
    AVR_DIM,
    ConceptVocab,
    FeatureStore,
    ImageFeatures,
    MissingImage,
    UnknownConcept,
    post_image_block,
    read_avr,
    read_concepts,
    vsf_onehot,
    write_avr,
    write_concepts,
)

VOCAB = ConceptVocab(("a", "b", "head", "outside", "rain"))


def test_confidence_ignored():
    f = ImageFeatures("i", {"head": 0.9, "outside": 0.1})
    b = vsf_onehot(f, VOCAB)
    assert b.index_set() == {VOCAB.index("head"), VOCAB.index("outside")}
    assert list(b.values) == [1.0, 1.0]


def test_no_detections():
    assert vsf_onehot(ImageFeatures("i", {}), VOCAB).index_set() == set()


def test_unknown_concept():
    with pytest.raises(UnknownConcept):
        vsf_onehot(ImageFeatures("i", {"dragon": 1.0}), VOCAB)


def test_threshold_optional():
    f = ImageFeatures("i", {"head": 0.9, "outside": 0.1, "rain": None})
    assert vsf_onehot(f, VOCAB, threshold=0.5).index_set() == {VOCAB.index("head"), VOCAB.index("rain")}


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.sampled_from(VOCAB.names), st.floats(0, 1), max_size=5), st.randoms())
def test_vsf_invariant_to_confidence_and_order(det, rnd):
    items = list(det.items())
    rnd.shuffle(items)
    other = {k: rnd.random() for k, _ in items}
    assert vsf_onehot(ImageFeatures("i", det), VOCAB).index_set() == vsf_onehot(ImageFeatures("j", other), VOCAB).index_set()


def store(dim=4):
    imgs = {
        "x": ImageFeatures("x", {"a": 0.5}, np.full(dim, 1.0)),
        "y": ImageFeatures("y", {"b": 0.7}, np.full(dim, 3.0)),
    }
    return FeatureStore(imgs, VOCAB, dim)


def two_image_post(order=("x", "y")):
    return Post.from_text("p", "TU", "t", image_ids=list(order))


def test_union_and_mean():
    s = store()
    assert post_image_block(two_image_post(), s, "union", "vsf").index_set() == {0, 1}
    assert list(post_image_block(two_image_post(), s, "union", "avr").dense) == [2.0] * 4


def test_first_policy():
    s = store()
    assert post_image_block(two_image_post(), s, "first", "vsf").index_set() == {0}
    assert list(post_image_block(two_image_post(), s, "first", "avr").dense) == [1.0] * 4


def test_union_order_free():
    s = store()
    for kind in ("vsf", "avr"):
        a = post_image_block(two_image_post(("x", "y")), s, "union", kind).to_dense()
        b = post_image_block(two_image_post(("y", "x")), s, "union", kind).to_dense()
        np.testing.assert_array_equal(a, b)


def test_missing_image():
    with pytest.raises(MissingImage):
        post_image_block(two_image_post(("x", "nope")), store(), "union", "vsf")


def test_avr_dim_checked(tmp_path):
    write_avr({"x": np.arange(AVR_DIM, dtype=float)}, tmp_path / "ok.txt", AVR_DIM)
    assert read_avr(tmp_path / "ok.txt")["x"].shape == (AVR_DIM,)
    write_avr({"x": [1.0, 2.0]}, tmp_path / "small.txt", 2)
    with pytest.raises(ValueError):
        read_avr(tmp_path / "small.txt")


def test_file_round_trip(tmp_path):
    det = {"x": {"a": 0.25, "rain": None}, "y": {}}
    write_concepts(det, tmp_path / "c.txt")
    assert read_concepts(tmp_path / "c.txt") == det
    vec = {"x": [0.1, 1 / 3]}
    write_avr(vec, tmp_path / "a.txt", 2)
    assert read_avr(tmp_path / "a.txt", 2)["x"].tolist() == [0.1, 1 / 3]


def test_store_load_fixture(fixtures_dir):
    vocab = ConceptVocab.from_file(fixtures_dir / "concept_vocab.txt")
    s = FeatureStore.load(fixtures_dir / "concepts.txt", fixtures_dir / "avr8.txt", vocab, 8)
    assert s.vocab.size == 10 and all(f.avr.shape == (8,) for f in s.images.values() if f.avr is not None)


# --------------------------------------------------------------------------
# feature vectors


def test_layout_offsets():
    fv = FeatureVector.of(Block.from_dense("t", np.zeros(5)), Block.onehot("v", 3, [1]))
    assert fv.total_dim == 8
    assert fv.layout == {"t": (0, 5), "v": (5, 3)}
    assert fv.to_dense().tolist() == [0, 0, 0, 0, 0, 0, 1, 0]


def test_duplicate_block():
    with pytest.raises(DuplicateBlockError):
        concat([FeatureVector.of(Block.from_dense("t", [1.0])), FeatureVector.of(Block.from_dense("t", [2.0]))])


def test_concat_places_blocks(fixtures_dir):
    s = store()
    text = FeatureVector.of(Block.from_dense("lexical", [1.5, 0.0, 2.0, -1.0]))
    p = two_image_post()
    vsf = post_image_block(p, s, "union", "vsf")
    fv = concat([text, FeatureVector.of(vsf)])
    d = fv.to_dense()
    assert d[:4].tolist() == [1.5, 0.0, 2.0, -1.0]
    np.testing.assert_array_equal(d[4:], vsf.to_dense())


def test_sparse_index_bounds():
    with pytest.raises(ValueError):
        Block.onehot("v", 3, [3])


def test_csr_layout_mismatch():
    a = FeatureVector.of(Block.from_dense("t", [1.0]))
    b = FeatureVector.of(Block.from_dense("u", [1.0]))
    with pytest.raises(LayoutMismatch):
        to_csr([a, b])
