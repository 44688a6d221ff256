import json

import numpy as np
import pytest

import src.graph.features as gf
import src.ir.module as im
import src.ir.vocab as vo
from src.errors import FeatureOverflow, FormatError, UsageError
from src.graph.kinds import NodeKind

SPEC = gf.FeatureSpec()


@pytest.mark.parametrize('value, bucket', [
    (None, 0), (0, 1), (0.25, 2), (1, 3), (3, 4), (255, 6), (256, 7), (2 ** 40, 9), (-1, 10), (-300, 14), (-2.0, 11),
    (2 ** 64, 9), (1e30, 9), (float('inf'), 9), (-(2 ** 127), 16), (-float('inf'), 16), (float('nan'), 17),
])
def test_magnitude_bucket(value, bucket):
    assert gf.magnitude_bucket(value, SPEC) == bucket


def test_magnitude_classes_cover_every_number():
    """The top class of each sign has no upper bound and NaN has its own slot"""
    assert SPEC.magnitude_buckets == 18
    assert gf.magnitude_bucket(10 ** 400, SPEC) == gf.magnitude_bucket(2 ** 32, SPEC)
    assert gf.magnitude_bucket(float('nan'), SPEC) == SPEC.magnitude_buckets - 1
    assert SPEC.width(NodeKind.VALUE) == len(SPEC.value_kinds) + 1 + 18


@pytest.mark.parametrize('alignment, bucket', [(None, 0), (1, 1), (4, 3), (16, 5), (64, 7), (3, 8), (128, 8)])
def test_alignment_bucket(alignment, bucket):
    assert gf.alignment_bucket(alignment, SPEC) == bucket


@pytest.mark.parametrize('bits, bucket', [(None, 0), (1, 1), (8, 3), (16, 5), (32, 7), (33, 8), (64, 9), (128, 10),
                                          (256, 11)])
def test_bit_width_bucket(bits, bucket):
    assert gf.bit_width_bucket(bits, SPEC) == bucket


def test_size_bucket():
    """Sizes fall into log2 classes below the limit"""
    assert [gf.size_bucket(size, SPEC) for size in (0, 1, 2, 3, 4, 8, 65535)] == [0, 1, 2, 2, 3, 4, 16]
    with pytest.raises(FeatureOverflow):
        gf.size_bucket(65536, SPEC)
    assert gf.size_bucket(1 << 20, SPEC, lenient=True) == SPEC.size_buckets - 1


def test_widths_follow_layouts():
    for kind in NodeKind:
        assert SPEC.width(kind) == sum(width for _, width in SPEC.layout(kind))
    assert SPEC.width(NodeKind.MODULE) == 1
    assert SPEC.label_width(NodeKind.INSTRUCTION) == len(vo.Opcode)


def test_value_encoding_is_one_hot_per_field():
    """A constant sets its kind slot, the constant flag and one magnitude slot"""
    value = im.ValueInfo('i32 5', im.ValueKind.CONSTANT_INT, im.I32, constant_payload='5')
    row = gf.encode_node_features(NodeKind.VALUE, value, SPEC)
    assert row.dtype == np.float32
    assert row.shape == (SPEC.width(NodeKind.VALUE),)
    assert row.sum() == 3
    assert row[list(SPEC.value_kinds).index('constant_int')] == 1


def test_attribute_encoding_sets_every_entry():
    entries = frozenset({'nounwind', 'internal'})
    row = gf.encode_node_features(NodeKind.ATTRIBUTES, entries, SPEC)
    assert row.sum() == 2


def test_unknown_attributes_share_the_other_slot():
    row = gf.encode_node_features(NodeKind.ATTRIBUTES, frozenset({'not-an-attribute'}), SPEC)
    assert row[-1] == 1 and row.sum() == 1


def test_spec_json_round_trip(tmp_path):
    """A written spec reads back equal, with the same digest"""
    path = tmp_path / 'features.json'
    path.write_text(json.dumps(SPEC.to_json()))
    loaded = gf.load_feature_spec(path)
    assert loaded == SPEC
    assert loaded.digest() == SPEC.digest()
    assert gf.load_feature_spec(None) == SPEC


def test_spec_rejects_bad_documents(tmp_path):
    doc = SPEC.to_json()
    with pytest.raises(FormatError):
        gf.FeatureSpec.from_json(dict(doc, version=99))
    with pytest.raises(FormatError):
        gf.FeatureSpec.from_json(dict(doc, surprise=1))
    bad_layout = dict(doc, layouts=dict(doc['layouts'], Module=[['bias', 2]]))
    with pytest.raises(FormatError):
        gf.FeatureSpec.from_json(bad_layout)
    path = tmp_path / 'broken.json'
    path.write_text('{')
    with pytest.raises(FormatError):
        gf.load_feature_spec(path)


def test_spec_validation():
    with pytest.raises(UsageError):
        gf.FeatureSpec(opcodes=('add', 'sub'))
    with pytest.raises(UsageError):
        gf.FeatureSpec(alignment_values=(4, 2))
    with pytest.raises(UsageError):
        gf.FeatureSpec(magnitude_bounds=(0, 4))
    with pytest.raises(UsageError):
        gf.FeatureSpec(size_limit=1)


def test_digest_tracks_vocabulary():
    assert gf.FeatureSpec(size_limit=1024).digest() != SPEC.digest()
