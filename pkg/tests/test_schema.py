import pytest
from hypothesis import given
from hypothesis import strategies as st

from speechee.schema import (
    EventRecord,
    Instance,
    LabelMapping,
    Schema,
    SchemaError,
    normalize_text,
    validate_record,
)


class TestValidateRecord:
    def test_valid_record_passes(self, ace_schema):
        rec = EventRecord("Transport", "returned", (("Destination", "Los Angeles"),))
        assert validate_record(ace_schema, rec) == []

    def test_unknown_type(self, ace_schema):
        rec = EventRecord("Flight", "boarded", ())
        kinds = [v.kind for v in validate_record(ace_schema, rec)]
        assert kinds == ["unknown-type"]

    def test_empty_trigger(self, ace_schema):
        rec = EventRecord("Transport", "", ())
        kinds = [v.kind for v in validate_record(ace_schema, rec)]
        assert kinds == ["empty-trigger"]

    def test_illegal_role(self, ace_schema):
        rec = EventRecord("Transport", "returned", (("Person", "man"),))
        kinds = [v.kind for v in validate_record(ace_schema, rec)]
        assert kinds == ["illegal-role"]

    def test_never_raises_on_garbage(self, ace_schema):
        rec = EventRecord("", "", (("", ""),))
        violations = validate_record(ace_schema, rec)
        assert len(violations) >= 2

    def test_trigger_only_event_allowed(self, ace_schema):
        assert validate_record(ace_schema, EventRecord("Meet", "summit", ())) == []


class TestNormalizeText:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Los  Angeles ", "los angeles"),
            ("", ""),
            ("北京", "北京"),
            ("A\tB\n C", "a b c"),
        ],
    )
    def test_examples(self, raw, expected):
        assert normalize_text(raw) == expected

    def test_punctuation_retained_by_default(self):
        assert normalize_text("Hello, world!") == "hello, world!"

    def test_punctuation_stripping_flag(self):
        assert normalize_text("Hello, world!", strip_punctuation=True) == "hello world"

    @given(st.text(max_size=60))
    def test_idempotent(self, s):
        once = normalize_text(s)
        assert normalize_text(once) == once

    @given(st.text(max_size=60))
    def test_idempotent_with_stripping(self, s):
        once = normalize_text(s, strip_punctuation=True)
        assert normalize_text(once, strip_punctuation=True) == once


class TestSchemaInvariants:
    def test_role_for_unknown_type_rejected(self):
        with pytest.raises(SchemaError):
            Schema(event_types=frozenset({"A"}), roles_by_type={"B": ("R",)})

    def test_type_with_delimiter_rejected(self):
        with pytest.raises(SchemaError):
            Schema(event_types=frozenset({"A(B"}), roles_by_type={})

    def test_type_with_structural_token_rejected(self):
        with pytest.raises(SchemaError):
            Schema(event_types=frozenset({"x<role>y"}), roles_by_type={})

    def test_multiword_role_rejected(self):
        with pytest.raises(SchemaError):
            Schema(event_types=frozenset({"A"}), roles_by_type={"A": ("two words",)})

    def test_roundtrip_dict(self, ace_schema):
        assert Schema.from_dict(ace_schema.to_dict()) == ace_schema


class TestLabelMapping:
    def test_hierarchical_to_flat(self):
        m = LabelMapping({"Life:Be-Born": "born"})
        assert m.apply("Life:Be-Born") == "born"

    def test_non_injective_rejected(self):
        with pytest.raises(SchemaError):
            LabelMapping({"A": "x", "B": "x"})

    def test_colon_image_rejected(self):
        with pytest.raises(SchemaError):
            LabelMapping({"A": "a:b"})

    def test_multiword_image_rejected(self):
        with pytest.raises(SchemaError):
            LabelMapping({"A": "two words"})


class TestInstance:
    def test_roundtrip_dict(self):
        inst = Instance(
            id="x1",
            transcript="the man returned",
            events=(EventRecord("Transport", "returned", ()),),
            split="dev",
            audio="audio/x1.wav",
        )
        assert Instance.from_dict(inst.to_dict()).to_dict() == inst.to_dict()

    def test_bad_split_rejected(self):
        with pytest.raises(SchemaError):
            Instance(id="x", transcript="t", split="validation")
