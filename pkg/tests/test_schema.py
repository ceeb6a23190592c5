import json

import pytest
from hypothesis import given, strategies as st

from helpers import SCHEMAS, cat_feature, int_feature, real_feature

from medtab.schema import (MISSING, CoercionError, ExtractionSchema, FeatureSpec,
                           LabelSpec, SchemaError, canonicalize_value,
                           emit_json_schema_block, load_schema, schema_from_dict)


class TestLoadSchema:
    def test_heart_schema_loads_with_eleven_features(self, heart_schema):
        assert heart_schema.m == 11
        assert [f.name for f in heart_schema.features] == [
            "Age", "Sex", "ChestPainType", "RestingBP", "Cholesterol", "FastingBS",
            "RestingECG", "MaxHR", "ExerciseAngina", "Oldpeak", "ST_Slope"]
        assert heart_schema.feature("max_hr").numeric_range == (60.0, 202.0)
        assert heart_schema.feature("st_slope").allowed_values == ("Up", "Flat", "Down")
        assert heart_schema.label.positive_value == "1"

    def test_single_feature_schema(self, tmp_path):
        path = tmp_path / "one.schema.json"
        path.write_text(json.dumps({"features": [{"name": "age", "kind": "integer"}]}))
        schema = load_schema(path)
        assert schema.m == 1
        assert schema.label is None

    def test_duplicate_names_rejected(self, tmp_path):
        path = tmp_path / "dup.schema.json"
        path.write_text(json.dumps({"features": [
            {"name": "age", "kind": "integer"}, {"name": "age", "kind": "real"}]}))
        with pytest.raises(SchemaError, match="duplicate"):
            load_schema(path)

    def test_parse_error_carries_position(self, tmp_path):
        path = tmp_path / "broken.schema.json"
        path.write_text('{"features": [,]}')
        with pytest.raises(SchemaError, match=r"line 1 column"):
            load_schema(path)

    def test_invalid_kind_rejected(self):
        with pytest.raises(SchemaError, match="invalid kind"):
            schema_from_dict({"features": [{"name": "x", "kind": "blob"}]})

    def test_empty_allowed_values_rejected(self):
        with pytest.raises(SchemaError, match="allowed_values"):
            schema_from_dict({"features": [{"name": "x", "kind": "categorical",
                                            "allowed_values": []}]})

    def test_all_shipped_schemas_load(self):
        for name in ("heart", "hepatitis", "patient_treatment", "stroke", "psych_notes"):
            schema = load_schema(SCHEMAS / f"{name}.schema.json")
            assert schema.m >= 10

    def test_label_feature_collision_rejected(self):
        with pytest.raises(SchemaError, match="collides"):
            ExtractionSchema(features=(int_feature("age"),),
                             label=LabelSpec("age", "1", "0"))


class TestEmitJsonSchemaBlock:
    def test_heart_block_matches_prompt_style(self, heart_schema):
        block = emit_json_schema_block(heart_schema)
        assert '"age": {"title": "Age", "description": "Age of the patient [int](years)", ' \
               '"type": "integer"}' in block
        assert block.startswith('{"properties": ')
        assert "\n" not in block

    def test_categorical_maps_to_string_with_values_in_description(self, heart_schema):
        block = emit_json_schema_block(heart_schema)
        sex = json.loads(block)["properties"]["sex"]
        assert sex["type"] == "string"
        assert "[M,F]" in sex["description"]

    def test_empty_description_passes_through(self):
        schema = ExtractionSchema(features=(FeatureSpec(name="x", title="X", kind="integer"),))
        assert json.loads(emit_json_schema_block(schema))["properties"]["x"]["description"] == ""

    def test_block_parses_and_round_trips_names(self, heart_schema):
        props = json.loads(emit_json_schema_block(heart_schema))["properties"]
        assert len(props) == heart_schema.m
        for key in props:
            assert heart_schema.match_key(key) is not None
        assert "max_hr" in props and "chest_pain_type" in props

    def test_real_maps_to_number(self, heart_schema):
        props = json.loads(emit_json_schema_block(heart_schema))["properties"]
        assert props["oldpeak"]["type"] == "number"


class TestCanonicalizeValue:
    def test_numeral_string_to_int(self):
        assert canonicalize_value(int_feature("Age"), "63") == 63

    def test_case_fold_to_canonical_category(self):
        assert canonicalize_value(cat_feature("Sex", ["M", "F"]), "m") == "M"

    def test_out_of_range_rejected(self):
        spec = int_feature("MaxHR", 60, 202)
        with pytest.raises(CoercionError) as exc:
            canonicalize_value(spec, 250)
        assert exc.value.reason == "out-of-range"
        assert "between 60 and 202" in str(exc.value)

    def test_null_becomes_missing_when_allowed(self):
        assert canonicalize_value(real_feature("Oldpeak"), None) is MISSING

    @pytest.mark.parametrize("sentinel", [None, "None", "none", "", "N/A", "n/a", "NaN", "nan"])
    def test_missing_sentinels(self, sentinel):
        assert canonicalize_value(int_feature("age"), sentinel) is MISSING

    def test_missing_rejected_when_not_allowed(self):
        spec = int_feature("age", allow_missing=False)
        with pytest.raises(CoercionError) as exc:
            canonicalize_value(spec, None)
        assert exc.value.reason == "missing-not-allowed"

    def test_integral_real_accepted_for_integer(self):
        assert canonicalize_value(int_feature("age"), 63.0) == 63

    def test_fractional_real_rejected_for_integer(self):
        with pytest.raises(CoercionError):
            canonicalize_value(int_feature("age"), 63.5)

    def test_comma_decimal_accepted_for_real(self):
        assert canonicalize_value(real_feature("x"), "1,5") == 1.5

    @pytest.mark.parametrize("raw", ["inf", "INF", "-Infinity", float("inf")])
    def test_non_finite_numbers_rejected(self, raw):
        for spec in (int_feature("i"), real_feature("r")):
            with pytest.raises(CoercionError) as exc:
                canonicalize_value(spec, raw)
            assert exc.value.reason == "type-mismatch"

    def test_unknown_category_lists_allowed_values(self):
        with pytest.raises(CoercionError) as exc:
            canonicalize_value(cat_feature("Sex", ["M", "F"]), "unknown")
        assert exc.value.reason == "unknown-category"
        assert "M, F" in str(exc.value)

    def test_numeric_scalar_matches_category(self):
        assert canonicalize_value(cat_feature("FastingBS", ["0", "1"]), 1) == "1"

    def test_text_stringifies_scalars(self):
        spec = FeatureSpec(name="note", kind="text")
        assert canonicalize_value(spec, 12) == "12"
        assert canonicalize_value(spec, True) == "true"

    @given(st.one_of(st.integers(-10**6, 10**6),
                     st.floats(allow_nan=False, allow_infinity=False, width=32),
                     st.text(max_size=12), st.none(), st.booleans()))
    def test_idempotent_for_every_kind(self, raw):
        specs = [int_feature("i"), real_feature("r"), cat_feature("c", ["a", "b"]),
                 FeatureSpec(name="t", kind="text")]
        for spec in specs:
            try:
                once = canonicalize_value(spec, raw)
            except CoercionError:
                continue
            assert canonicalize_value(spec, once) == once or (
                once is MISSING and canonicalize_value(spec, once) is MISSING)

    @given(st.one_of(st.text(max_size=8), st.integers(-5, 5), st.none()))
    def test_categorical_closure(self, raw):
        spec = cat_feature("c", ["Up", "Flat", "Down"])
        try:
            value = canonicalize_value(spec, raw)
        except CoercionError:
            return
        assert value is MISSING or value in spec.allowed_values
