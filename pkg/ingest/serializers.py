import math

from rest_framework import serializers


def flatten_errors(errors):
    """Turn a serializer ``errors`` dict into a single readable line."""
    parts = []
    for key, messages in errors.items():
        if isinstance(messages, dict):
            messages = [flatten_errors(messages)]
        text = '; '.join(str(message) for message in messages)
        parts.append(text if key == 'non_field_errors' else f"{key}: {text}")
    return ', '.join(parts)


class RunConfigSerializer(serializers.Serializer):
    """Validates every tunable of a pipeline run"""
    iou_match_threshold = serializers.FloatField(min_value=0.0, max_value=1.0)
    sort_max_age = serializers.IntegerField(min_value=0)
    sort_min_hits = serializers.IntegerField(min_value=1)
    parked_dispersion_threshold = serializers.FloatField(min_value=0.0)
    min_box_width = serializers.FloatField(min_value=0.0)
    min_box_height = serializers.FloatField(min_value=0.0)
    reid_match_threshold = serializers.FloatField(min_value=0.0, max_value=2.0)
    reid_P = serializers.IntegerField(min_value=1)
    reid_N = serializers.IntegerField(min_value=1)
    eval_iou_threshold = serializers.FloatField(min_value=0.0, max_value=1.0)
    detection_min_confidence = serializers.FloatField(min_value=0.0, max_value=1.0)
    min_aspect_ratio = serializers.FloatField(min_value=0.0)
    max_aspect_ratio = serializers.FloatField(min_value=0.0)

    def validate_eval_iou_threshold(self, value):
        """A zero gate would match disjoint boxes"""
        if value <= 0.0:
            raise serializers.ValidationError("Must be greater than 0.")
        return value

    def validate(self, data):
        for key, value in data.items():
            if isinstance(value, float) and not math.isfinite(value):
                raise serializers.ValidationError({key: "Must be a finite number."})
        low = data.get('min_aspect_ratio', 0.0)
        high = data.get('max_aspect_ratio', 0.0)
        if high > 0.0 and low > high:
            raise serializers.ValidationError(
                {"min_aspect_ratio": "Must not exceed max_aspect_ratio."}
            )
        return data


class EmbeddingHeaderSerializer(serializers.Serializer):
    """Checks the ``camera,track,frame,e0,...`` header of an embedding file"""
    columns = serializers.ListField(child=serializers.CharField(trim_whitespace=True))

    def validate_columns(self, value):
        if value[:3] != ['camera', 'track', 'frame']:
            raise serializers.ValidationError("Header must start with camera,track,frame.")
        expected = [f"e{i}" for i in range(len(value) - 3)]
        if not expected:
            raise serializers.ValidationError("Header names no embedding columns.")
        if value[3:] != expected:
            raise serializers.ValidationError(
                f"Embedding columns must be e0..e{len(expected) - 1} in order."
            )
        return value


class IdMappingRowSerializer(serializers.Serializer):
    """One ``camera,local_id,global_id`` row"""
    camera = serializers.CharField()
    local_id = serializers.IntegerField(min_value=1)
    global_id = serializers.IntegerField(min_value=1)
