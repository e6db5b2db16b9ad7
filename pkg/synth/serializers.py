import math

from rest_framework import serializers


class SceneSpecSerializer(serializers.Serializer):
    """Validates the parameters of a synthetic scene"""
    num_cameras = serializers.IntegerField(min_value=1)
    num_identities = serializers.IntegerField(min_value=1)
    frames_per_camera = serializers.IntegerField(min_value=1)
    image_width = serializers.FloatField(min_value=1.0)
    image_height = serializers.FloatField(min_value=1.0)
    min_speed = serializers.FloatField(min_value=0.0)
    max_speed = serializers.FloatField(min_value=0.0)
    max_cameras_per_identity = serializers.IntegerField(min_value=1)
    dropout_rate = serializers.FloatField(min_value=0.0)
    position_noise_sigma = serializers.FloatField(min_value=0.0)
    embedding_dim = serializers.IntegerField(min_value=1)
    cluster_noise_sigma = serializers.FloatField(min_value=0.0)
    min_center_distance = serializers.FloatField(min_value=0.0, max_value=2.0)
    seed = serializers.IntegerField(min_value=0)
    collapse_clusters = serializers.BooleanField()

    def validate_dropout_rate(self, value):
        if value >= 1.0:
            raise serializers.ValidationError("Must be lower than 1.")
        return value

    def validate(self, data):
        for key, value in data.items():
            if isinstance(value, float) and not math.isfinite(value):
                raise serializers.ValidationError({key: "Must be a finite number."})
        if data['min_speed'] > data['max_speed']:
            raise serializers.ValidationError({"min_speed": "Must not exceed max_speed."})
        return data
