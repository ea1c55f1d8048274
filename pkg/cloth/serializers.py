from rest_framework import serializers

from core.exceptions import ParameterError
from .physics import ClothParams


class ClothParamsSerializer(serializers.Serializer):
    grid_n = serializers.IntegerField(min_value=3)
    side_length = serializers.FloatField()
    mass_per_point = serializers.FloatField(min_value=0)
    k_struct = serializers.FloatField(min_value=0)
    k_shear = serializers.FloatField(min_value=0)
    k_bend = serializers.FloatField(min_value=0)
    damping = serializers.FloatField(min_value=0)
    air_drag = serializers.FloatField(min_value=0)
    friction = serializers.FloatField(min_value=0)

    def validate_side_length(self, value):
        if not 0.05 < value < 1.0:
            raise serializers.ValidationError('Длина стороны должна лежать в интервале (0.05, 1.0) м')
        return value

    def validate(self, attrs):
        for name, value in attrs.items():
            if name != 'grid_n' and value <= 0:
                raise serializers.ValidationError({name: 'Значение должно быть положительным'})
        return attrs

    def create(self, validated_data):
        return ClothParams(**validated_data)


def params_to_data(params):
    return ClothParamsSerializer(params).data


def params_from_data(data):
    serializer = ClothParamsSerializer(data=data)
    if not serializer.is_valid():
        raise ParameterError(f'invalid cloth parameters: {dict(serializer.errors)}')
    return serializer.save()
