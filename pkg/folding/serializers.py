import io

import numpy as np
from rest_framework import serializers
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

from cloth.serializers import ClothParamsSerializer
from core.exceptions import ParameterError
from .env import ACTION_DIM, GOAL_DIM, Goal
from .randomization import Demonstration, FabricPool


def point_field(**kwargs):
    return serializers.ListField(child=serializers.FloatField(), min_length=3, max_length=3, **kwargs)


def action_field(**kwargs):
    child = serializers.FloatField(min_value=-1.0, max_value=1.0)
    return serializers.ListField(child=child, min_length=ACTION_DIM, max_length=ACTION_DIM, **kwargs)


def goal_field(**kwargs):
    return serializers.ListField(
        child=serializers.FloatField(), min_length=GOAL_DIM, max_length=GOAL_DIM, **kwargs,
    )


class DemonstrationSerializer(serializers.Serializer):
    goal = goal_field()
    actions = serializers.ListField(child=action_field(), min_length=1)
    annotation = serializers.CharField(allow_blank=True, required=False, default='')

    def to_representation(self, instance):
        return {
            'goal': instance.goal.vector().tolist(),
            'actions': np.asarray(instance.actions).tolist(),
            'annotation': instance.annotation,
        }

    def create(self, validated_data):
        return Demonstration(
            np.array(validated_data['actions']),
            Goal.from_vector(validated_data['goal']),
            validated_data.get('annotation', ''),
        )


class DemonstrationFileSerializer(serializers.Serializer):
    seed = serializers.IntegerField(allow_null=True)
    reference_cloth = ClothParamsSerializer()
    demonstrations = DemonstrationSerializer(many=True)

    def validate_demonstrations(self, value):
        if not value:
            raise serializers.ValidationError('Нужна хотя бы одна демонстрация')
        return value


class PoolEntrySerializer(serializers.Serializer):
    params = ClothParamsSerializer()
    score = serializers.FloatField()


class FabricPoolSerializer(serializers.Serializer):
    seed = serializers.IntegerField(allow_null=True)
    entries = PoolEntrySerializer(many=True)

    def to_representation(self, instance):
        entries = [{'params': params, 'score': score} for params, score in zip(instance.entries, instance.scores)]
        return {
            'seed': instance.seed,
            'entries': PoolEntrySerializer(entries, many=True).data,
        }

    def validate_entries(self, value):
        if not value:
            raise serializers.ValidationError('Пул тканей пуст')
        scores = [entry['score'] for entry in value]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise serializers.ValidationError('Записи пула должны идти по убыванию оценки')
        return value

    def create(self, validated_data):
        entries = validated_data['entries']
        return FabricPool(
            [ClothParamsSerializer().create(entry['params']) for entry in entries],
            [entry['score'] for entry in entries],
            validated_data['seed'],
        )


class TrajectoryRecordSerializer(serializers.Serializer):
    step = serializers.IntegerField(min_value=0)
    action = action_field()
    effector_position = point_field()
    tracked_points = serializers.ListField(child=point_field(), min_length=8, max_length=8)
    reward = serializers.FloatField()
    d0 = serializers.FloatField(min_value=0)
    d1 = serializers.FloatField(min_value=0)
    done = serializers.BooleanField()
    seed = serializers.IntegerField(allow_null=True)
    goal = goal_field()
    grid_n = serializers.IntegerField(min_value=3)
    positions = serializers.ListField(child=point_field(), min_length=9)

    def validate(self, attrs):
        if len(attrs['positions']) != attrs['grid_n'] ** 2:
            raise serializers.ValidationError({'positions': 'Число точек не совпадает с grid_n²'})
        return attrs


def render_json(data):
    return JSONRenderer().render(data)


def parse_json(content):
    try:
        return JSONParser().parse(io.BytesIO(content))
    except ParseError as exc:
        raise ParameterError(f'malformed JSON: {exc.detail}') from exc


def validated(serializer_class, data, what):
    serializer = serializer_class(data=data)
    if not serializer.is_valid():
        raise ParameterError(f'invalid {what}: {dict(serializer.errors)}')
    return serializer


def dump_demonstrations(path, demos, reference_cloth, seed=None):
    data = {
        'seed': seed,
        'reference_cloth': ClothParamsSerializer(reference_cloth).data,
        'demonstrations': DemonstrationSerializer(demos, many=True).data,
    }
    with open(path, 'wb') as f:
        f.write(render_json(data))


def load_demonstrations(path):
    with open(path, 'rb') as f:
        serializer = validated(DemonstrationFileSerializer, parse_json(f.read()), 'demonstration file')
    data = serializer.validated_data
    demos = [DemonstrationSerializer().create(item) for item in data['demonstrations']]
    return demos, ClothParamsSerializer().create(data['reference_cloth'])


def dump_pool(path, pool):
    with open(path, 'wb') as f:
        f.write(render_json(FabricPoolSerializer(pool).data))


def load_pool(path):
    with open(path, 'rb') as f:
        return validated(FabricPoolSerializer, parse_json(f.read()), 'pool file').save()
