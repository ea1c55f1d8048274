from dataclasses import dataclass, field

import numpy as np
from rest_framework import serializers

from core.exceptions import ParameterError
from folding.serializers import parse_json, render_json, validated

UNDEFINED = 'undefined'

METRICS = ('d0', 'd1', 'd_sum')


def aggregate(rows):
    if not rows:
        summary = {'episodes': 0, 'success_rate': UNDEFINED, 'mean_steps': UNDEFINED}
        for name in METRICS:
            summary[f'mean_{name}'] = UNDEFINED
            summary[f'std_{name}'] = UNDEFINED
        return summary

    summary = {
        'episodes': len(rows),
        'success_rate': float(np.mean([row['success'] for row in rows])),
        'mean_steps': float(np.mean([row['steps'] for row in rows])),
    }
    for name in METRICS:
        values = np.array([row[name] for row in rows], dtype=np.float64)
        summary[f'mean_{name}'] = float(values.mean())
        summary[f'std_{name}'] = float(values.std())
    return summary


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    mode: str = ''
    seed: int = 0
    checkpoint: str = ''
    trajectory: str = ''

    @property
    def aggregates(self):
        return aggregate(self.rows)

    def per_fabric(self):
        groups = {}
        for row in self.rows:
            groups.setdefault(row['fabric_index'], []).append(row)
        return {index: aggregate(groups[index]) for index in sorted(groups)}

    def sample(self, metric='d_sum'):
        return [float(row[metric]) for row in self.rows]


class EpisodeRowSerializer(serializers.Serializer):
    episode = serializers.IntegerField(min_value=0)
    fabric_index = serializers.IntegerField(min_value=0)
    d0 = serializers.FloatField(min_value=0)
    d1 = serializers.FloatField(min_value=0)
    d_sum = serializers.FloatField(min_value=0)
    success = serializers.BooleanField()
    steps = serializers.IntegerField(min_value=0)


class EvalReportSerializer(serializers.Serializer):
    mode = serializers.CharField(allow_blank=True)
    seed = serializers.IntegerField()
    checkpoint = serializers.CharField(allow_blank=True)
    trajectory = serializers.CharField(allow_blank=True)
    rows = EpisodeRowSerializer(many=True)
    aggregates = serializers.DictField(read_only=True)
    per_fabric = serializers.SerializerMethodField()

    def get_per_fabric(self, instance):
        return {str(index): summary for index, summary in instance.per_fabric().items()}

    def create(self, validated_data):
        return EvalReport(
            rows=[dict(row) for row in validated_data['rows']],
            mode=validated_data['mode'],
            seed=validated_data['seed'],
            checkpoint=validated_data['checkpoint'],
            trajectory=validated_data['trajectory'],
        )


def dump_report(path, report):
    with open(path, 'wb') as f:
        f.write(render_json(EvalReportSerializer(report).data))


def load_report(path):
    with open(path, 'rb') as f:
        data = parse_json(f.read())
    report = validated(EvalReportSerializer, data, 'evaluation report').save()
    stored = data.get('aggregates')
    if stored is not None and stored != report.aggregates:
        raise ParameterError(f'{path}: stored aggregates do not match the episode rows')
    return report
