import logging

import numpy as np

from core.exceptions import ParameterError, TrajectoryParseError
from .serializers import TrajectoryRecordSerializer, parse_json, render_json

logger = logging.getLogger(__name__)


class TrajectoryLogger:
    """Запись траектории построчно: одна JSON-запись на шаг политики."""

    def __init__(self, path):
        self.path = path
        self.file = open(path, 'wb')
        self.count = 0

    def write(self, record):
        data = TrajectoryRecordSerializer(record).data
        self.file.write(render_json(data) + b'\n')
        self.count += 1

    def close(self):
        self.file.close()
        logger.debug('wrote %d trajectory records to %s', self.count, self.path)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_trajectory(path):
    records = []
    with open(path, 'rb') as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                data = parse_json(line)
            except ParameterError as exc:
                raise TrajectoryParseError(str(exc), number) from exc
            serializer = TrajectoryRecordSerializer(data=data)
            if not serializer.is_valid():
                raise TrajectoryParseError(f'invalid record: {dict(serializer.errors)}', number)
            records.append(serializer.validated_data)
    if not records:
        raise TrajectoryParseError('trajectory log is empty')
    return records


def record_d_sum(record):
    points = np.asarray(record['tracked_points'])
    goal = np.asarray(record['goal'])
    return float(np.linalg.norm(points[0] - goal[:3]) + np.linalg.norm(points[1] - goal[3:]))
