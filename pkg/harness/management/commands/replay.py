import os

import numpy as np

from cloth.physics import grid_triangles
from cloth.rendering import CameraConfig, VisualConfig, render, write_pgm
from folding.trajectory import read_trajectory, record_d_sum
from harness.runtime import RunCommand, require_file

CONSISTENCY_TOLERANCE = 1e-9


class Command(RunCommand):
    help = 'Re-render a trajectory log to PGM frames and print the d_sum trace'

    def add_arguments(self, parser):
        parser.add_argument('log', help='Trajectory log written by eval --trajectory-log')
        parser.add_argument('--out', help='Frame directory (default <log>_frames)')
        parser.add_argument('--image-size', type=int, default=100, help='Frame side in pixels')

    def run(self, *args, **options):
        path = require_file(options['log'], 'trajectory log')
        records = read_trajectory(path)
        out = options['out'] or f'{os.path.splitext(path)[0]}_frames'
        os.makedirs(out, exist_ok=True)

        # Камера по центру ткани из первой записи, без шума пикселей
        first = np.asarray(records[0]['positions'])
        target = first.mean(axis=0)
        target[2] = first[:, 2].min()
        camera = CameraConfig.side_view(target, image_size=options['image_size'])
        visual = VisualConfig(pixel_noise_sigma=0.0)

        # Запись шага 0 - состояние после reset, кадр на нее не пишется
        steps = [record for record in records if record['step'] > 0]
        for number, record in enumerate(steps):
            triangles = grid_triangles(record['grid_n'])
            image = render(np.asarray(record['positions']), triangles, camera, visual)
            write_pgm(image, os.path.join(out, f'frame_{number:04d}.pgm'))
            self.stdout.write(f'step {record["step"]:3d}  d_sum {record_d_sum(record):.4f}')

        last = records[-1]
        replayed = record_d_sum(last)
        logged = last['d0'] + last['d1']
        if abs(replayed - logged) > CONSISTENCY_TOLERANCE:
            self.stdout.write(self.style.WARNING(
                f'final d_sum {replayed:.6f} differs from the logged {logged:.6f}'
            ))
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(steps)} frames to {out}'))
