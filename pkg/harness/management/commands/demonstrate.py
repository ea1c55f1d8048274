import numpy as np

from cloth.physics import build_cloth
from core.exceptions import ExpertGenerationError
from folding.env import sample_goal
from folding.randomization import scripted_expert
from folding.serializers import dump_demonstrations
from harness.runtime import RunCommand, ensure_parent, usage


class Command(RunCommand):
    help = 'Generate scripted expert demonstrations on the reference cloth'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--count', type=int, help='Number of demonstrations (default identify.demos)')
        parser.add_argument('--attempts', type=int, default=5, help='Goals tried per requested demonstration')
        parser.add_argument('--out', help='Demonstration file (default paths.demos)')

    def run(self, *args, **options):
        config = self.load_config(options)
        count = options['count'] or config.demo_count
        out = options['out'] or config.path('demos')
        if not out:
            raise usage('no output path: pass --out or set paths.demos')
        if count < 1:
            raise usage('--count must be positive')

        rng = np.random.default_rng(config.seed)
        reference = config.reference_cloth
        state, _ = build_cloth(reference, (0.0, 0.0, config.env.table_height))

        self.stdout.write(f'Generating {count} demonstrations...')
        demos = []
        failures = 0
        for _ in range(count * options['attempts']):
            goal = sample_goal(rng, state.positions, reference.grid_n, config.env.episode.goal_radius)
            try:
                demos.append(scripted_expert(reference, goal, config.env))
            except ExpertGenerationError as exc:
                failures += 1
                self.stdout.write(f'  goal rejected: {exc}')
                continue
            if len(demos) == count:
                break

        if len(demos) < count:
            raise ExpertGenerationError(
                f'only {len(demos)} of {count} demonstrations succeeded after {failures} rejected goals'
            )
        dump_demonstrations(ensure_parent(out), demos, reference, config.seed)
        self.stdout.write(self.style.SUCCESS(f'Wrote {len(demos)} demonstrations to {out}'))
