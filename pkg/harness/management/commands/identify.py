import numpy as np

from folding.randomization import identify_top_m
from folding.serializers import dump_pool, load_demonstrations
from harness.runtime import RunCommand, ensure_parent, require_file, usage


class Command(RunCommand):
    help = 'Select the top-M simulated fabrics by replaying demonstrations'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--demos', help='Demonstration file (default paths.demos)')
        parser.add_argument('--out', help='Pool file (default paths.pool)')

    def run(self, *args, **options):
        config = self.load_config(options)
        demos_path = require_file(options['demos'] or config.path('demos'), 'demonstration file')
        out = options['out'] or config.path('pool')
        if not out:
            raise usage('no output path: pass --out or set paths.pool')

        demos, reference = load_demonstrations(demos_path)
        self.stdout.write(
            f'Scoring {config.candidates} candidates against {len(demos)} demonstrations...'
        )
        pool = identify_top_m(
            np.random.default_rng(config.seed),
            config.ranges,
            demos,
            n_candidates=config.candidates,
            m=config.pool_size,
            base=reference,
            env_config=config.env,
            workers=config.workers,
            seed=config.seed,
            reference=reference,
        )
        dump_pool(ensure_parent(out), pool)
        self.stdout.write(self.style.SUCCESS(
            f'Wrote {len(pool)} fabrics to {out} (scores {pool.scores[0]:.3f}..{pool.scores[-1]:.3f})'
        ))
