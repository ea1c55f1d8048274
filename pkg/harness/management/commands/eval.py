from folding.env import FoldEnv
from folding.serializers import load_demonstrations
from folding.trajectory import TrajectoryLogger
from harness.reports import EvalReport, UNDEFINED, dump_report
from harness.runtime import RunCommand, ensure_parent, env_config_for, fabrics_for, require_file, usage
from learning.checkpoint import load_checkpoint
from learning.training import EVAL_SEED_OFFSET, agent_policy, evaluate_policy, replay_policy


def format_rate(value):
    return value if value == UNDEFINED else f'{value:.2f}'


class Command(RunCommand):
    help = 'Evaluate a checkpoint or a fixed trajectory with deterministic rollouts'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--checkpoint', help='Policy checkpoint')
        parser.add_argument('--trajectory', help='Demonstration file whose first action sequence is replayed open-loop')
        parser.add_argument('--episodes', type=int, default=10, help='Episodes (per fabric with --fabrics)')
        parser.add_argument('--fabrics', type=int, help='Evaluate on the first N fabrics of the pool')
        parser.add_argument('--trajectory-log', help='Write per-step records for the replay command')
        parser.add_argument('--out', help='Report file (JSON)')

    def run(self, *args, **options):
        config = self.load_config(options)
        episodes = options['episodes']
        if episodes < 0:
            raise usage('--episodes must be non-negative')
        if bool(options['checkpoint']) == bool(options['trajectory']):
            raise usage('pass exactly one of --checkpoint or --trajectory')
        self.configure_torch()

        goals = None
        if options['checkpoint']:
            agent, manifest = load_checkpoint(require_file(options['checkpoint'], 'checkpoint'))
            mode = manifest['mode']

            def policy_factory():
                return agent_policy(agent, deterministic=True)
        else:
            demos, _ = load_demonstrations(require_file(options['trajectory'], 'trajectory file'))
            actions, goal = demos[0].actions, demos[0].goal
            mode = 'fixed'

            def policy_factory():
                return replay_policy(actions)

        fabric_indices = None
        total = episodes
        if options['fabrics']:
            # Группировка по тканям пула: N тканей по episodes эпизодов
            fabrics = fabrics_for(config, 'ours')
            if options['fabrics'] > len(fabrics):
                raise usage(f'--fabrics {options["fabrics"]} exceeds the pool size {len(fabrics)}')
            fabrics = fabrics[:options['fabrics']]
            fabric_indices = [i for i in range(len(fabrics)) for _ in range(episodes)]
            total = len(fabric_indices)
        else:
            fabrics = fabrics_for(config, mode)
        if options['trajectory']:
            goals = [goal] * total

        env = FoldEnv(fabrics, env_config_for(config, mode))
        seed = config.seed + EVAL_SEED_OFFSET
        self.stdout.write(f'Evaluating {total} episodes on {len(fabrics)} fabrics...')

        trajectory_log = TrajectoryLogger(ensure_parent(options['trajectory_log'])) if options['trajectory_log'] else None
        try:
            rows = evaluate_policy(
                env, policy_factory, total, seed, fabric_indices, goals,
                record=trajectory_log.write if trajectory_log else None,
            )
        finally:
            if trajectory_log:
                trajectory_log.close()

        report = EvalReport(
            rows=rows,
            mode=mode,
            seed=config.seed,
            checkpoint=options['checkpoint'] or '',
            trajectory=options['trajectory'] or '',
        )
        for index, summary in report.per_fabric().items():
            self.stdout.write(
                f'  fabric {index}: success {format_rate(summary["success_rate"])}, '
                f'd_sum {summary["mean_d_sum"]:.4f}'
            )
        if options['out']:
            dump_report(ensure_parent(options['out']), report)
        aggregates = report.aggregates
        self.stdout.write(self.style.SUCCESS(
            f'Success rate {format_rate(aggregates["success_rate"])} over {aggregates["episodes"]} episodes'
        ))
