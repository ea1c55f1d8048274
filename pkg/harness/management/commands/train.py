import csv
import os
import shutil

import numpy as np
from django.core.management.base import CommandError

from core.exceptions import ClothFoldingError
from folding.env import FoldEnv
from folding.serializers import load_demonstrations
from harness.runtime import EXIT_RUNTIME, RunCommand, env_config_for, fabrics_for, require_file
from learning.buffer import ReplayBuffer
from learning.checkpoint import load_checkpoint, save_checkpoint
from learning.models import EpochMetric, TrainingRun
from learning.sac import MODES, SACAgent
from learning.training import ingest_demonstrations, train_loop

METRIC_COLUMNS = [
    'epoch', 'success_rate', 'mean_d_sum',
    'critic1_loss', 'critic2_loss', 'actor_loss', 'alpha', 'aux_loss',
]


def write_metrics_csv(path, run):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(METRIC_COLUMNS)
        for metric in run.metrics.all():
            writer.writerow(['' if getattr(metric, name) is None else getattr(metric, name) for name in METRIC_COLUMNS])


def is_best(run, row):
    previous = run.metrics.exclude(epoch=row.epoch)
    return all(
        (row.success_rate, -row.mean_d_sum) > (m.success_rate, -m.mean_d_sum) for m in previous
    )


class Command(RunCommand):
    help = 'Train a folding policy with SAC, HER and demonstrations'

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument('--mode', choices=MODES, help='Override run.mode')
        parser.add_argument('--out', help='Run directory (default <paths.output>/<name>-<mode>-<seed>)')
        parser.add_argument('--checkpoint', help='Resume from this checkpoint')
        parser.add_argument('--demos', help='Demonstration file (default paths.demos)')

    def run(self, *args, **options):
        config = self.load_config(options, options['mode'])
        mode = config.mode
        self.configure_torch()

        out = options['out'] or os.path.join(config.path('output'), f'{config.name}-{mode}-{config.seed}')
        os.makedirs(out, exist_ok=True)
        checkpoint_path = os.path.join(out, 'checkpoint.bin')
        metrics_path = os.path.join(out, 'metrics.csv')

        fabrics = fabrics_for(config, mode)
        env_config = env_config_for(config, mode)
        env = FoldEnv(fabrics, env_config)
        eval_env = FoldEnv(fabrics, env_config)

        run, _ = TrainingRun.objects.get_or_create(
            output_dir=out, mode=mode, seed=config.seed, defaults={'name': config.name},
        )
        resume_from = options['checkpoint']
        if resume_from:
            require_file(resume_from, 'checkpoint')
        elif run.status in ('running', 'interrupted') and os.path.isfile(run.checkpoint_path or ''):
            resume_from = run.checkpoint_path

        if resume_from:
            agent, manifest = load_checkpoint(resume_from)
            start_epoch = manifest['epoch'] + 1
            self.stdout.write(f'Resuming {run.name} from {resume_from} at epoch {start_epoch}')
        else:
            agent = SACAgent(config.learner, mode, config.seed)
            start_epoch = 0
        run.metrics.filter(epoch__gte=start_epoch).delete()
        run.status = 'running'
        run.save()

        rng = np.random.default_rng([config.seed, start_epoch])
        demo_store = None
        demos_path = options['demos'] or config.path('demos')
        if demos_path:
            demos, _ = load_demonstrations(require_file(demos_path, 'demonstration file'))
            demo_store = ingest_demonstrations(env, demos, config.learner, rng)
        else:
            self.stdout.write('No demonstration file configured, training without demonstrations')

        def on_epoch(row):
            save_checkpoint(checkpoint_path, agent, row.epoch, {'success_rate': row.success_rate})
            EpochMetric.objects.create(
                run=run,
                epoch=row.epoch,
                success_rate=row.success_rate,
                mean_d_sum=row.mean_d_sum,
                critic1_loss=row.critic1,
                critic2_loss=row.critic2,
                actor_loss=row.actor,
                alpha=row.alpha,
                aux_loss=row.aux,
            )
            if is_best(run, row):
                shutil.copyfile(checkpoint_path, os.path.join(out, 'best.bin'))
            run.epochs_done = row.epoch + 1
            run.checkpoint_path = checkpoint_path
            run.save()
            write_metrics_csv(metrics_path, run)
            self.stdout.write(
                f'Epoch {row.epoch}: success {row.success_rate:.2f}, d_sum {row.mean_d_sum:.4f}'
            )

        try:
            train_loop(
                env, agent, config.schedule, ReplayBuffer(config.learner.buffer_capacity), rng,
                demo_store=demo_store, eval_env=eval_env, start_epoch=start_epoch, on_epoch=on_epoch,
            )
        except KeyboardInterrupt:
            run.status = 'interrupted'
            run.save()
            raise CommandError(f'interrupted, resume with the same command ({out})', returncode=EXIT_RUNTIME)
        except ClothFoldingError:
            run.status = 'failed'
            run.save()
            raise

        run.status = 'finished'
        run.save()
        write_metrics_csv(metrics_path, run)
        best = max(run.metrics.all(), key=lambda m: (m.success_rate, -m.mean_d_sum), default=None)
        summary = f'Training finished: {run.epochs_done} epochs in {out}'
        if best is not None:
            summary += f', best epoch {best.epoch} (success {best.success_rate:.2f})'
        self.stdout.write(self.style.SUCCESS(summary))
