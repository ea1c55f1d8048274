import csv
import os
import tempfile
from io import StringIO
from unittest import mock

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from core.exceptions import ExpertGenerationError
from folding.env import Goal
from folding.randomization import Demonstration, FabricPool
from folding.serializers import dump_demonstrations, dump_pool, load_demonstrations, load_pool
from harness.reports import EvalReport, dump_report, load_report
from learning.models import EpochMetric, TrainingRun
from tests.helpers import resting_goal, small_params, write_config


class CommandTestMixin:
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.params = small_params()

    def path(self, *parts):
        return os.path.join(self.tmp.name, *parts)

    def run_command(self, *args, **kwargs):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO(), **kwargs)
        return out.getvalue()

    def assertExitCode(self, code, *args, **kwargs):
        with self.assertRaises(CommandError) as ctx:
            self.run_command(*args, **kwargs)
        self.assertEqual(ctx.exception.returncode, code)
        return ctx.exception

    def write_resting_demo(self, name='demos.json'):
        demo = Demonstration(np.zeros((1, 3)), resting_goal(self.params), 'rest')
        dump_demonstrations(self.path(name), [demo], self.params, seed=0)
        return self.path(name)


class CompareCommandTests(CommandTestMixin, SimpleTestCase):
    def write_report(self, name, values):
        rows = [
            {'episode': i, 'fabric_index': 0, 'd0': v, 'd1': 0.0, 'd_sum': v, 'success': False, 'steps': 25}
            for i, v in enumerate(values)
        ]
        dump_report(self.path(name), EvalReport(rows, mode='fixed'))
        return self.path(name)

    def test_compare_prints_u_and_p(self):
        a = self.write_report('a.json', [1.0, 2.0])
        b = self.write_report('b.json', [3.0, 4.0])
        output = self.run_command('compare', a, b)
        self.assertIn('U = 0, p = 0.333333 (exact)', output)

    def test_compare_other_metric(self):
        a = self.write_report('a.json', [1.0, 2.0])
        b = self.write_report('b.json', [3.0, 4.0])
        output = self.run_command('compare', a, b, '--metric', 'd1')
        self.assertIn('p = 1 (exact)', output)

    def test_missing_report_is_usage_error(self):
        a = self.write_report('a.json', [1.0])
        self.assertExitCode(1, 'compare', a, self.path('missing.json'))

    def test_empty_report_is_usage_error(self):
        a = self.write_report('a.json', [1.0])
        b = self.write_report('b.json', [])
        self.assertExitCode(1, 'compare', a, b)

    def test_bad_metric_is_usage_error(self):
        a = self.write_report('a.json', [1.0])
        self.assertExitCode(1, 'compare', a, a, '--metric', 'reward')


class DemonstrateCommandTests(CommandTestMixin, SimpleTestCase):
    def test_writes_requested_demonstrations(self):
        config = write_config(self.tmp.name)
        demo = Demonstration(np.zeros((2, 3)), Goal(np.zeros(3), np.zeros(3)))
        with mock.patch('harness.management.commands.demonstrate.scripted_expert', return_value=demo):
            output = self.run_command('demonstrate', config=config, count=2, out=self.path('out', 'demos.json'))
        self.assertIn('Wrote 2 demonstrations', output)
        demos, reference = load_demonstrations(self.path('out', 'demos.json'))
        self.assertEqual(len(demos), 2)
        self.assertEqual(reference.grid_n, 5)

    def test_expert_failure_is_runtime_error(self):
        config = write_config(self.tmp.name)
        failure = ExpertGenerationError('no rollout reached the goal')
        with mock.patch('harness.management.commands.demonstrate.scripted_expert', side_effect=failure):
            self.assertExitCode(2, 'demonstrate', config=config, count=1, out=self.path('demos.json'))

    def test_missing_output_is_usage_error(self):
        self.assertExitCode(1, 'demonstrate', config=write_config(self.tmp.name))


class IdentifyCommandTests(CommandTestMixin, SimpleTestCase):
    def test_pool_has_pool_size_entries(self):
        demos = self.write_resting_demo()
        config = write_config(self.tmp.name, paths__demos='demos.json', paths__pool='pool.json')
        output = self.run_command('identify', config=config)
        self.assertIn('Wrote 3 fabrics', output)
        pool = load_pool(self.path('pool.json'))
        self.assertEqual(len(pool), 3)
        self.assertTrue(os.path.isfile(demos))

    def test_same_seed_same_pool_bytes(self):
        self.write_resting_demo()
        config = write_config(self.tmp.name, paths__demos='demos.json')
        for name in ('a.json', 'b.json'):
            self.run_command('identify', config=config, out=self.path(name))
        with open(self.path('a.json'), 'rb') as a, open(self.path('b.json'), 'rb') as b:
            self.assertEqual(a.read(), b.read())

    def test_missing_demo_file_is_usage_error(self):
        config = write_config(self.tmp.name, paths__demos='absent.json', paths__pool='pool.json')
        error = self.assertExitCode(1, 'identify', config=config)
        self.assertIn('absent.json', str(error))

    def test_malformed_demo_file_is_runtime_error(self):
        with open(self.path('demos.json'), 'w') as f:
            f.write('{"seed": 0}')
        config = write_config(self.tmp.name, paths__demos='demos.json', paths__pool='pool.json')
        self.assertExitCode(2, 'identify', config=config)

    def test_unknown_config_key_is_usage_error(self):
        config = write_config(self.tmp.name, identify__budget='3')
        self.assertExitCode(1, 'identify', config=config, out=self.path('pool.json'))


class EvalCommandTests(CommandTestMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        self.demos = self.write_resting_demo()
        self.config = write_config(self.tmp.name)

    def test_zero_episodes_gives_undefined_rate(self):
        output = self.run_command(
            'eval', config=self.config, trajectory=self.demos, episodes=0, out=self.path('report.json'),
        )
        self.assertIn('Success rate undefined over 0 episodes', output)
        report = load_report(self.path('report.json'))
        self.assertEqual(report.aggregates['success_rate'], 'undefined')

    def test_replayed_successful_trajectory(self):
        output = self.run_command(
            'eval', config=self.config, trajectory=self.demos, episodes=3, out=self.path('report.json'),
        )
        self.assertIn('Success rate 1.00 over 3 episodes', output)
        report = load_report(self.path('report.json'))
        self.assertEqual([row['steps'] for row in report.rows], [11, 11, 11])

    def test_grouped_by_fabric(self):
        fabrics = [self.params, small_params(k_struct=50.0), small_params(damping=0.05)]
        dump_pool(self.path('pool.json'), FabricPool(fabrics, [0.9, 0.8, 0.7], seed=0))
        config = write_config(self.tmp.name, paths__pool='pool.json')
        self.run_command(
            'eval', config=config, trajectory=self.demos, episodes=10, fabrics=3, out=self.path('report.json'),
        )
        report = load_report(self.path('report.json'))
        self.assertEqual(len(report.rows), 30)
        per_fabric = report.per_fabric()
        self.assertEqual(sorted(per_fabric), [0, 1, 2])
        self.assertTrue(all(summary['episodes'] == 10 for summary in per_fabric.values()))

    def test_too_many_fabrics_is_usage_error(self):
        dump_pool(self.path('pool.json'), FabricPool([self.params], [0.9], seed=0))
        config = write_config(self.tmp.name, paths__pool='pool.json')
        self.assertExitCode(1, 'eval', config=config, trajectory=self.demos, fabrics=2)

    def test_checkpoint_or_trajectory_required(self):
        self.assertExitCode(1, 'eval', config=self.config)
        self.assertExitCode(1, 'eval', config=self.config, trajectory=self.demos, checkpoint=self.demos)

    def test_missing_checkpoint_is_usage_error(self):
        self.assertExitCode(1, 'eval', config=self.config, checkpoint=self.path('absent.bin'))


class ReplayCommandTests(CommandTestMixin, SimpleTestCase):
    def setUp(self):
        super().setUp()
        demos = self.write_resting_demo()
        self.log = self.path('episode.jsonl')
        self.run_command(
            'eval', config=write_config(self.tmp.name), trajectory=demos, episodes=1, trajectory_log=self.log,
        )

    def test_one_frame_per_policy_step(self):
        # 11 шагов до удержания, плюс запись reset в журнале
        with open(self.log) as f:
            self.assertEqual(len(f.readlines()), 12)
        output = self.run_command('replay', self.log, '--image-size', '16')
        frames = sorted(os.listdir(self.path('episode_frames')))
        self.assertEqual(len(frames), 11)
        self.assertEqual(frames[0], 'frame_0000.pgm')
        self.assertEqual(frames[-1], 'frame_0010.pgm')
        self.assertIn('Wrote 11 frames', output)
        self.assertNotIn('step   0', output)
        self.assertIn('step  11', output)
        self.assertNotIn('differs', output)

    def test_truncated_log_reports_line(self):
        with open(self.log, 'rb') as f:
            content = f.read()
        with open(self.log, 'wb') as f:
            f.write(content[:-30])
        error = self.assertExitCode(2, 'replay', self.log)
        self.assertIn('line 12', str(error))

    def test_missing_log_is_usage_error(self):
        self.assertExitCode(1, 'replay', self.path('absent.jsonl'))


class TrainCommandTests(CommandTestMixin, TestCase):
    def train(self, config, out, **kwargs):
        return self.run_command('train', config=config, out=out, **kwargs)

    def read_metrics(self, out):
        with open(os.path.join(out, 'metrics.csv')) as f:
            return list(csv.reader(f))

    def test_smoke_run_writes_one_row_per_epoch(self):
        out = self.path('run')
        output = self.train(write_config(self.tmp.name), out)
        self.assertIn('Training finished: 2 epochs', output)
        rows = self.read_metrics(out)
        self.assertEqual(rows[0][:3], ['epoch', 'success_rate', 'mean_d_sum'])
        self.assertEqual([row[0] for row in rows[1:]], ['0', '1'])
        self.assertTrue(os.path.isfile(os.path.join(out, 'checkpoint.bin')))
        self.assertTrue(os.path.isfile(os.path.join(out, 'best.bin')))

        run = TrainingRun.objects.get(output_dir=out)
        self.assertEqual(run.status, 'finished')
        self.assertEqual(run.epochs_done, 2)
        self.assertEqual(EpochMetric.objects.filter(run=run).count(), 2)

        report_output = self.run_command(
            'eval', config=write_config(self.tmp.name), checkpoint=os.path.join(out, 'best.bin'), episodes=2,
        )
        self.assertIn('over 2 episodes', report_output)

    def test_same_seed_same_metrics(self):
        config = write_config(self.tmp.name)
        self.train(config, self.path('a'))
        self.train(config, self.path('b'))
        self.assertEqual(self.read_metrics(self.path('a')), self.read_metrics(self.path('b')))

    def test_fixed_mode_never_renders(self):
        with mock.patch('folding.env.render', side_effect=AssertionError('rendered an image')):
            self.train(write_config(self.tmp.name), self.path('run'))

    def test_visual_mode_with_demonstrations(self):
        demos = self.write_resting_demo()
        config = write_config(self.tmp.name, run__mode='ours-minus', schedule__epochs='1', paths__demos='demos.json')
        out = self.path('visual')
        self.train(config, out)
        self.assertEqual(len(self.read_metrics(out)), 2)
        self.assertTrue(os.path.isfile(demos))

    def test_interrupted_run_resumes(self):
        out = self.path('run')
        self.train(write_config(self.tmp.name, name='one.conf', schedule__epochs='1'), out)
        run = TrainingRun.objects.get(output_dir=out)
        run.status = 'interrupted'
        run.save()

        output = self.train(write_config(self.tmp.name, name='two.conf', schedule__epochs='2'), out)
        self.assertIn('at epoch 1', output)
        self.assertEqual([row[0] for row in self.read_metrics(out)[1:]], ['0', '1'])

    def test_keyboard_interrupt_marks_run(self):
        out = self.path('run')
        with mock.patch('harness.management.commands.train.train_loop', side_effect=KeyboardInterrupt):
            self.assertExitCode(2, 'train', config=write_config(self.tmp.name), out=out)
        self.assertEqual(TrainingRun.objects.get(output_dir=out).status, 'interrupted')

    def test_pool_mode_without_pool_is_usage_error(self):
        config = write_config(self.tmp.name, paths__pool='pool.json')
        self.assertExitCode(1, 'train', '--mode=ours', config=config, out=self.path('run'))

    def test_unknown_mode_is_usage_error(self):
        self.assertExitCode(1, 'train', '--mode=best', config=write_config(self.tmp.name))
