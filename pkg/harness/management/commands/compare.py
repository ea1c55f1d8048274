from harness.reports import METRICS, load_report
from harness.runtime import RunCommand, require_file, usage
from harness.stats import EXACT_LIMIT, mann_whitney_u


class Command(RunCommand):
    help = 'Compare two evaluation reports with the Mann-Whitney U test'

    def add_arguments(self, parser):
        parser.add_argument('report_a', help='First evaluation report')
        parser.add_argument('report_b', help='Second evaluation report')
        parser.add_argument('--metric', choices=METRICS, default='d_sum', help='Per-episode metric to compare')
        parser.add_argument('--exact-limit', type=int, default=EXACT_LIMIT,
                            help='Largest combined sample size for the exact p-value')

    def run(self, *args, **options):
        a = load_report(require_file(options['report_a'], 'report'))
        b = load_report(require_file(options['report_b'], 'report'))
        sample_a, sample_b = a.sample(options['metric']), b.sample(options['metric'])
        if not sample_a or not sample_b:
            raise usage('both reports must contain at least one episode')

        result = mann_whitney_u(sample_a, sample_b, options['exact_limit'])
        self.stdout.write(f'{options["metric"]}: n_a={len(sample_a)}, n_b={len(sample_b)}')
        self.stdout.write(self.style.SUCCESS(
            f'U = {result.statistic:g}, p = {result.pvalue:.6g} ({result.method})'
        ))
