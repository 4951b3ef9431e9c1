"""
Management command to run verification suites and write their rows as CSV
"""

from django.core.management.base import BaseCommand, CommandError
from pydantic import ValidationError

from partialslice.decorators import registered_suites
from partialslice.serializers import ExperimentConfig, default_config, describe_validation_error
from partialslice.services.base_service import ServiceException
from partialslice.services.report_service import emit_csv, summarize
from partialslice.services.verification_service import VerificationService


class Command(BaseCommand):
    help = 'Runs generalized partial-slice verification suites and writes suite,case,level,metric,value,tolerance,pass rows'

    def add_arguments(self, parser):
        parser.add_argument('--suite', help="Suite name or 'all' (default: the suites listed in the config)")
        parser.add_argument('--config', help='TOML experiment configuration (default: featured configuration)')
        parser.add_argument('--out', default='results.csv', help='CSV output path')
        parser.add_argument('--threads', type=int, help='Worker threads (default: GPS_THREADS)')
        parser.add_argument('--list-suites', action='store_true', help='Print the available suites and exit')

    def handle(self, *args, **options):
        if options['list_suites']:
            for name in ['all'] + registered_suites():
                self.stdout.write(name)
            return

        try:
            config = ExperimentConfig.from_toml(options['config']) if options['config'] else default_config()
        except ValidationError as e:
            raise CommandError(f"Invalid config:\n{describe_validation_error(e)}", returncode=1)
        except ServiceException as e:
            raise CommandError(str(e), returncode=1)

        names = [options['suite']] if options['suite'] else list(config.suites)
        service = VerificationService(config, threads=options['threads'])
        self.stdout.write(f"Running {', '.join(names)} (p={config.p}, q={config.q}, levels={config.levels})...")

        try:
            rows = []
            for name in self._expand(service, names):
                rows.extend(service.run_suite(name))
            emit_csv(rows, options['out'])
        except ServiceException as e:
            raise CommandError(str(e), returncode=1)

        failed = 0
        for suite, counts in summarize(rows).items():
            failed += counts['failed']
            line = f"  {suite}: {counts['passed']} passed, {counts['failed']} failed"
            self.stdout.write(self.style.ERROR(line) if counts['failed'] else self.style.SUCCESS(line))

        self.stdout.write(f"Wrote {len(rows)} rows to {options['out']}")
        if failed:
            raise CommandError(f"{failed} of {len(rows)} rows failed", returncode=1)
        self.stdout.write(self.style.SUCCESS('All rows passed'))

    @staticmethod
    def _expand(service: VerificationService, names):
        """Suite names with 'all' expanded and duplicates dropped, order kept."""
        expanded = []
        for name in names:
            for suite in service.suite_names(name):
                if suite not in expanded:
                    expanded.append(suite)
        return expanded
