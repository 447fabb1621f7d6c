from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from experiments.persistence import DatasetNotFoundError, DatasetParseError, DatasetValidationError, load_dataset
from production.domain import DomainError
from production.objectives import conservative_starts


class Command(BaseCommand):
    help = "Check a dataset, report its capacity coverage and the conservative start of every order."

    def add_arguments(self, parser):
        parser.add_argument("--dataset", help="dataset JSON (default: settings.STITCHPLAN['DATASET'])")

    def handle(self, *args, **options):
        path = options.get("dataset") or settings.STITCHPLAN['DATASET']
        try:
            dataset = load_dataset(path)
        except (DatasetNotFoundError, DatasetParseError) as exc:
            raise CommandError(str(exc))
        except DatasetValidationError as exc:
            messages = exc.path_messages()
            for message in messages:
                self.stderr.write(message)
            raise CommandError(f"{path}: {len(messages)} violation(s)")

        self.stdout.write(self.style.SUCCESS(f"{path}: valid ({dataset.n} orders, {dataset.m} lines)"))

        report = dataset.capacity_report()
        self.stdout.write(
            f"workload {report.workload_minutes:.0f} min / {report.daily_capacity_minutes:.0f} min per day "
            f"= {report.min_makespan_days:.4f} days; latest due day {report.max_due_day}"
        )
        if not report.covered:
            self.stdout.write(self.style.WARNING("aggregate capacity cannot meet the latest due day"))

        snapshots = sorted(
            {day for order in dataset.orders for event in order.events for day in event.progress} | {dataset.s_day},
            reverse=True,
        )
        try:
            table = {s_day: conservative_starts(dataset.at_scenario(s_day)) for s_day in snapshots}
        except DomainError as exc:
            raise CommandError(str(exc))
        self.stdout.write("order " + " ".join(f"C@{s_day:>4}" for s_day in snapshots))
        for order in dataset.orders:
            cells = " ".join(f"{table[s_day][order.id]:>6}" for s_day in snapshots)
            self.stdout.write(f"{order.id:>5} {cells}")
