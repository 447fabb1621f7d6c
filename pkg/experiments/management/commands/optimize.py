
from django.core.management.base import BaseCommand, CommandError

from experiments.runner import output_dir, run_config_from_settings, run_scenario
from production.domain import DomainError

from ._common import add_algorithm_argument, add_dataset_arguments, add_run_arguments, load_for_command, option


class Command(BaseCommand):
    help = "Evolve a robust schedule front for one (algorithm, s_day, beta, H) scenario."

    def add_arguments(self, parser):
        add_dataset_arguments(parser)
        add_algorithm_argument(parser)
        add_run_arguments(parser)

    def handle(self, *args, **options):
        s_day = option(options, "sday", "SDAY")
        dataset = load_for_command(options, s_day=s_day)
        runs = option(options, "runs", "RUNS")
        jobs = option(options, "jobs", "JOBS")
        if runs < 1:
            raise CommandError("--runs must be >= 1")
        beta = options.get("beta")
        if beta is None and options["algorithm"] == "jade":
            # the scalar trajectory run is noise-free unless asked otherwise
            beta = 0.0
        try:
            config = run_config_from_settings(
                algorithm=options["algorithm"],
                s_day=s_day,
                beta=beta,
                h_samples=options.get("h_samples"),
                np_size=options.get("np_size"),
                xi=options.get("xi"),
                g_max=options.get("g_max"),
                seed=options.get("seed"),
                noise_scope=options.get("noise_scope"),
            )
            outcome = run_scenario(config, dataset, runs, jobs, output_dir(options.get("out")))
        except (ValueError, DomainError) as exc:
            raise CommandError(str(exc))

        self.stdout.write(f"{outcome.record.label}: {len(outcome.record.points)} front points over {runs} run(s)")
        for f1, f2 in outcome.record.points:
            self.stdout.write(f"  f1={f1:g}  f2={f2:g}")
        self.stdout.write(self.style.SUCCESS(f"Results written to {outcome.directory}"))
