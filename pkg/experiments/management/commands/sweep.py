from itertools import product

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from experiments.analysis import beta_shift_sign_test
from experiments.persistence import write_frame
from experiments.runner import fronts_long_frame, mean_front_f1, output_dir, run_config_from_settings, run_scenario
from production.domain import DomainError

from ._common import add_algorithm_argument, add_dataset_arguments, add_run_arguments, as_list, load_for_command, option

SHIFT_COLUMNS = ["s_day", "H", "beta_low", "beta_high", "positives", "negatives", "ties", "p_value", "significant"]


class Command(BaseCommand):
    help = (
        "Run a grid of scenarios over comma-separated --beta, --H and --sday lists "
        "(write negative lists as --sday=-3,-7) and sign-test the front shift between neighbouring betas."
    )

    def add_arguments(self, parser):
        add_dataset_arguments(parser, lists=True)
        add_algorithm_argument(parser)
        add_run_arguments(parser, lists=True)

    def handle(self, *args, **options):
        defaults = settings.STITCHPLAN
        grid = {
            "--beta": as_list(options.get("beta"), float, defaults['BETA']),
            "--H": as_list(options.get("h_samples"), int, defaults['H']),
            "--sday": as_list(options.get("sday"), int, defaults['SDAY']),
        }
        for name, values in grid.items():
            if not values:
                raise CommandError(f"{name} list is empty")
        betas = sorted(set(grid["--beta"]))
        h_values = grid["--H"]
        s_days = grid["--sday"]
        runs = option(options, "runs", "RUNS")
        jobs = option(options, "jobs", "JOBS")
        directory = output_dir(options.get("out"))

        outcomes = {}
        try:
            for s_day in s_days:
                dataset = load_for_command(options, s_day=s_day)
                for h_samples, beta in product(h_values, betas):
                    config = run_config_from_settings(
                        algorithm=options["algorithm"],
                        s_day=s_day,
                        beta=beta,
                        h_samples=h_samples,
                        np_size=options.get("np_size"),
                        xi=options.get("xi"),
                        g_max=options.get("g_max"),
                        seed=options.get("seed"),
                        noise_scope=options.get("noise_scope"),
                    )
                    outcome = run_scenario(config, dataset, runs, jobs, directory)
                    outcomes[(s_day, h_samples, beta)] = outcome
                    self.stdout.write(f"{outcome.record.label}: {len(outcome.record.points)} front points")
        except (ValueError, DomainError) as exc:
            raise CommandError(str(exc))

        write_frame(fronts_long_frame(outcomes.values()), directory / "fronts.csv")

        rows = []
        for s_day, h_samples in product(s_days, h_values):
            for low, high in zip(betas, betas[1:]):
                test = beta_shift_sign_test(
                    mean_front_f1(outcomes[(s_day, h_samples, low)]),
                    mean_front_f1(outcomes[(s_day, h_samples, high)]),
                )
                rows.append({
                    "s_day": s_day,
                    "H": h_samples,
                    "beta_low": low,
                    "beta_high": high,
                    "positives": test.positives,
                    "negatives": test.negatives,
                    "ties": test.ties,
                    "p_value": test.p_value,
                    "significant": test.significant(),
                })
                style = self.style.SUCCESS if test.significant() else self.style.WARNING
                self.stdout.write(style(
                    f"s_day={s_day} H={h_samples} beta {low:g} -> {high:g}: "
                    f"+{test.positives} -{test.negatives} ={test.ties} p={test.p_value:.4g}"
                ))
        write_frame(rows, directory / "beta_shift.csv", columns=SHIFT_COLUMNS)
        self.stdout.write(self.style.SUCCESS(f"Sweep written to {directory}"))
