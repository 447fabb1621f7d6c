import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from evolution.enumeration import exhaustive_front
from experiments.analysis import BOUNDARIES, boundary_dominance
from experiments.persistence import export_front, write_frame
from experiments.runner import output_dir, run_config_from_settings, run_scenario
from production.domain import DomainError

from ._common import add_dataset_arguments, add_run_arguments, as_list, load_for_command, option

CONTENDERS = ("nsjade", "nsga2")


def recovered(oracle: np.ndarray, found: np.ndarray) -> bool:
    """Every point of the exact front appears among the found points."""
    found = np.asarray(found, dtype=float).reshape(-1, 2)
    return all(np.isclose(found, point).all(axis=1).any() for point in oracle)


class Command(BaseCommand):
    help = "Run NSJADE and NSGA-II on the same scenarios and compare their boundary points."

    def add_arguments(self, parser):
        add_dataset_arguments(parser, lists=True)
        add_run_arguments(parser)
        parser.add_argument("--oracle", action="store_true",
                            help="also enumerate the exact front (small instances only)")

    def handle(self, *args, **options):
        s_days = as_list(options.get("sday"), int, settings.STITCHPLAN['SDAY'])
        if not s_days:
            raise CommandError("--sday list is empty")
        runs = option(options, "runs", "RUNS")
        jobs = option(options, "jobs", "JOBS")
        directory = output_dir(options.get("out"))

        stats_frames, dominance_rows, oracle_rows = [], [], []
        try:
            for s_day in s_days:
                dataset = load_for_command(options, s_day=s_day)
                outcomes = {}
                for algorithm in CONTENDERS:
                    config = run_config_from_settings(
                        algorithm=algorithm,
                        s_day=s_day,
                        beta=options.get("beta"),
                        h_samples=options.get("h_samples"),
                        np_size=options.get("np_size"),
                        xi=options.get("xi"),
                        g_max=options.get("g_max"),
                        seed=options.get("seed"),
                        noise_scope=options.get("noise_scope"),
                    )
                    outcomes[algorithm] = run_scenario(config, dataset, runs, jobs, directory)
                    stats = outcomes[algorithm].stats.copy()
                    stats.insert(0, "s_day", s_day)
                    stats.insert(0, "algorithm", algorithm)
                    stats_frames.append(stats)

                holds = boundary_dominance(outcomes["nsjade"].stats, outcomes["nsga2"].stats)
                for boundary in BOUNDARIES:
                    dominance_rows.append({"s_day": s_day, "boundary": boundary, "nsjade_not_dominated": holds[boundary]})
                    style = self.style.SUCCESS if holds[boundary] else self.style.WARNING
                    verdict = "not dominated" if holds[boundary] else "dominated"
                    self.stdout.write(style(f"s_day={s_day} {boundary}: NSJADE mean point {verdict} by NSGA-II"))

                if options["oracle"]:
                    oracle = exhaustive_front(dataset)
                    export_front(oracle, directory / f"oracle_sday{s_day}.csv")
                    for algorithm in CONTENDERS:
                        hits = sum(recovered(oracle, front) for front in outcomes[algorithm].fronts)
                        oracle_rows.append({"s_day": s_day, "algorithm": algorithm, "recovered": hits, "runs": runs})
                        self.stdout.write(f"s_day={s_day} {algorithm}: exact front recovered in {hits}/{runs} runs")
        except (ValueError, DomainError) as exc:
            raise CommandError(str(exc))

        write_frame(pd.concat(stats_frames, ignore_index=True), directory / "compare_boundary_stats.csv")
        write_frame(dominance_rows, directory / "compare_dominance.csv",
                    columns=["s_day", "boundary", "nsjade_not_dominated"])
        if options["oracle"]:
            write_frame(oracle_rows, directory / "compare_oracle.csv", columns=["s_day", "algorithm", "recovered", "runs"])
        self.stdout.write(self.style.SUCCESS(f"Comparison written to {directory}"))
