from django.core.management.base import BaseCommand, CommandError

from experiments.persistence import evaluation_row, load_genome, write_frame, write_gantt, write_schedule
from experiments.runner import output_dir
from production.domain import DomainError
from production.noise import NOISE_SCOPES
from production.objectives import evaluate, robust_objectives
from production.sim import decode_genome, simulate

from ._common import add_dataset_arguments, load_for_command, option


class Command(BaseCommand):
    help = "Decode one genome into a schedule, print it per line and write its artifacts."

    def add_arguments(self, parser):
        parser.add_argument("--genome", required=True, help="JSON array or comma/whitespace separated numbers")
        add_dataset_arguments(parser)
        parser.add_argument("--beta", type=float, help="noise amplitude for the robust evaluation")
        parser.add_argument("--H", type=int, dest="h_samples", help="noise samples; enables the robust evaluation")
        parser.add_argument("--seed", type=int)
        parser.add_argument("--noise-scope", choices=NOISE_SCOPES, dest="noise_scope")
        parser.add_argument("--out", help="output directory (STITCHPLAN_OUT overrides)")

    def handle(self, *args, **options):
        dataset = load_for_command(options, s_day=options.get("sday"))
        try:
            genome = load_genome(options["genome"])
        except (OSError, ValueError) as exc:
            raise CommandError(f"cannot read genome: {exc}")

        try:
            plan = decode_genome(genome, dataset)
            schedule = simulate(plan, dataset)
            points = [evaluate(genome, dataset)]
            seed = None
            if options.get("h_samples") is not None:
                seed = option(options, "seed", "SEED")
                points.append(robust_objectives(
                    genome,
                    dataset,
                    h_samples=options["h_samples"],
                    beta=option(options, "beta", "BETA"),
                    rng_seed=seed,
                    noise_scope=option(options, "noise_scope", "NOISE_SCOPE"),
                ))
        except DomainError as exc:
            raise CommandError(str(exc))

        for line in dataset.lines:
            placed = " ".join(f"O{sub.order_id}({sub.quantity})" for sub in schedule.on_line(line.id))
            self.stdout.write(f"Line {line.id}: {placed}")
        for point in points:
            self.stdout.write(f"{point.kind}: f1={point.f1:g} f2={point.f2:g}")

        directory = output_dir(options.get("out"))
        write_schedule(schedule, points, directory / "schedule.json")
        write_gantt(schedule, directory / "gantt.csv")
        write_frame(
            [evaluation_row(genome, point, seed if point.kind == "robust" else None) for point in points],
            directory / "evaluations.csv",
        )
        self.stdout.write(self.style.SUCCESS(f"Schedule written to {directory}"))
