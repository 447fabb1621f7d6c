from django.conf import settings
from django.core.management.base import CommandError

from experiments.persistence import (
    DatasetNotFoundError,
    DatasetParseError,
    DatasetValidationError,
    load_dataset,
    prepare_dataset,
)
from production.noise import NOISE_SCOPES
from evolution.algorithms import ALGORITHMS


def comma_list(cast):
    def parse(value):
        items = [item.strip() for item in str(value).split(",") if item.strip()]
        try:
            return [cast(item) for item in items]
        except ValueError as exc:
            raise CommandError(f"bad list value {value!r}: {exc}")
    return parse


def add_dataset_arguments(parser, lists=False):
    parser.add_argument("--dataset", help="dataset JSON (default: settings.STITCHPLAN['DATASET'])")
    parser.add_argument("--sday", type=comma_list(int) if lists else int,
                        help="event-progress snapshot to schedule on, e.g. -3, -7, -14")
    parser.add_argument("--no-events", action="store_true", dest="no_events",
                        help="treat every pre-production event as finished")
    parser.add_argument("--flat-curves", action="store_true", dest="flat_curves",
                        help="replace every learning curve by a flat 100%% curve")


def add_run_arguments(parser, lists=False):
    beta = comma_list(float) if lists else float
    h_samples = comma_list(int) if lists else int
    parser.add_argument("--beta", type=beta, help="noise amplitude" + (" list" if lists else ""))
    parser.add_argument("--H", type=h_samples, dest="h_samples", help="noise samples per evaluation")
    parser.add_argument("--np", type=int, dest="np_size", help="population size")
    parser.add_argument("--xi", type=int, help="generation multiplier, G_max = D * xi")
    parser.add_argument("--gmax", type=int, dest="g_max", help="generations (overrides --xi)")
    parser.add_argument("--runs", type=int, help="independent seeds")
    parser.add_argument("--seed", type=int, help="first seed")
    parser.add_argument("--jobs", type=int, help="worker processes")
    parser.add_argument("--noise-scope", choices=NOISE_SCOPES, dest="noise_scope")
    parser.add_argument("--out", help="output directory (STITCHPLAN_OUT overrides)")


def add_algorithm_argument(parser):
    parser.add_argument("--algo", choices=ALGORITHMS, default="nsjade", dest="algorithm")


def load_for_command(options, s_day=None):
    path = options.get("dataset") or settings.STITCHPLAN['DATASET']
    try:
        dataset = load_dataset(path)
    except (DatasetNotFoundError, DatasetParseError) as exc:
        raise CommandError(str(exc))
    except DatasetValidationError as exc:
        raise CommandError("invalid dataset:\n  " + "\n  ".join(exc.path_messages()))
    return prepare_dataset(
        dataset,
        s_day=s_day,
        no_events=options.get("no_events", False),
        flat_curves=options.get("flat_curves", False),
    )


def option(options, key, setting):
    value = options.get(key)
    return settings.STITCHPLAN[setting] if value is None else value


def as_list(value, cast, default):
    """Normalise an option that may arrive parsed, as raw text (call_command kwargs) or unset."""
    if value is None:
        return [default]
    if isinstance(value, str):
        return comma_list(cast)(value)
    if isinstance(value, (list, tuple)):
        return [cast(item) for item in value]
    return [cast(value)]
