import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from evolution.algorithms import RunConfig
from production.domain import Dataset, LearningCurve, Order, ProductionLine, ProductType
from production.objectives import robust_objectives

from .analysis import SignTest, beta_shift_sign_test, boundary_dominance, boundary_points, boundary_stats
from .persistence import (
    DatasetNotFoundError,
    DatasetParseError,
    DatasetValidationError,
    PfRecord,
    RunManifest,
    dataset_digest,
    export_front,
    load_dataset,
    load_genome,
    population_frame,
    prepare_dataset,
    read_front,
    save_dataset,
)
from .runner import output_dir, run_config_from_settings, run_seeds

NO_ENV_OUT = {**settings.STITCHPLAN, 'OUT_DIR': None}


def toy_dataset(due_days=(2, 1, 2), quantities=(30, 20, 15)):
    """Three orders on two identical lines at 10 pieces a day."""
    product = ProductType(id=1, name="Skirts", learning_curve=LearningCurve.flat())
    lines = tuple(
        ProductionLine(id=i, efficiency_by_type={1: 1.0}, capacity_minutes_per_day=100.0) for i in (1, 2)
    )
    orders = tuple(
        Order(id=j, product_type=1, quantity=q, due_day=d, smv=10.0)
        for j, (q, d) in enumerate(zip(quantities, due_days), start=1)
    )
    return Dataset(lines=lines, orders=orders, types=(product,), s_day=0, name="toy")


class TempDirTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()


class DatasetFileTests(TempDirTestCase):
    def test_missing_file(self):
        with self.assertRaises(DatasetNotFoundError):
            load_dataset(self.tmp / "nope.json")

    def test_truncated_json_reports_byte_offset(self):
        raw = '{"name": "é", "s_day": '.encode("utf-8")
        path = self.tmp / "broken.json"
        path.write_bytes(raw)
        with self.assertRaises(DatasetParseError) as caught:
            load_dataset(path)
        self.assertEqual(caught.exception.offset, len(raw))
        self.assertIn(f"byte {len(raw)}", str(caught.exception))

    def test_invalid_utf8_reports_byte_offset(self):
        path = self.tmp / "latin1.json"
        path.write_bytes(b'{"name": "\xff\xfe"}')
        with self.assertRaises(DatasetParseError) as caught:
            load_dataset(path)
        self.assertEqual(caught.exception.offset, 10)
        self.assertIn("byte 10: not UTF-8", str(caught.exception))

    def test_invariant_violation_is_keyed_by_path(self):
        payload = json.loads((save_dataset(toy_dataset(), self.tmp / "toy.json")).read_text())
        payload["orders"][0]["smv"] = 0
        path = self.tmp / "bad.json"
        path.write_text(json.dumps(payload))
        with self.assertRaises(DatasetValidationError) as caught:
            load_dataset(path)
        self.assertIn("orders[0].smv", caught.exception.message_dict)
        self.assertTrue(caught.exception.path_messages()[0].startswith("orders[0].smv: nonpositive_smv"))

    def test_schema_error_names_the_field(self):
        payload = json.loads((save_dataset(toy_dataset(), self.tmp / "toy.json")).read_text())
        del payload["lines"]
        path = self.tmp / "bad.json"
        path.write_text(json.dumps(payload))
        with self.assertRaises(DatasetValidationError) as caught:
            load_dataset(path)
        self.assertTrue(any(message.startswith("lines") for message in caught.exception.path_messages()))

    def test_save_and_load_round_trip(self):
        dataset = toy_dataset()
        path = save_dataset(dataset, self.tmp / "toy.json")
        loaded = load_dataset(path)
        self.assertEqual(loaded, dataset)
        self.assertEqual(dataset_digest(loaded), dataset_digest(dataset))
        self.assertEqual(save_dataset(loaded, self.tmp / "again.json").read_bytes(), path.read_bytes())

    def test_load_genome_formats(self):
        (self.tmp / "a.json").write_text("[1, 2, 0.5]")
        (self.tmp / "b.txt").write_text("1, 2\n0.5\n")
        for name in ("a.json", "b.txt"):
            np.testing.assert_array_equal(load_genome(self.tmp / name), [1.0, 2.0, 0.5])


class FrontExportTests(TempDirTestCase):
    def test_empty_front_has_header_only(self):
        path = export_front(np.empty((0, 2)), self.tmp / "front.csv")
        self.assertEqual(path.read_text(), "f1,f2\n")

    def test_rows_sorted_by_f1_then_f2(self):
        path = export_front(np.array([[5.0, 0.0], [1.0, 5.0]]), self.tmp / "front.csv")
        np.testing.assert_array_equal(read_front(path), [[1.0, 5.0], [5.0, 0.0]])

    def test_reexport_is_byte_identical(self):
        first = export_front(np.array([[2.5, 1.0], [0.2, 7.0]]), self.tmp / "first.csv")
        second = export_front(read_front(first), self.tmp / "second.csv")
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_record_keeps_only_nondominated_points(self):
        record = PfRecord("nsjade", -7, 0.2, 5, points=[[1, 5], [2, 6], [5, 0], [1, 5]])
        np.testing.assert_array_equal(record.points, [[1, 5], [5, 0]])
        self.assertEqual(record.label, "nsjade_sday-7_beta0.2_H5")
        self.assertEqual(record.scenario(), {"algorithm": "nsjade", "s_day": -7, "beta": 0.2, "H": 5})


class ManifestTests(TempDirTestCase):
    def test_started_before_finished(self):
        manifest = RunManifest.for_run(self.tmp / "run-1", RunConfig(np_size=10, seed=1), toy_dataset())
        manifest.start()
        self.assertFalse(RunManifest.is_complete(manifest.path))

        manifest.finish([self.tmp / "run-1" / "front.csv"])
        records = RunManifest.records(manifest.path)
        self.assertEqual([r["event"] for r in records], ["started", "finished"])
        self.assertEqual(records[0]["config"]["seed"], 1)
        self.assertEqual(records[0]["dataset_hash"], dataset_digest(toy_dataset()))
        self.assertTrue(RunManifest.is_complete(manifest.path))


class SettingsTests(SimpleTestCase):
    def test_overrides_skip_none(self):
        config = run_config_from_settings(algorithm="nsga2", beta=None, np_size=12)
        self.assertEqual(config.algorithm, "nsga2")
        self.assertEqual(config.np_size, 12)
        self.assertEqual(config.beta, settings.STITCHPLAN['BETA'])

    def test_output_dir_precedence(self):
        with override_settings(STITCHPLAN={**NO_ENV_OUT, 'DEFAULT_OUT_DIR': "/tmp/default"}):
            self.assertEqual(output_dir(None), Path("/tmp/default"))
            self.assertEqual(output_dir("/tmp/cli"), Path("/tmp/cli"))
        with override_settings(STITCHPLAN={**NO_ENV_OUT, 'OUT_DIR': "/tmp/env"}):
            self.assertEqual(output_dir("/tmp/cli"), Path("/tmp/env"))


class BoundaryStatsTests(SimpleTestCase):
    def test_mean_and_sample_std(self):
        stats = boundary_stats([np.array([[0.0, 10.0]]), np.array([[2.0, 12.0]])]).set_index("boundary")
        for boundary in ("min_f1", "min_f2"):
            row = stats.loc[boundary]
            self.assertEqual((row.f1_mean, row.f2_mean), (1.0, 11.0))
            self.assertAlmostEqual(row.f1_std, math.sqrt(2))
            self.assertAlmostEqual(row.f2_std, math.sqrt(2))
            self.assertEqual(row.runs, 2)

    def test_single_run_has_zero_std(self):
        stats = boundary_stats([np.array([[1.0, 4.0], [3.0, 0.0]])])
        self.assertEqual(list(stats.boundary), ["min_f1", "min_f2"])
        self.assertEqual(list(stats.f1_std), [0.0, 0.0])
        self.assertEqual(list(stats.f1_mean), [1.0, 3.0])

    def test_boundary_ties_use_other_objective(self):
        by_f1, by_f2 = boundary_points(np.array([[1.0, 5.0], [1.0, 3.0], [4.0, 0.0], [6.0, 0.0]]))
        np.testing.assert_array_equal(by_f1, [1.0, 3.0])
        np.testing.assert_array_equal(by_f2, [4.0, 0.0])

    def test_dominance_of_mean_points(self):
        better = boundary_stats([np.array([[1.0, 4.0], [3.0, 0.0]])])
        worse = boundary_stats([np.array([[2.0, 5.0], [3.0, 1.0]])])
        self.assertEqual(boundary_dominance(better, worse), {"min_f1": True, "min_f2": True})
        self.assertEqual(boundary_dominance(worse, better), {"min_f1": False, "min_f2": False})


class SignTestTests(SimpleTestCase):
    def test_all_positive(self):
        test = beta_shift_sign_test([1.0] * 6, [2.0] * 6)
        self.assertEqual((test.positives, test.negatives, test.ties), (6, 0, 0))
        self.assertAlmostEqual(test.p_value, 0.5 ** 6)
        self.assertTrue(test.significant())

    def test_ties_are_dropped(self):
        test = beta_shift_sign_test([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
        self.assertEqual(test, SignTest(0, 0, 3, 1.0))
        self.assertFalse(test.significant())

    def test_unmatched_samples_rejected(self):
        with self.assertRaises(ValueError):
            beta_shift_sign_test([1.0], [1.0, 2.0])

    def test_tardiness_grows_with_beta(self):
        # 19 pieces at 10 a day due on day 2: late only when noise eats more than one piece
        dataset = Dataset(
            lines=(ProductionLine(id=1, efficiency_by_type={1: 1.0}, capacity_minutes_per_day=100.0),),
            orders=(Order(id=1, product_type=1, quantity=19, due_day=2, smv=10.0),),
            types=(ProductType(id=1, name="Shirts", learning_curve=LearningCurve.flat()),),
            s_day=0,
        )
        genome = np.array([1.0, 1.0, 0.2, 1.0])
        means = {
            beta: [robust_objectives(genome, dataset, 50, beta, rng_seed=seed).f1 for seed in range(30)]
            for beta in (0.0, 0.2, 0.3)
        }
        self.assertEqual(set(means[0.0]), {0.0})
        for low, high in ((0.0, 0.2), (0.2, 0.3)):
            test = beta_shift_sign_test(means[low], means[high])
            self.assertEqual(test.negatives, 0)
            self.assertTrue(test.significant(0.01), test)


@override_settings(STITCHPLAN=NO_ENV_OUT)
class RunSeedsTests(SimpleTestCase):
    def assertSameRuns(self, first, second):
        self.assertEqual([r.config.seed for r in first], [r.config.seed for r in second])
        for a, b in zip(first, second):
            self.assertTrue(np.array_equal(a.genomes, b.genomes))
            self.assertTrue(np.array_equal(a.objectives, b.objectives))
            self.assertEqual(a.stats, b.stats)

    def test_process_pool_matches_serial_runs(self):
        config = RunConfig(np_size=8, g_max=3, h_samples=2, beta=0.2, seed=5)
        serial = run_seeds(config, toy_dataset(), runs=3, jobs=1)
        self.assertSameRuns(run_seeds(config, toy_dataset(), runs=3, jobs=2), serial)

    def test_pooled_evaluation_matches_serial_run(self):
        config = RunConfig(algorithm="nsga2", np_size=8, g_max=3, h_samples=2, beta=0.2, seed=5)
        serial = run_seeds(config, toy_dataset(), runs=1, jobs=1)
        self.assertSameRuns(run_seeds(config, toy_dataset(), runs=1, jobs=2), serial)

    def test_population_frame_rows_follow_individuals(self):
        [result] = run_seeds(RunConfig(np_size=8, g_max=2, h_samples=1, beta=0.0, seed=2), toy_dataset(), runs=1)
        frame = population_frame(result)
        self.assertEqual(frame["f1"].tolist(), result.objectives[:, 0].tolist())
        self.assertEqual(frame["rank"].tolist(), result.rank.tolist())
        self.assertEqual(frame[[f"g{i}" for i in range(12)]].to_numpy().tolist(), result.genomes.tolist())

    def test_jade_reaches_zero_tardiness_without_events_or_learning(self):
        dataset = prepare_dataset(load_dataset(settings.STITCHPLAN['DATASET']), no_events=True, flat_curves=True)
        config = RunConfig(algorithm="jade", np_size=100, g_max=200, h_samples=1, beta=0.0, seed=0)
        [result] = run_seeds(config, dataset, runs=1)
        self.assertEqual(result.best_f1, 0.0)
        best = [row["best_f1"] for row in result.stats]
        self.assertTrue(all(b <= a for a, b in zip(best, best[1:])))


class CommandTests(TempDirTestCase):
    def setUp(self):
        super().setUp()
        self.dataset_path = str(save_dataset(toy_dataset(), self.tmp / "toy.json"))
        self.out = self.tmp / "out"

    def call(self, name, **options):
        stdout, stderr = StringIO(), StringIO()
        call_command(name, stdout=stdout, stderr=stderr, **options)
        return stdout.getvalue()

    def small_run(self, **options):
        return dict(
            dataset=self.dataset_path, sday=0, np_size=6, g_max=0, runs=1, jobs=1,
            h_samples=1, beta=0.0, seed=1, out=str(self.out), **options
        )

    def test_validate_bundled_dataset(self):
        output = self.call("validate")
        self.assertIn("valid (20 orders, 6 lines)", output)
        self.assertIn("= 11.0514 days", output)
        self.assertIn("   13     22     18     11", output)

    def test_validate_reports_violations(self):
        payload = json.loads(Path(self.dataset_path).read_text())
        payload["orders"][0]["smv"] = 0
        bad = self.tmp / "bad.json"
        bad.write_text(json.dumps(payload))
        stderr = StringIO()
        with self.assertRaisesMessage(CommandError, "1 violation(s)"):
            call_command("validate", dataset=str(bad), stdout=StringIO(), stderr=stderr)
        self.assertIn("orders[0].smv: nonpositive_smv", stderr.getvalue())

    def test_undecodable_dataset_is_command_error(self):
        path = self.tmp / "latin1.json"
        path.write_bytes(b'{"name": "\xe9t\xe9"}')
        with self.assertRaisesMessage(CommandError, "malformed JSON at byte 10"):
            call_command("validate", dataset=str(path), stdout=StringIO(), stderr=StringIO())

    def test_missing_dataset_is_command_error(self):
        with self.assertRaisesMessage(CommandError, "dataset not found"):
            self.call("optimize", **{**self.small_run(), "dataset": str(self.tmp / "nope.json")})

    def test_optimize_writes_scenario_artifacts(self):
        output = self.call("optimize", **self.small_run())
        self.assertIn("Results written to", output)

        scenario = self.out / "nsjade_sday0_beta0_H1"
        self.assertTrue((scenario / "front.csv").exists())
        self.assertEqual(list(pd.read_csv(scenario / "boundary_stats.csv").boundary), ["min_f1", "min_f2"])
        run_dir = scenario / "run-1"
        self.assertTrue(RunManifest.is_complete(run_dir / "manifest.jsonl"))
        population = pd.read_csv(run_dir / "population.csv")
        self.assertEqual(len(population), 6)
        self.assertEqual(list(population.columns[:7]), ["f1", "f2", "rank", "crowding", "F", "CR", "g0"])
        self.assertEqual(population.shape[1], 6 + 12)
        self.assertEqual(len(pd.read_csv(run_dir / "stats.csv")), 1)

    def test_optimize_jade_writes_trajectory(self):
        self.call("optimize", **self.small_run(algorithm="jade"))
        trajectory = pd.read_csv(self.out / "jade_sday0_beta0_H1" / "run-1" / "trajectory.csv")
        self.assertEqual(list(trajectory.columns), ["generation", "best_f1", "mean_f1", "mu_f", "mu_cr"])

    def test_optimize_rejects_bad_config(self):
        with self.assertRaisesMessage(CommandError, "population size"):
            self.call("optimize", **{**self.small_run(), "np_size": 3})

    def test_decode_prints_lines_and_objectives(self):
        genome = self.tmp / "genome.txt"
        genome.write_text("1,1,2,2,1,1,0.2,0.2,0.2,1,2,3")
        output = self.call("decode", genome=str(genome), dataset=self.dataset_path, sday=0, out=str(self.out))
        self.assertIn("Line 1: O1(30) O3(15)", output)
        self.assertIn("Line 2: O2(20)", output)
        self.assertIn("deterministic: f1=5 f2=0", output)

        schedule = json.loads((self.out / "schedule.json").read_text())
        self.assertEqual(len(schedule["suborders"]), 3)
        gantt = pd.read_csv(self.out / "gantt.csv")
        self.assertEqual(list(gantt.columns), ["order", "suborder", "line", "start", "finish"])
        self.assertEqual(len(pd.read_csv(self.out / "evaluations.csv")), 1)

    def test_decode_robust_evaluation(self):
        genome = self.tmp / "genome.json"
        genome.write_text("[1, 1, 2, 2, 1, 1, 0.2, 0.2, 0.2, 1, 2, 3]")
        output = self.call(
            "decode", genome=str(genome), dataset=self.dataset_path, sday=0,
            h_samples=4, beta=0.2, seed=3, out=str(self.out),
        )
        self.assertIn("robust: f1=", output)
        evaluations = pd.read_csv(self.out / "evaluations.csv")
        self.assertEqual(list(evaluations.kind), ["deterministic", "robust"])

    def test_decode_rejects_wrong_length(self):
        genome = self.tmp / "genome.txt"
        genome.write_text("1 1 0.2 1")
        with self.assertRaises(CommandError):
            self.call("decode", genome=str(genome), dataset=self.dataset_path, sday=0, out=str(self.out))

    def test_sweep_writes_fronts_and_shift_tests(self):
        options = {**self.small_run(), "beta": "0,0.2", "runs": 2}
        output = self.call("sweep", **options)
        self.assertIn("beta 0 -> 0.2", output)

        fronts = pd.read_csv(self.out / "fronts.csv")
        self.assertEqual(list(fronts.columns), ["algorithm", "s_day", "beta", "H", "f1", "f2"])
        self.assertEqual(set(fronts.beta), {0.0, 0.2})
        shifts = pd.read_csv(self.out / "beta_shift.csv")
        self.assertEqual(len(shifts), 1)
        self.assertEqual(shifts.positives[0] + shifts.negatives[0] + shifts.ties[0], 2)

    def test_sweep_rejects_empty_list(self):
        with self.assertRaisesMessage(CommandError, "--beta list is empty"):
            self.call("sweep", **{**self.small_run(), "beta": ""})

    def test_compare_with_oracle(self):
        options = {**self.small_run(), "oracle": True}
        output = self.call("compare", **options)
        self.assertIn("NSJADE mean point", output)
        oracle = pd.read_csv(self.out / "compare_oracle.csv")
        self.assertEqual(list(oracle.algorithm), ["nsjade", "nsga2"])
        self.assertEqual(len(pd.read_csv(self.out / "compare_dominance.csv")), 2)
