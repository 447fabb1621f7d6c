import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings as hypothesis_settings, strategies as st

from production.domain import Dataset, LearningCurve, Order, ProductionLine, ProductType
from production.objectives import ObjectiveKindError, ObjectivePoint
from production.sim import SPLIT_LEVELS, GenomeLayout

from .algorithms import (
    RunConfig,
    evaluate_population,
    initialize_population,
    run_jade_single,
    run_nsga2,
    run_nsjade,
    scalar_rank,
)
from .enumeration import enumerate_genomes, exhaustive_front
from .operators import (
    JadeState,
    archive_parents,
    jade_trial,
    polynomial_mutation,
    reflect_into_bounds,
    sample_f,
    sbx,
    stream,
    update_jade_state,
)
from .sorting import (
    aggregate_pareto,
    crowded_order,
    crowding_distance,
    dominates,
    fast_nondominated_sort,
    select_next_generation,
)


def toy_dataset(due_days=(2, 1, 2), quantities=(30, 20, 15)):
    """Three orders, two identical lines at 10 pieces a day, flat curves, no events."""
    product = ProductType(id=1, name="Skirts", learning_curve=LearningCurve.flat())
    lines = tuple(
        ProductionLine(id=i, efficiency_by_type={1: 1.0}, capacity_minutes_per_day=100.0) for i in (1, 2)
    )
    orders = tuple(
        Order(id=j, product_type=1, quantity=q, due_day=d, smv=10.0)
        for j, (q, d) in enumerate(zip(quantities, due_days), start=1)
    )
    return Dataset(lines=lines, orders=orders, types=(product,), s_day=0)


def brute_force_fronts(points):
    remaining = list(range(len(points)))
    fronts = []
    while remaining:
        front = [
            i for i in remaining
            if not any(
                all(a <= b for a, b in zip(points[j], points[i])) and points[j] != points[i]
                for j in remaining
            )
        ]
        fronts.append(front)
        remaining = [i for i in remaining if i not in front]
    return fronts


point_lists = st.lists(
    st.tuples(st.integers(min_value=0, max_value=12), st.integers(min_value=0, max_value=12)),
    min_size=1,
    max_size=200,
)


class DominanceTests(SimpleTestCase):
    def test_examples(self):
        self.assertFalse(dominates((1, 5), (5, 0)))
        self.assertTrue(dominates((0, 0), (1, 5)))
        self.assertFalse(dominates((2, 3), (2, 3)))

    def test_objective_points(self):
        self.assertTrue(dominates(ObjectivePoint.deterministic(0, 0), ObjectivePoint.deterministic(1, 5)))
        with self.assertRaises(ObjectiveKindError):
            dominates(ObjectivePoint.deterministic(0, 0), ObjectivePoint.robust(1, 5, 5, 0.2))


class SortingTests(SimpleTestCase):
    def test_chain(self):
        self.assertEqual(fast_nondominated_sort([(0, 0), (1, 1)]), [[0], [1]])

    def test_mutually_nondominated(self):
        self.assertEqual(fast_nondominated_sort([(1, 5), (5, 0), (3, 3)]), [[0, 1, 2]])

    @given(point_lists)
    @hypothesis_settings(max_examples=50, deadline=None)
    def test_matches_brute_force(self, points):
        self.assertEqual(fast_nondominated_sort(points), brute_force_fronts(points))

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            size = int(rng.integers(1, 41))
            points = [tuple(p) for p in rng.integers(0, 8, size=(size, 2)).tolist()]
            self.assertEqual(fast_nondominated_sort(points), brute_force_fronts(points))
        for size in rng.integers(150, 201, size=10):
            points = [tuple(p) for p in rng.integers(0, 30, size=(int(size), 2)).tolist()]
            self.assertEqual(fast_nondominated_sort(points), brute_force_fronts(points))

    def test_crowding_two_points(self):
        self.assertTrue(np.all(np.isinf(crowding_distance([(0, 1), (1, 0)]))))

    def test_crowding_collinear(self):
        distance = crowding_distance([(0, 2), (1, 1), (2, 0)])
        self.assertTrue(np.isinf(distance[0]) and np.isinf(distance[2]))
        self.assertAlmostEqual(distance[1], 2.0)

    def test_crowding_identical_points(self):
        distance = crowding_distance([(3, 3)] * 5)
        self.assertEqual(int(np.isinf(distance).sum()), 2)
        self.assertEqual(distance[~np.isinf(distance)].tolist(), [0.0, 0.0, 0.0])


class SelectionTests(SimpleTestCase):
    def test_identical_pool_keeps_first_by_index(self):
        self.assertEqual(sorted(select_next_generation([(1, 1)] * 8, 4)), [0, 1, 2, 3])

    def test_last_front_split_by_crowding(self):
        self.assertEqual(crowded_order(["b", "c", "d"], [math.inf, 1.0, 2.0]), ["b", "d", "c"])
        # a dominates the rest; of b, c, d only a boundary fits beside it
        chosen = select_next_generation([(0, 0), (1, 3), (2, 2), (3, 1)], 2)
        self.assertEqual(chosen, [0, 1])

    def test_exact_fit(self):
        pool = [(0, 2), (1, 1), (2, 0), (3, 3), (4, 4), (5, 5)]
        self.assertEqual(sorted(select_next_generation(pool, 3)), [0, 1, 2])

    @given(point_lists.filter(lambda p: len(p) >= 2))
    @hypothesis_settings(max_examples=100, deadline=None)
    def test_elitism(self, points):
        size = len(points) // 2
        chosen = select_next_generation(points, size)
        self.assertEqual(len(chosen), size)
        first = fast_nondominated_sort(points)[0]
        distinct = {points[i] for i in first}
        if len(first) <= size:
            self.assertTrue(distinct <= {points[i] for i in chosen})

    def test_aggregate_pareto(self):
        front = aggregate_pareto([np.array([[1.0, 5.0], [5.0, 0.0], [5.0, 0.0]])])
        self.assertEqual(front.tolist(), [[1.0, 5.0], [5.0, 0.0]])
        merged = aggregate_pareto([np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([[2.0, 2.0], [3.0, 1.0]])])
        self.assertEqual(merged.tolist(), [[0.0, 1.0], [1.0, 0.0]])


class JadeOperatorTests(SimpleTestCase):
    def setUp(self):
        self.lower = np.zeros(6)
        self.upper = np.full(6, 10.0)
        self.population = np.full((8, 6), 6.0)
        self.population[0] = 5.0
        self.ranking = np.arange(1, 9) % 8
        self.state = JadeState(capacity=8)

    def test_zero_f_and_cr_return_target(self):
        trial, f, cr = jade_trial(0, self.population, self.state, stream(1, 1), self.ranking,
                                  self.lower, self.upper, f=0.0, cr=0.0)
        self.assertTrue(np.array_equal(trial, self.population[0]))
        self.assertEqual((f, cr), (0.0, 0.0))

    def test_full_crossover_takes_donor(self):
        trial, _, _ = jade_trial(0, self.population, self.state, stream(1, 1), self.ranking,
                                 self.lower, self.upper, f=0.5, cr=1.0)
        self.assertTrue(np.allclose(trial, 5.5))

    def test_zero_crossover_changes_one_gene(self):
        trial, _, _ = jade_trial(0, self.population, self.state, stream(2, 1), self.ranking,
                                 self.lower, self.upper, f=0.5, cr=0.0)
        self.assertEqual(int(np.sum(trial != self.population[0])), 1)

    def test_sampled_f_in_unit_interval(self):
        rng = stream(3, 1)
        draws = np.array([sample_f(0.5, rng) for _ in range(100_000)])
        self.assertTrue(np.all((draws > 0) & (draws <= 1)))

    def test_update_without_successes(self):
        self.assertIs(update_jade_state(self.state, []), self.state)

    def test_update_fixed_point(self):
        state = update_jade_state(JadeState(mu_f=0.5, c=0.1), [(0.5, 0.5)])
        self.assertAlmostEqual(state.mu_f, 0.5, delta=1e-12)

    def test_update_lehmer_mean(self):
        state = update_jade_state(JadeState(mu_f=0.5, mu_cr=0.5, c=0.1), [(1.0, 0.9), (0.5, 0.1)])
        self.assertAlmostEqual(state.mu_f, 0.9 * 0.5 + 0.1 * (1.25 / 1.5), delta=1e-12)
        self.assertAlmostEqual(state.mu_f, 0.533333333333, delta=1e-12)
        self.assertAlmostEqual(state.mu_cr, 0.5, delta=1e-12)

    def test_archive_is_bounded(self):
        state = JadeState(capacity=3)
        for generation in range(4):
            state = archive_parents(state, np.full((2, 6), float(generation)), stream(4, 3, generation))
        self.assertEqual(state.archive.shape, (3, 6))

    def test_reflection(self):
        lower = np.array([0.0, 0.0, 0.0, 1.0])
        upper = np.array([10.0, 10.0, 10.0, 1.0])
        x = np.array([10.5, -1.0, 3.3, 7.0])
        self.assertTrue(np.allclose(reflect_into_bounds(x, lower, upper), [9.5, 1.0, 3.3, 1.0]))
        self.assertEqual(reflect_into_bounds(x, lower, upper)[2], 3.3)


class VariationTests(SimpleTestCase):
    @given(st.integers(min_value=0, max_value=10_000))
    @hypothesis_settings(max_examples=100, deadline=None)
    def test_offspring_stay_in_bounds(self, seed):
        dataset = toy_dataset()
        lower, upper = GenomeLayout.for_dataset(dataset).bounds()
        rng = stream(seed, 4)
        a, b = rng.uniform(lower, upper), rng.uniform(lower, upper)
        for child in sbx(a, b, lower, upper, 20.0, 0.9, rng):
            mutated = polynomial_mutation(child, lower, upper, 20.0, 0.5, rng)
            self.assertTrue(np.all((mutated >= lower) & (mutated <= upper)))

    def test_crossover_probability_zero_copies_parents(self):
        lower, upper = np.zeros(4), np.full(4, 10.0)
        a, b = np.array([1.0, 2.0, 3.0, 4.0]), np.array([9.0, 8.0, 7.0, 6.0])
        child_a, child_b = sbx(a, b, lower, upper, 20.0, 0.0, stream(1, 4))
        self.assertEqual((child_a.tolist(), child_b.tolist()), (a.tolist(), b.tolist()))
        self.assertIsNot(child_a, a)

    def test_identical_parents_are_not_crossed(self):
        lower, upper = np.zeros(4), np.full(4, 10.0)
        a = np.array([1.0, 2.0, 3.0, 4.0])
        for seed in range(20):
            for child in sbx(a, a.copy(), lower, upper, 20.0, 1.0, stream(seed, 4)):
                self.assertEqual(child.tolist(), a.tolist())

    def test_variation_is_reproducible_from_its_stream(self):
        dataset = toy_dataset()
        lower, upper = GenomeLayout.for_dataset(dataset).bounds()
        a, b = lower + 0.25 * (upper - lower), lower + 0.75 * (upper - lower)

        def offspring(seed):
            rng = stream(seed, 4, 1, 0)
            return [polynomial_mutation(c, lower, upper, 20.0, 0.5, rng) for c in sbx(a, b, lower, upper, 20.0, 1.0, rng)]

        first, again = offspring(8), offspring(8)
        for x, y in zip(first, again):
            self.assertEqual(x.tolist(), y.tolist())
        self.assertFalse(all(np.array_equal(x, y) for x, y in zip(first, offspring(9))))

    def test_mutation_leaves_fixed_genes(self):
        lower = np.array([0.0, 1.0, 0.0])
        upper = np.array([10.0, 1.0, 10.0])
        x = np.array([5.0, 1.0, 5.0])
        for seed in range(20):
            mutated = polynomial_mutation(x, lower, upper, 20.0, 1.0, stream(seed, 4))
            self.assertEqual(mutated[1], 1.0)
            self.assertTrue(np.all((mutated >= lower) & (mutated <= upper)))
        self.assertEqual(polynomial_mutation(x, lower, upper, 20.0, 0.0, stream(0, 4)).tolist(), x.tolist())


class AlgorithmTests(SimpleTestCase):
    def test_initial_population(self):
        dataset = toy_dataset()
        genomes = initialize_population(dataset, 30, stream(5, 0))
        layout = GenomeLayout.for_dataset(dataset)
        self.assertTrue(np.all(np.isin(genomes[:, layout.part_a], [1.0, 2.0])))
        self.assertTrue(np.all(np.isin(genomes[:, layout.part_b], SPLIT_LEVELS)))
        keys = genomes[:, layout.part_c]
        self.assertTrue(np.all((keys >= 1) & (keys <= 3) & (keys == np.round(keys))))

    def test_zero_generations_returns_initial_population(self):
        config = RunConfig(np_size=10, g_max=0, h_samples=1, beta=0.0, seed=3)
        result = run_nsjade(config, toy_dataset())
        self.assertEqual(len(result.stats), 1)
        self.assertEqual(result.objectives.shape, (10, 2))

    def test_runs_are_deterministic(self):
        config = RunConfig(np_size=12, g_max=5, h_samples=2, beta=0.2, seed=8)
        for runner in (run_nsjade, run_nsga2, run_jade_single):
            first = runner(config, toy_dataset())
            second = runner(config, toy_dataset())
            self.assertTrue(np.array_equal(first.genomes, second.genomes))
            self.assertTrue(np.array_equal(first.objectives, second.objectives))

    def test_parallel_evaluation_is_identical(self):
        dataset = toy_dataset()
        config = RunConfig(np_size=16, h_samples=5, beta=0.2, seed=42)
        genomes = initialize_population(dataset, 16, stream(42, 0))
        serial = evaluate_population(genomes, dataset, config, 0)
        with ThreadPoolExecutor(max_workers=8) as executor:
            parallel = evaluate_population(genomes, dataset, config, 0, executor.map)
        self.assertTrue(np.array_equal(serial, parallel))

    def test_jade_parameters_stay_in_range(self):
        result = run_nsjade(RunConfig(np_size=20, g_max=15, h_samples=1, beta=0.0, seed=1), toy_dataset())
        for row in result.stats:
            self.assertTrue(0 < row["mu_f"] <= 1)
            self.assertTrue(0 <= row["mu_cr"] <= 1)

    def test_final_front_not_dominated_by_initial(self):
        config = RunConfig(np_size=20, g_max=10, h_samples=1, beta=0.0, seed=4)
        initial = run_nsjade(RunConfig(np_size=20, g_max=0, h_samples=1, beta=0.0, seed=4), toy_dataset())
        final = run_nsjade(config, toy_dataset())
        for point in final.front():
            self.assertFalse(any(dominates(p, point) for p in initial.objectives))

    def test_jade_single_feasible_start(self):
        dataset = toy_dataset(due_days=(20, 20, 20))
        result = run_jade_single(RunConfig(algorithm="jade", np_size=10, g_max=3, h_samples=1, beta=0.0), dataset)
        self.assertEqual(result.stats[0]["best_f1"], 0.0)
        self.assertEqual(len(result.stats), 4)

    def test_jade_front_size_counts_best_f1_ties(self):
        config = RunConfig(algorithm="jade", np_size=12, g_max=4, h_samples=1, beta=0.0, seed=2)
        initial = run_jade_single(RunConfig(algorithm="jade", np_size=12, g_max=0, h_samples=1, beta=0.0, seed=2), toy_dataset())
        result = run_jade_single(config, toy_dataset())
        for run, row in ((initial, result.stats[0]), (result, result.stats[-1])):
            f1 = run.objectives[:, 0]
            self.assertEqual(row["front_size"], int(np.sum(f1 == f1.min())))
        two_levels = np.array([[3.0, 0.0], [1.0, 5.0], [1.0, 2.0], [4.0, 1.0]])
        self.assertEqual(scalar_rank(two_levels).tolist(), [1, 0, 0, 1])


class OracleTests(SimpleTestCase):
    def test_enumeration_size(self):
        # per order: 2 whole placements + 2 split placements x 4 levels; 3! sequences
        self.assertEqual(sum(1 for _ in enumerate_genomes(toy_dataset())), 10 ** 3 * 6)

    def test_front_is_a_single_point_without_events(self):
        front = exhaustive_front(toy_dataset())
        self.assertEqual(front.shape, (1, 2))
        self.assertEqual(front[0, 1], 0.0)

    def test_nsjade_recovers_exhaustive_front(self):
        dataset = toy_dataset()
        oracle = exhaustive_front(dataset)
        hits = 0
        for seed in range(5):
            config = RunConfig(np_size=50, g_max=200, h_samples=1, beta=0.0, seed=seed)
            hits += np.array_equal(run_nsjade(config, dataset).front(), oracle)
        self.assertGreaterEqual(hits, 4)

    def test_nsga2_recovers_exhaustive_front(self):
        dataset = toy_dataset()
        oracle = exhaustive_front(dataset)
        hits = 0
        for seed in range(5):
            config = RunConfig(algorithm="nsga2", np_size=50, g_max=200, h_samples=1, beta=0.0, seed=seed)
            hits += np.array_equal(run_nsga2(config, dataset).front(), oracle)
        self.assertGreaterEqual(hits, 4)
