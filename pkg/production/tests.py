import json
from dataclasses import replace

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase
from hypothesis import given, settings as hypothesis_settings, strategies as st
from hypothesis.extra.numpy import arrays

from .domain import (
    Dataset,
    DomainError,
    LearningCurve,
    Order,
    PreProductionEvent,
    ProductionLine,
    ProductType,
    curve_efficiency,
    validate_dataset,
)
from .noise import CounterNoise, NoiseExhaustedError, SequenceNoise
from .objectives import (
    ObjectiveKindError,
    ObjectivePoint,
    conservative_start,
    conservative_starts,
    evaluate,
    h,
    robust_objectives,
    total_clashes,
    total_tardiness,
)
from .serializers import dataset_payload, parse_dataset
from .sim import (
    GenomeLayout,
    SimulationError,
    daily_quantity,
    decode_genome,
    sequence_line,
    simulate,
    split_fraction,
)

RAMP = LearningCurve(breakpoints=((1, 0.5), (2, 0.7), (3, 0.85), (4, 1.0)))

# order id -> C_day for s_day = -3, -7, -14
CONSERVATIVE_STARTS = {
    1: (0, 0, 6), 2: (0, 0, 6), 3: (0, 0, 6), 4: (0, 3, 0), 5: (0, 0, 0),
    6: (7, 3, 0), 7: (0, 0, 6), 8: (12, 8, 1), 9: (0, 0, 6), 10: (12, 8, 1),
    11: (0, 0, 11), 12: (0, 0, 6), 13: (22, 18, 11), 14: (0, 13, 6), 15: (4, 0, 0),
    16: (12, 8, 1), 17: (0, 0, 11), 18: (0, 0, 0), 19: (0, 18, 11), 20: (17, 13, 6),
}


def bundled_dataset():
    with open(settings.STITCHPLAN['DATASET']) as handle:
        dataset, errors = parse_dataset(json.load(handle))
    assert not errors, errors
    return dataset


def toy_dataset(orders, curves=None, capacity=100.0, lines=1):
    """Lines of equal capacity sewing every type at 100%."""
    curves = curves or {1: LearningCurve.flat()}
    types = tuple(ProductType(id=t, name=f"type{t}", learning_curve=c) for t, c in sorted(curves.items()))
    return Dataset(
        lines=tuple(
            ProductionLine(id=i, efficiency_by_type={t.id: 1.0 for t in types}, capacity_minutes_per_day=capacity)
            for i in range(1, lines + 1)
        ),
        orders=tuple(orders),
        types=types,
        s_day=0,
    )


def order(order_id, quantity, smv=10.0, product_type=1, due_day=10, events=()):
    return Order(id=order_id, product_type=product_type, quantity=quantity, due_day=due_day, smv=smv, events=events)


class LearningCurveTests(SimpleTestCase):
    def test_first_breakpoint(self):
        self.assertEqual(curve_efficiency(RAMP, 1), 0.5)

    def test_exact_breakpoint(self):
        self.assertEqual(curve_efficiency(RAMP, 3), 0.85)

    def test_saturation(self):
        self.assertEqual(curve_efficiency(RAMP, 100), 1.0)
        self.assertEqual(curve_efficiency(RAMP, 4), RAMP.saturation_efficiency)

    def test_day_zero_rejected(self):
        with self.assertRaises(DomainError):
            curve_efficiency(RAMP, 0)

    @given(st.integers(min_value=1, max_value=50), st.integers(min_value=0, max_value=50))
    def test_monotone_in_days(self, day, step):
        self.assertLessEqual(curve_efficiency(RAMP, day), curve_efficiency(RAMP, day + step))


class DatasetTests(SimpleTestCase):
    def setUp(self):
        self.dataset = bundled_dataset()

    def test_bundled_dataset_shape(self):
        self.assertEqual(self.dataset.n, 20)
        self.assertEqual(self.dataset.m, 6)
        first = self.dataset.order(1)
        self.assertEqual((first.product_type, first.quantity, first.due_day, first.smv), (1, 870, 10, 14.20))
        line = self.dataset.line(1)
        self.assertEqual(line.capacity_minutes_per_day, 6720)
        self.assertEqual((line.efficiency(1), line.efficiency(3), line.efficiency(4)), (1.0, 0.8, 0.8))

    def test_bundled_dataset_is_valid(self):
        self.assertEqual(validate_dataset(self.dataset), [])

    def test_zero_smv_is_one_violation(self):
        orders = list(self.dataset.orders)
        orders[4] = replace(orders[4], smv=0.0)
        violations = validate_dataset(replace(self.dataset, orders=tuple(orders)))
        self.assertEqual([v.code for v in violations], ["nonpositive_smv"])
        self.assertEqual(violations[0].path, "orders[4].smv")

    def test_type_without_line_is_unschedulable(self):
        lines = tuple(
            replace(line, efficiency_by_type={**line.efficiency_by_type, 4: 0.0})
            for line in self.dataset.lines
        )
        violations = validate_dataset(replace(self.dataset, lines=lines))
        self.assertTrue(violations)
        self.assertEqual({v.code for v in violations}, {"unschedulable_order"})

    def test_capacity_covers_workload(self):
        report = self.dataset.capacity_report()
        self.assertAlmostEqual(report.workload_minutes, 434984.0, places=6)
        self.assertEqual(report.daily_capacity_minutes, 39360)
        self.assertAlmostEqual(report.min_makespan_days, 11.0514, places=3)
        self.assertTrue(report.covered)

    def test_without_events_and_flat_curves(self):
        relaxed = self.dataset.without_events().with_flat_curves()
        self.assertTrue(all(e.finished for o in relaxed.orders for e in o.events))
        self.assertEqual(curve_efficiency(relaxed.product_type(4).learning_curve, 1), 1.0)

    def test_unknown_fields_are_ignored_with_warning(self):
        with open(settings.STITCHPLAN['DATASET']) as handle:
            data = json.load(handle)
        data["comment"] = "extra"
        data["lines"][0]["colour"] = "blue"
        with self.assertLogs("production.serializers", level="WARNING") as logs:
            dataset, errors = parse_dataset(data)
        self.assertEqual(errors, [])
        self.assertEqual(dataset.m, 6)
        self.assertTrue(any("lines[0].colour" in line for line in logs.output))

    def test_structural_errors_are_path_qualified(self):
        with open(settings.STITCHPLAN['DATASET']) as handle:
            data = json.load(handle)
        data["orders"][3]["smv"] = "fast"
        del data["lines"][2]["capacity_minutes_per_day"]
        dataset, errors = parse_dataset(data)
        self.assertIsNone(dataset)
        self.assertTrue(any(e.startswith("orders[3].smv:") for e in errors), errors)
        self.assertTrue(any(e.startswith("lines[2].capacity_minutes_per_day:") for e in errors), errors)

    def test_lookups_follow_ids_not_listing_order(self):
        flat = [{"day": 1, "efficiency": 1.0}]
        dataset, errors = parse_dataset({
            "s_day": 0,
            "product_types": [
                {"id": 1, "name": "a", "learning_curve": flat},
                {"id": 2, "name": "b", "learning_curve": flat},
            ],
            "lines": [
                {"id": 2, "capacity_minutes_per_day": 100, "efficiency_by_type": {"2": 1.0}},
                {"id": 1, "capacity_minutes_per_day": 100, "efficiency_by_type": {"1": 1.0}},
            ],
            "orders": [
                {"id": 2, "product_type": 2, "quantity": 10, "due_day": 5, "smv": 10},
                {"id": 1, "product_type": 1, "quantity": 20, "due_day": 5, "smv": 10},
            ],
        })
        self.assertEqual(errors, [])
        self.assertEqual(validate_dataset(dataset), [])
        self.assertEqual(dataset.order(1).quantity, 20)
        self.assertEqual(dataset.line(2).efficiency(2), 1.0)

        # genome slots follow listing order: order 2 first, then order 1
        plan = decode_genome(np.array([2.0, 2.0, 1.0, 1.0, 0.2, 0.2, 1.0, 1.0]), dataset)
        self.assertEqual([(s.order_id, s.line_id) for s in plan.suborders()], [(2, 2), (1, 1)])
        schedule = simulate(plan, dataset)
        self.assertEqual((schedule.finish_day(1), schedule.finish_day(2)), (2, 1))

    def test_payload_round_trip(self):
        dataset, errors = parse_dataset(json.loads(json.dumps(dataset_payload(self.dataset))))
        self.assertEqual(errors, [])
        self.assertEqual(dataset, self.dataset)


class DecodeTests(SimpleTestCase):
    def test_equal_slots_give_unsplit_order(self):
        dataset = toy_dataset([order(1, 100)], lines=2)
        plan = decode_genome(np.array([2.0, 2.0, 0.6, 1.0]), dataset)
        [sub] = plan.suborders()
        self.assertEqual((sub.line_id, sub.quantity), (2, 100))

    def test_split_quantities(self):
        dataset = toy_dataset([order(1, 780), order(2, 870)], lines=2)
        genome = np.array([1.0, 2.0, 1.0, 2.0, 0.4, 0.4, 1.0, 2.0])
        plan = decode_genome(genome, dataset)
        self.assertEqual(
            [(s.order_id, s.line_id, s.quantity) for s in plan.suborders()],
            [(1, 1, 312), (1, 2, 468), (2, 1, 348), (2, 2, 522)],
        )
        self.assertEqual(plan.assignments[0].split_fraction, 0.4)

    def test_round_half_up_and_clamp(self):
        dataset = toy_dataset([order(1, 10)], lines=3)
        plan = decode_genome(np.array([1.5, 7.0, 0.2, 1.0]), dataset)
        self.assertEqual([s.line_id for s in plan.suborders()], [2, 3])

    def test_zero_efficiency_slot_is_repaired_upward(self):
        dataset = toy_dataset([order(1, 10)], lines=3)
        lines = (
            dataset.lines[0],
            replace(dataset.lines[1], efficiency_by_type={1: 0.0}),
            replace(dataset.lines[2], efficiency_by_type={1: 0.0}),
        )
        dataset = replace(dataset, lines=lines)
        plan = decode_genome(np.array([2.0, 3.0, 0.2, 1.0]), dataset)
        # both slots wrap around to line 1, so the order stays whole
        [sub] = plan.suborders()
        self.assertEqual(sub.line_id, 1)

    def test_degenerate_split_collapses(self):
        dataset = toy_dataset([order(1, 1)], lines=2)
        for selector in (0.2, 0.8):
            [sub] = decode_genome(np.array([1.0, 2.0, selector, 1.0]), dataset).suborders()
            self.assertEqual((sub.line_id, sub.quantity), (1, 1))

    def test_split_levels_at_bin_centres(self):
        self.assertEqual([split_fraction(v) for v in (0.2, 0.4, 0.6, 0.8)], [0.2, 0.4, 0.6, 0.8])
        self.assertEqual(split_fraction(0.1), 0.2)
        self.assertEqual(split_fraction(0.9), 0.8)

    def test_wrong_length_rejected(self):
        dataset = toy_dataset([order(1, 10)])
        with self.assertRaises(DomainError):
            decode_genome(np.ones(5), dataset)

    def test_sequence_by_key_then_id(self):
        dataset = toy_dataset([order(1, 10), order(2, 10), order(3, 10)], lines=2)
        genome = np.array([1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 0.2, 0.2, 0.2, 0.3, 0.1, 0.5])
        plan = decode_genome(genome, dataset)
        self.assertEqual([s.order_id for s in sequence_line(plan, dataset.line(1))], [2, 1])
        self.assertEqual([s.order_id for s in sequence_line(plan, dataset.line(2))], [3])

        tied = decode_genome(np.array([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 0.2, 0.5, 0.5, 0.5]), dataset)
        self.assertEqual([s.order_id for s in sequence_line(tied, dataset.line(1))], [1, 2, 3])
        self.assertEqual(sequence_line(tied, dataset.line(2)), [])


class SimulationTests(SimpleTestCase):
    def test_daily_quantity(self):
        self.assertAlmostEqual(daily_quantity(6720, 1.0, 1.0, 14.20), 473.2394366, places=6)
        self.assertAlmostEqual(daily_quantity(6720, 0.8, 1.0, 18.20), 295.3846154, places=6)
        low = daily_quantity(6720, 1.0, 1.0, 14.20, -0.2)
        high = daily_quantity(6720, 1.0, 1.0, 14.20, 0.2)
        self.assertAlmostEqual(low / high, 0.8 / 1.2)

    def test_daily_quantity_rejects_nonpositive_smv(self):
        with self.assertRaises(DomainError):
            daily_quantity(6720, 1.0, 1.0, 0.0)

    def test_single_order_two_days(self):
        dataset = toy_dataset([order(1, 870, smv=14.20)], capacity=6720)
        schedule = simulate(decode_genome(np.array([1.0, 1.0, 0.2, 1.0]), dataset), dataset)
        [sub] = schedule.suborders
        self.assertEqual((sub.a_day, sub.p_time, sub.f_day), (0, 2, 2))

    def test_same_type_successor_shares_partial_day(self):
        # 10 pieces/day; the first order leaves 50 minutes on day 2
        dataset = toy_dataset([order(1, 25), order(2, 5)])
        genome = np.array([1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 1.0, 2.0])
        schedule = simulate(decode_genome(genome, dataset), dataset)
        first, second = schedule.suborders
        self.assertEqual((first.a_day, first.f_day), (0, 3))
        self.assertEqual((second.a_day, second.p_time, second.f_day), (2, 1, 3))
        self.assertAlmostEqual(second.daily_quantities[0], 5.0)

    def test_learning_continues_for_same_type(self):
        curves = {1: LearningCurve(((1, 0.5), (2, 1.0))), 2: LearningCurve(((1, 0.5), (2, 1.0)))}
        genome = np.array([1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 1.0, 2.0])

        same = toy_dataset([order(1, 15), order(2, 10)], curves=curves)
        second = simulate(decode_genome(genome, same), same).suborders[1]
        self.assertEqual((second.a_day, second.p_time), (2, 1))

        reset = toy_dataset([order(1, 15), order(2, 10, product_type=2)], curves=curves)
        second = simulate(decode_genome(genome, reset), reset).suborders[1]
        self.assertEqual((second.a_day, second.p_time), (2, 2))
        self.assertEqual(second.daily_quantities, (5.0, 10.0))

    def test_different_type_starts_next_day(self):
        curves = {1: LearningCurve.flat(), 2: LearningCurve.flat()}
        dataset = toy_dataset([order(1, 25), order(2, 5, product_type=2)], curves=curves)
        genome = np.array([1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 1.0, 2.0])
        second = simulate(decode_genome(genome, dataset), dataset).suborders[1]
        self.assertEqual((second.a_day, second.f_day), (3, 4))
        self.assertAlmostEqual(second.daily_quantities[0], 10.0)

    def test_explicit_noise_stream(self):
        dataset = toy_dataset([order(1, 25)])
        plan = decode_genome(np.array([1.0, 1.0, 0.2, 1.0]), dataset)
        [sub] = simulate(plan, dataset, [0.5, 0.5]).suborders
        self.assertEqual(sub.p_time, 2)
        self.assertEqual(sub.daily_quantities, (15.0, 15.0))
        with self.assertRaises(NoiseExhaustedError):
            simulate(plan, dataset, [0.0])

    def test_zero_efficiency_placement_is_internal_error(self):
        dataset = toy_dataset([order(1, 25)])
        plan = decode_genome(np.array([1.0, 1.0, 0.2, 1.0]), dataset)
        broken = replace(dataset, lines=(replace(dataset.line(1), efficiency_by_type={1: 0.0}),))
        with self.assertRaises(SimulationError):
            simulate(plan, broken)

    def test_noise_envelope(self):
        dataset = toy_dataset([order(1, 1_000_000)])
        plan = decode_genome(np.array([1.0, 1.0, 0.2, 1.0]), dataset)
        [sub] = simulate(plan, dataset, CounterNoise(seed=7, sample=0, beta=0.2)).suborders
        ratios = np.array(sub.daily_quantities) / np.array(sub.nominal_quantities)
        self.assertGreaterEqual(ratios.size, 90_000)
        self.assertTrue(np.all((ratios >= 0.8) & (ratios <= 1.2)))
        self.assertLess(abs(ratios.mean() - 1.0), 0.005)

    def test_line_day_scope_shares_draw(self):
        dataset = toy_dataset([order(1, 25), order(2, 5)])
        genome = np.array([1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 1.0, 2.0])
        plan = decode_genome(genome, dataset)
        first, second = simulate(plan, dataset, CounterNoise(3, 0, 0.1, scope="line_day")).suborders
        # at +-10% the first order always ends part way through day 2
        self.assertEqual(second.a_day, first.f_day - 1)
        shared_first = first.daily_quantities[-1] / first.nominal_quantities[-1]
        shared_second = second.daily_quantities[0] / second.nominal_quantities[0]
        self.assertAlmostEqual(shared_first, shared_second)

    @given(arrays(np.float64, 80, elements=st.floats(min_value=0.0, max_value=1.0)))
    @hypothesis_settings(max_examples=25, deadline=None)
    def test_schedule_invariants(self, unit):
        dataset = bundled_dataset()
        lower, upper = GenomeLayout.for_dataset(dataset).bounds()
        plan = decode_genome(lower + unit * (upper - lower), dataset)
        for assignment in plan.assignments:
            self.assertEqual(sum(s.quantity for s in assignment.suborders), dataset.order(assignment.order_id).quantity)
            for sub in assignment.suborders:
                self.assertTrue(dataset.line(sub.line_id).accepts(dataset.order(sub.order_id).product_type))
        schedule = simulate(plan, dataset, CounterNoise(1, 0, 0.2))
        for sub in schedule.suborders:
            self.assertEqual(sub.f_day - sub.a_day, sub.p_time)
            self.assertEqual(len(sub.daily_quantities), sub.p_time)
            self.assertGreaterEqual(sum(sub.daily_quantities), sub.quantity)
            self.assertLess(sum(sub.daily_quantities[:-1]), sub.quantity)

    @given(
        arrays(np.float64, 80, elements=st.floats(min_value=0.0, max_value=1.0)),
        st.integers(min_value=0, max_value=19),
        st.integers(min_value=1, max_value=500),
    )
    @hypothesis_settings(max_examples=25, deadline=None)
    def test_more_quantity_never_finishes_earlier(self, unit, index, extra):
        dataset = bundled_dataset()
        lower, upper = GenomeLayout.for_dataset(dataset).bounds()
        genome = lower + unit * (upper - lower)
        orders = list(dataset.orders)
        orders[index] = replace(orders[index], quantity=orders[index].quantity + extra)
        larger = replace(dataset, orders=tuple(orders))
        order_id = orders[index].id
        before = simulate(decode_genome(genome, dataset), dataset).finish_day(order_id)
        after = simulate(decode_genome(genome, larger), larger).finish_day(order_id)
        self.assertGreaterEqual(after, before)

    @given(arrays(np.float64, 80, elements=st.floats(min_value=0.0, max_value=1.0)), st.randoms())
    @hypothesis_settings(max_examples=25, deadline=None)
    def test_sequence_ignores_storage_order(self, unit, shuffler):
        dataset = bundled_dataset()
        lower, upper = GenomeLayout.for_dataset(dataset).bounds()
        plan = decode_genome(lower + unit * (upper - lower), dataset)
        assignments = [replace(a, suborders=tuple(reversed(a.suborders))) for a in plan.assignments]
        shuffler.shuffle(assignments)
        shuffled = replace(plan, assignments=tuple(assignments))
        for line in dataset.lines:
            self.assertEqual(sequence_line(shuffled, line), sequence_line(plan, line))
        self.assertEqual(simulate(shuffled, dataset).suborders, simulate(plan, dataset).suborders)


def with_events(dataset, offsets_unfinished):
    events = tuple(PreProductionEvent(name=f"e{k}", offset_days=-k, finished=False) for k in offsets_unfinished)
    return replace(dataset, orders=tuple(replace(o, events=events) for o in dataset.orders))


class ObjectiveTests(SimpleTestCase):
    def test_h(self):
        self.assertEqual([h(3), h(-2), h(0)], [0, 2, 0])

    def test_conservative_start_examples(self):
        sample_approval = order(1, 10, events=(PreProductionEvent("Sample Approval", -15, False),))
        self.assertEqual(conservative_start(sample_approval, s_day=-14, p_day=0), 1)
        finished = order(1, 10, events=(PreProductionEvent("Sample Approval", -15, True),))
        self.assertEqual(conservative_start(finished, s_day=-14, p_day=0), 0)
        markers = order(1, 10, events=(PreProductionEvent("Issue Markers", -7, False),))
        self.assertEqual(conservative_start(markers, s_day=-3, p_day=0), 4)

    def test_conservative_start_rejects_late_s_day(self):
        with self.assertRaises(DomainError):
            conservative_start(order(1, 10), s_day=2, p_day=0)

    def test_bundled_conservative_starts(self):
        dataset = bundled_dataset()
        for column, s_day in enumerate((-3, -7, -14)):
            starts = conservative_starts(dataset.at_scenario(s_day))
            for order_id, expected in CONSERVATIVE_STARTS.items():
                self.assertEqual(starts[order_id], expected[column], (order_id, s_day))

    def test_tardiness_and_clashes(self):
        dataset = with_events(toy_dataset([order(1, 25, due_day=2)]), [3])
        schedule = simulate(decode_genome(np.array([1.0, 1.0, 0.2, 1.0]), dataset), dataset)
        self.assertEqual(total_tardiness(schedule, dataset), 1.0)
        self.assertEqual(total_clashes(schedule, conservative_starts(dataset)), 3.0)

    def test_robust_beta_zero_matches_deterministic(self):
        dataset = bundled_dataset().at_scenario(-7)
        layout = GenomeLayout.for_dataset(dataset)
        lower, upper = layout.bounds()
        genome = np.random.default_rng(5).uniform(lower, upper)
        point = evaluate(genome, dataset)
        for h_samples in (1, 3):
            robust = robust_objectives(genome, dataset, h_samples=h_samples, beta=0.0, rng_seed=11)
            self.assertEqual(robust.as_tuple(), point.as_tuple())

    def test_robust_is_reproducible_and_averaged(self):
        dataset = bundled_dataset().at_scenario(-7)
        lower, upper = GenomeLayout.for_dataset(dataset).bounds()
        genome = np.random.default_rng(9).uniform(lower, upper)
        first = robust_objectives(genome, dataset, h_samples=5, beta=0.2, rng_seed=42)
        again = robust_objectives(genome, dataset, h_samples=5, beta=0.2, rng_seed=42)
        self.assertEqual(first, again)
        self.assertEqual((first.h_samples, first.beta), (5, 0.2))

        plan = decode_genome(genome, dataset)
        starts = conservative_starts(dataset)
        replayed = []
        for sample in range(5):
            schedule = simulate(plan, dataset, CounterNoise(42, sample, 0.2))
            replayed.append((total_tardiness(schedule, dataset), total_clashes(schedule, starts)))
        self.assertAlmostEqual(first.f1, np.mean([p[0] for p in replayed]))
        self.assertAlmostEqual(first.f2, np.mean([p[1] for p in replayed]))

    @given(
        arrays(np.float64, 80, elements=st.floats(min_value=0.0, max_value=1.0)),
        st.permutations(range(1, 7)),
    )
    @hypothesis_settings(max_examples=25, deadline=None)
    def test_objectives_survive_line_relabeling(self, unit, labels):
        dataset = bundled_dataset().at_scenario(-7)
        layout = GenomeLayout.for_dataset(dataset)
        lower, upper = layout.bounds()
        genome = lower + unit * (upper - lower)
        genome[layout.part_a] = np.clip(np.floor(genome[layout.part_a] + 0.5), 1, dataset.m)

        relabeled = replace(dataset, lines=tuple(replace(line, id=labels[line.id - 1]) for line in dataset.lines))
        moved = genome.copy()
        moved[layout.part_a] = [labels[int(line_id) - 1] for line_id in genome[layout.part_a]]
        self.assertEqual(validate_dataset(relabeled), [])
        self.assertEqual(evaluate(moved, relabeled).as_tuple(), evaluate(genome, dataset).as_tuple())

    def test_mixed_kinds_are_not_comparable(self):
        with self.assertRaises(ObjectiveKindError):
            ObjectivePoint.deterministic(1, 2).check_comparable(ObjectivePoint.robust(1, 2, 5, 0.2))
