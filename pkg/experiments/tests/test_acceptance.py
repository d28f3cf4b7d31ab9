"""
Scaling checks on desk-scale chains.

They take minutes to tens of minutes and only run with ``ENSEMBLE_RUN_SLOW=1``.
"""

import math
from unittest import TestCase, skipUnless

import numpy as np

from ensemble_service import settings
from experiments.recipes import get_recipe, schedule_order
from experiments.serializers import ExperimentConfigSerializer
from experiments.tasks import exact_sweep, observable_specs
from experiments.utils import fit_linear, fit_power_law, truncation_profile
from filtering.kernel import kernel_width, peak_value, sigma_for_order
from filtering.recurrence import FilterConfig, run_filter
from spinchain import oracle
from spinchain.model import SpinChainModel, commutator_mpo, dense_state, product_state, vectorized_density
from spinchain.observables import ObservableSpec

slow = skipUnless(settings.RUN_SLOW_TESTS, "set ENSEMBLE_RUN_SLOW=1 to run scaling checks")


def validated_recipe(name, **changes):
    recipe = get_recipe(name)
    recipe.update(changes)
    serializer = ExperimentConfigSerializer(data=recipe)
    serializer.is_valid(raise_exception=True)
    return serializer.validated_data


def filter_chain(N, M, max_bond, checkpoint_orders=(), stored_degrees=(), rel_tol=1e-10):
    model = SpinChainModel.create(N)
    cfg = FilterConfig(
        M=M,
        max_bond=max_bond,
        rel_tol=rel_tol,
        checkpoint_orders=checkpoint_orders,
        stored_degrees=stored_degrees,
        alpha=model.alpha,
        observables=(ObservableSpec.from_label("sx"),),
    )
    rho0 = vectorized_density(product_state("X+", N))
    return model, run_filter(rho0, commutator_mpo(model, rescaled=True), cfg)


@slow
class WidthScalingTests(TestCase):
    @classmethod
    def setUpClass(cls):
        cls.model, cls.filter_run = filter_chain(20, 256, 256, checkpoint_orders=(32, 48, 64, 96, 128, 192, 256))

    def test_delta_squared_falls_as_inverse_square_of_order(self):
        orders = [record.order for record in self.filter_run.checkpoints]
        widths = [record.delta_sq for record in self.filter_run.checkpoints]

        fit = fit_power_law(orders, widths)

        self.assertGreaterEqual(fit.slope, -2.3)
        self.assertLessEqual(fit.slope, -1.7)
        self.assertGreaterEqual(fit.r_squared, 0.98)

    def test_norm_grows_linearly_with_order(self):
        fit = fit_power_law(
            [record.order for record in self.filter_run.checkpoints],
            [record.frobenius_sq for record in self.filter_run.checkpoints],
            range=(64, 256),
        )

        self.assertAlmostEqual(fit.slope, 1.0, delta=0.2)

    def test_trace_stays_within_truncation_budget(self):
        for record in self.filter_run.checkpoints:
            deviation = abs(record.trace / peak_value(record.order) - 1.0)
            self.assertLessEqual(deviation, max(10 * record.cumulative_discarded_weight, 1e-8))


@slow
class NormSizeScalingTests(TestCase):
    def test_physical_norm_times_width_falls_as_inverse_root_of_size(self):
        scaled = []
        for N in (12, 16, 20):
            model, run = filter_chain(N, 64, 128)
            physical_norm = model.alpha**2 * run.checkpoints[-1].frobenius_sq
            scaled.append(physical_norm * sigma_for_order(64, model.alpha) * math.sqrt(N))

        self.assertLessEqual(max(scaled) / min(scaled), 1.25)


@slow
class ObservableConvergenceTests(TestCase):
    def test_error_decays_with_inverse_width(self):
        config = validated_recipe("fig3-5-error-small-N", sizes=[12], initial_states=["X+"], osee=False)
        model = SpinChainModel.create(12)

        rows = exact_sweep(model, "X+", config["filter"]["checkpoints"], observable_specs(config), config)

        fit = fit_power_law([row["inverse_delta"] for row in rows], [row["sx_error"] for row in rows])
        self.assertGreaterEqual(fit.slope, -0.75)
        self.assertLessEqual(fit.slope, -0.4)
        self.assertLess(rows[-1]["sx_error"], 1e-2)


@slow
class GaussianConsistencyTests(TestCase):
    def test_filtered_observables_follow_gaussian_filter(self):
        N = 8
        model = SpinChainModel.create(N)
        specs = (ObservableSpec.from_label("sx"), ObservableSpec.from_label("sz"))
        cfg = FilterConfig(
            M=64,
            max_bond=256,
            rel_tol=1e-12,
            checkpoint_orders=(32, 64),
            alpha=model.alpha,
            observables=specs,
        )
        rho0_vector = vectorized_density(product_state("X+", N))
        run = run_filter(rho0_vector, commutator_mpo(model, rescaled=True), cfg)
        spec = oracle.diagonalize(model)
        rho0 = oracle.pure_density(dense_state("X+", N), spec)

        for record in run.checkpoints:
            gaussian = oracle.gaussian_filter_exact(rho0, kernel_width(record.order) / model.alpha, spec)
            for item in specs:
                with self.subTest(order=record.order, observable=item.label):
                    expected = oracle.expectation_dense(gaussian, item.operator, item.site_for(N), spec)

                    self.assertLess(
                        abs(record.observables[item.label] - expected), 0.05 * abs(expected) + 2e-3
                    )


@slow
class OperatorEntanglementTests(TestCase):
    def test_exact_entanglement_peaks_before_diagonal_limit(self):
        config = validated_recipe("fig8-osee-peak")
        for N in config["sizes"]:
            with self.subTest(N=N):
                orders = config["filter"]["checkpoints"]
                rows = exact_sweep(SpinChainModel.create(N), "X+", orders, observable_specs(config), config)
                entropies = [row["osee_half"] for row in rows]
                peak = int(np.argmax(entropies))

                self.assertGreater(peak, 0)
                self.assertLess(peak, len(entropies) - 1)
                self.assertLess(entropies[-1], entropies[peak])

    def test_diagonal_entanglement_grows_with_size(self):
        config = validated_recipe("fig8-diagonal-osee-size")
        slopes = {}
        for state in config["initial_states"]:
            entropies = []
            for N in config["sizes"]:
                rows = exact_sweep(SpinChainModel.create(N), state, [2], observable_specs(config), config)
                entropies.append(rows[0]["osee_diagonal"])
            self.assertTrue(all(value >= 0.0 for value in entropies))
            slopes[state] = fit_linear(config["sizes"], entropies).slope

        self.assertGreater(slopes["Y+"], 0.0)
        self.assertGreater(slopes["Y+"], slopes["X+"])
        self.assertGreater(slopes["Y+"], slopes["Z+"])

    def test_root_schedule_keeps_entanglement_flatter_across_sizes(self):
        spreads = {}
        for schedule in ("sqrt", "nlogn"):
            entropies = []
            for N in (12, 16, 20, 24):
                order = schedule_order(schedule, N)
                _, run = filter_chain(N, order, 128, checkpoint_orders=(order,))
                entropies.append(run.checkpoints[-1].osee_half)
            spreads[schedule] = max(entropies) - min(entropies)

        self.assertLess(spreads["sqrt"], spreads["nlogn"])


@slow
class TruncationProfileTests(TestCase):
    def test_required_bond_grows_with_degree(self):
        degrees = tuple(range(8, 65, 8))
        _, run = filter_chain(12, 64, 256, stored_degrees=degrees)

        rows = truncation_profile(run.stored, [1e-4])
        bonds = [row["bond"] for row in rows]

        self.assertEqual([row["degree"] for row in rows], list(degrees))
        self.assertEqual(bonds, sorted(bonds))
        fit = fit_power_law(degrees, bonds)
        self.assertGreater(fit.slope, 0.0)
        self.assertGreaterEqual(fit.r_squared, 0.9)
