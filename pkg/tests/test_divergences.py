"""Unit tests for the divergence measures and their property checks.

Reference values in this file were computed independently (closed forms
evaluated with ``math``) and frozen; tests compare against those constants,
not against the code under test.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from d2ptas import (
    Dataset,
    DimensionMismatch,
    DomainError,
    EmptySet,
    ConfigError,
    GenericBregman,
    ItakuraSaito,
    KullbackLeibler,
    Mahalanobis,
    PropertyReport,
    SquaredEuclidean,
    UnsupportedMeasure,
    as_points,
    assign,
    centroid,
    centroid_report,
    check_centroid_property,
    check_mu_similarity,
    check_symmetry,
    check_triangle,
    cluster_cost,
    mu_similarity_report,
    symmetry_report,
    triangle_report,
)
from d2ptas.sampler import RngStream

# Independently computed reference values (math.log closed forms).
KL_PAIR = 0.14384103622589045          # KL((0.5,0.5) -> (0.25,0.75))
KL_FWD = 0.284663402409381             # KL(0.8 -> 0.3)
KL_BWD = 0.20575122409648217           # KL(0.3 -> 0.8)
IS_PAIR = 0.3068528194400546           # IS(0.8 -> 0.4) = 2 - ln 2 - 1
PHI_KL = -1.6931471805599454           # phi_KL((0.5, 0.5)) = ln(1/2) - 1


class TestAsPoints:
    def test_one_dimensional_input_becomes_column(self):
        pts = as_points([0.0, 1.0, 4.0, 5.0])
        assert pts.shape == (4, 1)

    def test_dataset_passthrough(self):
        ds = Dataset([[1.0, 2.0], [3.0, 4.0]])
        assert as_points(ds) is ds.points
        assert ds.n == 2 and ds.dim == 2 and len(ds) == 2

    def test_empty_rejected(self):
        with pytest.raises(EmptySet):
            as_points(np.empty((0, 3)))

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            as_points([[1.0, np.nan]])
        with pytest.raises(DomainError):
            as_points([[np.inf, 0.0]])

    def test_three_dimensional_rejected(self):
        with pytest.raises(DimensionMismatch):
            as_points(np.zeros((2, 2, 2)))

    def test_dataset_domain_enforced(self):
        with pytest.raises(DomainError):
            Dataset([[0.5, -1.0]], domain="positive")
        with pytest.raises(DomainError):
            Dataset([[0.05]], domain=(0.1, 0.9))


class TestSquaredEuclidean:
    def test_three_four_five(self, sq):
        assert sq((0.0, 0.0), (3.0, 4.0)) == 25.0

    def test_symmetric_exactly(self, sq, gen):
        p, q = gen.standard_normal(4), gen.standard_normal(4)
        assert sq(p, q) == sq(q, p)

    def test_pairwise_shape_and_values(self, sq):
        P = np.array([[0.0], [3.0]])
        C = np.array([[0.0], [1.0], [2.0]])
        table = sq.pairwise(P, C)
        assert table.shape == (2, 3)
        np.testing.assert_array_equal(table, [[0.0, 1.0, 4.0], [9.0, 4.0, 1.0]])

    def test_constants(self, sq):
        assert (sq.alpha, sq.beta, sq.mu) == (2.0, 1.0, 1.0)
        assert sq.exact_centroid

    def test_dimension_mismatch(self, sq):
        with pytest.raises(DimensionMismatch):
            sq((1.0, 2.0), (1.0,))

    def test_generator_route_matches_closed_form(self, sq, gen):
        P, Q = gen.standard_normal((50, 3)), gen.standard_normal((50, 3))
        direct = sq.rowwise(P, Q)
        via_phi = sq.bregman_form(P, Q)
        np.testing.assert_allclose(via_phi, direct, rtol=0, atol=1e-10)

    @given(st.lists(st.floats(-100, 100), min_size=1, max_size=6))
    @settings(max_examples=200, deadline=None)
    def test_nonnegative_and_identity(self, coords):
        sq = SquaredEuclidean()
        p = np.asarray(coords)
        assert sq(p, p) == 0.0
        assert sq(p, p + 1.0) > 0.0


class TestMahalanobis:
    def test_identity_matrix_reduces_to_squared_euclidean(self, sq, gen):
        m = Mahalanobis(np.eye(3))
        P, Q = gen.standard_normal((20, 3)), gen.standard_normal((20, 3))
        np.testing.assert_allclose(m.rowwise(P, Q), sq.rowwise(P, Q), rtol=1e-14)

    def test_diagonal_weighting(self):
        m = Mahalanobis(np.diag([2.0, 0.5]))
        assert m((1.0, 1.0), (0.0, 0.0)) == 2.5

    def test_non_square_rejected(self):
        with pytest.raises(ConfigError):
            Mahalanobis(np.ones((2, 3)))

    def test_declares_its_dimension(self):
        assert Mahalanobis(np.eye(3)).fixed_dim == 3
        rep = centroid_report(Mahalanobis(np.diag([2.0, 1.0, 0.5])),
                              RngStream(77).derive(0), instances=20)
        assert rep.violations == 0

    def test_asymmetric_rejected(self):
        with pytest.raises(ConfigError):
            Mahalanobis(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_indefinite_rejected(self):
        with pytest.raises(ConfigError):
            Mahalanobis(np.array([[1.0, 0.0], [0.0, -2.0]]))
        with pytest.raises(ConfigError):
            Mahalanobis(np.zeros((2, 2)))

    def test_similarity_matrix_is_its_own_form(self):
        A = np.array([[2.0, 0.3], [0.3, 1.0]])
        m = Mahalanobis(A)
        np.testing.assert_array_equal(m.similarity_matrix(2), m.matrix)
        with pytest.raises(DimensionMismatch):
            m.similarity_matrix(3)


class TestKullbackLeibler:
    def test_frozen_value(self):
        kl = KullbackLeibler()
        assert kl((0.5, 0.5), (0.25, 0.75)) == pytest.approx(KL_PAIR, rel=1e-15)

    def test_identity_is_zero(self):
        kl = KullbackLeibler()
        assert kl((0.3, 0.6), (0.3, 0.6)) == 0.0

    def test_asymmetry_values(self):
        kl = KullbackLeibler()
        assert kl((0.8,), (0.3,)) == pytest.approx(KL_FWD, rel=1e-15)
        assert kl((0.3,), (0.8,)) == pytest.approx(KL_BWD, rel=1e-15)

    def test_default_mu_is_curvature_floor(self):
        kl = KullbackLeibler(box=(0.1, 0.9))
        assert kl.mu == pytest.approx(1.0 / 18.0, rel=1e-12)
        assert kl.alpha == pytest.approx(2.0 / kl.mu, rel=1e-15)
        assert kl.beta == kl.mu

    def test_mu_override_and_validation(self):
        assert KullbackLeibler(mu=0.25).mu == 0.25
        with pytest.raises(ConfigError):
            KullbackLeibler(mu=0.0)
        with pytest.raises(ConfigError):
            KullbackLeibler(mu=1.5)
        with pytest.raises(ConfigError):
            KullbackLeibler(box=(0.9, 0.1))
        with pytest.raises(ConfigError):
            KullbackLeibler(box=(0.0, 0.9))

    def test_domain_enforced(self):
        kl = KullbackLeibler()
        with pytest.raises(DomainError):
            kl((0.5,), (-0.1,))

    def test_phi_frozen(self):
        kl = KullbackLeibler()
        assert kl.phi(np.array([0.5, 0.5])) == pytest.approx(PHI_KL, rel=1e-15)

    def test_generator_route_matches_closed_form(self, gen):
        kl = KullbackLeibler()
        P = gen.uniform(0.1, 0.9, (200, 4))
        Q = gen.uniform(0.1, 0.9, (200, 4))
        np.testing.assert_allclose(kl.bregman_form(P, Q), kl.rowwise(P, Q),
                                   rtol=0, atol=1e-12)

    def test_similarity_matrix(self):
        kl = KullbackLeibler(box=(0.1, 0.9))
        np.testing.assert_allclose(kl.similarity_matrix(3), np.eye(3) / 0.1)


class TestItakuraSaito:
    def test_identity_exactly_zero(self):
        """The ratio form evaluates p/q = 1 first, so p == q gives 0.0 exactly."""
        isd = ItakuraSaito()
        P = np.array([[0.137, 0.725], [0.5, 0.5]])
        np.testing.assert_array_equal(isd.rowwise(P, P), [0.0, 0.0])

    def test_frozen_value(self):
        isd = ItakuraSaito(box=(0.1, 0.9))
        assert isd((0.8,), (0.4,)) == pytest.approx(IS_PAIR, rel=1e-15)

    def test_default_mu(self):
        isd = ItakuraSaito(box=(0.1, 0.9))
        assert isd.mu == pytest.approx(1.0 / 162.0, rel=1e-12)

    def test_generator_route_matches_closed_form(self, gen):
        isd = ItakuraSaito()
        P = gen.uniform(0.1, 0.9, (200, 3))
        Q = gen.uniform(0.1, 0.9, (200, 3))
        np.testing.assert_allclose(isd.bregman_form(P, Q), isd.rowwise(P, Q),
                                   rtol=0, atol=1e-12)

    def test_similarity_matrix(self):
        isd = ItakuraSaito(box=(0.1, 0.9))
        np.testing.assert_allclose(isd.similarity_matrix(2), np.eye(2) / 0.01)


class TestGenericBregman:
    def test_squared_norm_generator_reproduces_squared_euclidean(self, sq, gen):
        """phi = ||x||^2 has Bregman divergence ||p - q||^2 identically."""
        g = GenericBregman(
            phi=lambda X: np.einsum("...i,...i->...", X, X),
            grad_phi=lambda X: 2.0 * X,
            mu=1.0, box=None, domain="unrestricted")
        P, Q = gen.standard_normal((100, 3)), gen.standard_normal((100, 3))
        np.testing.assert_allclose(g.rowwise(P, Q), sq.rowwise(P, Q),
                                   rtol=0, atol=1e-10)

    def test_constants_follow_mu(self):
        g = GenericBregman(phi=lambda X: X.sum(-1) ** 2, grad_phi=lambda X: X,
                           mu=0.5)
        assert g.alpha == 4.0 and g.beta == 0.5

    def test_mu_validated(self):
        with pytest.raises(ConfigError):
            GenericBregman(phi=None, grad_phi=None, mu=2.0)

    def test_similarity_matrix_optional(self):
        g = GenericBregman(phi=lambda X: X.sum(-1) ** 2, grad_phi=lambda X: X,
                           mu=0.5)
        with pytest.raises(UnsupportedMeasure):
            g.similarity_matrix(2)
        g2 = GenericBregman(phi=lambda X: X.sum(-1) ** 2, grad_phi=lambda X: X,
                            mu=0.5, similarity=np.eye(2))
        np.testing.assert_array_equal(g2.similarity_matrix(2), np.eye(2))


class TestCentroidAndAssignment:
    def test_centroid_of_four_point_line(self, four_point_line):
        assert centroid(four_point_line) == pytest.approx(2.5)

    def test_assign_breaks_ties_low_index(self, sq):
        labels, costs = assign(sq, [[1.0]], [[0.0], [2.0]])
        assert labels.tolist() == [0] and costs.tolist() == [1.0]

    def test_cluster_cost_four_point_fixture(self, sq, four_point_line):
        assert cluster_cost(sq, four_point_line, [[0.5], [4.5]]) == 1.0

    def test_assign_dimension_check(self, sq):
        with pytest.raises(DimensionMismatch):
            assign(sq, [[1.0, 2.0]], [[1.0]])

    def test_mean_minimizes_second_slot(self, sq, gen):
        P = gen.standard_normal((30, 3))
        m = centroid(P)
        at_mean = cluster_cost(sq, P, m[None, :])
        for _ in range(10):
            other = m + 0.1 * gen.standard_normal(3)
            assert at_mean <= cluster_cost(sq, P, other[None, :])


class TestCentroidProperty:
    @pytest.mark.parametrize("measure,tol", [
        (SquaredEuclidean(), 1e-9),
        (Mahalanobis(np.array([[2.0, 0.4], [0.4, 1.0]])), 1e-9),
    ])
    def test_quadratic_measures_tight(self, measure, tol, gen):
        for _ in range(20):
            P = gen.standard_normal((15, 2)) * 3.0
            c = gen.standard_normal(2)
            rep = check_centroid_property(measure, P, c, tolerance=tol)
            assert rep.passed, rep.worst_ratio

    @pytest.mark.parametrize("measure", [KullbackLeibler(), ItakuraSaito()])
    def test_generator_measures_tight(self, measure, gen):
        for _ in range(20):
            P = gen.uniform(0.1, 0.9, (15, 3))
            c = gen.uniform(0.1, 0.9, 3)
            rep = check_centroid_property(measure, P, c, tolerance=1e-8)
            assert rep.passed, rep.worst_ratio

    def test_batch_report(self, sq):
        rep = centroid_report(sq, RngStream(1).derive(0), instances=50)
        assert rep.trials == 50 and rep.violations == 0
        assert rep.worst_ratio <= rep.tolerance

    def test_wrong_center_dimension(self, sq):
        with pytest.raises(DimensionMismatch):
            check_centroid_property(sq, [[1.0, 2.0]], [1.0])


class TestApproximateMetricBounds:
    def test_squared_euclidean_symmetry_exact(self, sq, gen):
        p, q = gen.standard_normal(3), gen.standard_normal(3)
        assert check_symmetry(sq, p, q)

    def test_kl_fails_perfect_symmetry_but_meets_mu_bound(self):
        strict = KullbackLeibler(mu=1.0)   # beta = 1 demands exact symmetry
        assert not check_symmetry(strict, (0.8,), (0.3,))
        honest = KullbackLeibler(box=(0.1, 0.9))
        assert check_symmetry(honest, (0.8,), (0.3,))

    def test_triangle_squared_euclidean(self, sq, gen):
        for _ in range(50):
            p, q, r = gen.standard_normal((3, 4))
            assert check_triangle(sq, p, q, r)

    @pytest.mark.parametrize("measure", [
        SquaredEuclidean(),
        Mahalanobis(np.array([[1.5, 0.2], [0.2, 0.7]])),
        KullbackLeibler(box=(0.1, 0.9)),
        ItakuraSaito(box=(0.1, 0.9)),
    ])
    def test_no_violations_in_batches(self, measure):
        rng = RngStream(42)
        dim = 2
        sym = symmetry_report(measure, dim, 5000, rng.derive(0))
        tri = triangle_report(measure, dim, 5000, rng.derive(1))
        assert sym.violations == 0, sym.to_dict()
        assert tri.violations == 0, tri.to_dict()
        assert sym.worst_ratio <= 1.0 + sym.tolerance
        assert tri.worst_ratio <= 1.0 + tri.tolerance


class TestMuSimilarity:
    @pytest.mark.parametrize("measure", [
        KullbackLeibler(box=(0.1, 0.9)),
        ItakuraSaito(box=(0.1, 0.9)),
    ])
    def test_sandwich_holds_for_default_mu(self, measure):
        rep = mu_similarity_report(measure, 3, 20000, RngStream(9))
        assert rep.violations == 0, rep.to_dict()
        assert rep.details["upper_bound_ok"]
        # the analytic floor must not exceed the observed floor
        assert measure.mu <= rep.details["mu_hat"] + rep.tolerance

    def test_overclaimed_mu_is_flagged(self):
        brave = KullbackLeibler(box=(0.1, 0.9), mu=0.99)
        rep = mu_similarity_report(brave, 3, 5000, RngStream(10))
        assert rep.violations >= 1
        assert not rep.passed

    def test_pair_list_input(self):
        kl = KullbackLeibler(box=(0.1, 0.9))
        pairs = [((0.2, 0.3), (0.4, 0.5)), ((0.8, 0.8), (0.7, 0.6))]
        rep = check_mu_similarity(kl, kl.similarity_matrix(2), pairs)
        assert rep.trials == 2
        assert "generator_residual" in rep.details
        assert rep.details["generator_residual"] <= 1e-12

    def test_dimension_validation(self):
        kl = KullbackLeibler()
        with pytest.raises(DimensionMismatch):
            check_mu_similarity(kl, np.eye(3), (np.full((5, 2), 0.5), np.full((5, 2), 0.4)))


class TestPropertyReport:
    def test_passed_defaults_to_no_violations(self):
        assert PropertyReport("x", 10, 0, 0.5, 1e-9).passed
        assert not PropertyReport("x", 10, 1, 0.5, 1e-9).passed

    def test_explicit_passed_wins(self):
        rep = PropertyReport("x", 10, 3, 0.5, 1e-9, passed=True)
        assert rep.passed

    def test_non_finite_worst_ratio_rejected(self):
        with pytest.raises(ValueError):
            PropertyReport("x", 10, 0, np.inf, 1e-9)

    def test_violations_bounded_by_trials(self):
        with pytest.raises(ValueError):
            PropertyReport("x", 5, 6, 0.0, 1e-9)

    def test_to_dict_round_trips_numpy_scalars(self):
        rep = PropertyReport("x", 10, 0, 0.25, 1e-9,
                             details={"v": np.float64(1.5), "a": np.arange(3)})
        d = rep.to_dict()
        assert d["details"]["v"] == 1.5
        assert d["details"]["a"] == [0, 1, 2]
