import math

import numpy as np
import pytest

from zlprlab.data import make_rng
from zlprlab.errors import NonConvergenceError, ParseError, SchemaError, UsageError
from zlprlab.losses import LossSpec
from zlprlab.numerics import finite_difference_gradient
from zlprlab.risk import (
    JointLabelDistribution,
    bce_logodds_solution,
    builtin_joint,
    configurations,
    expected_loss,
    gradient_descent,
    load_joint,
    minimize_expected_loss,
    minimize_soft_zlpr,
    product_joint,
    prototype_joint,
    save_joint,
    zlpr_decomposition,
)

from oracles import bce_loop, expected_by_enumeration, zlpr_loop

FIXTURE = "coupled_L8"


def random_joint(rng, L):
    return JointLabelDistribution(L, rng.dirichlet(np.ones(2**L)))


class TestJoint:
    def test_bitmask_convention(self):
        cfg = configurations(3)
        np.testing.assert_array_equal(cfg[0b101], [1, 0, 1])
        np.testing.assert_array_equal(cfg[0b010], [0, 1, 0])

    def test_from_tuples(self):
        j = builtin_joint("coupled_2")
        np.testing.assert_allclose(j.probs, [0.1, 0.3, 0.1, 0.5])
        np.testing.assert_allclose(j.marginals(), [0.8, 0.6])

    def test_must_sum_to_one(self):
        with pytest.raises(UsageError):
            JointLabelDistribution(1, [0.5, 0.4])

    def test_label_cap(self):
        with pytest.raises(UsageError):
            JointLabelDistribution(13, np.full(2**13, 2.0**-13))

    def test_product_joint_marginals(self):
        np.testing.assert_allclose(product_joint([0.2, 0.7, 0.5]).marginals(), [0.2, 0.7, 0.5], atol=1e-15)

    def test_prototype_joint_no_flip(self):
        j = prototype_joint(3, [(0, 2)], [1.0], 0.0)
        assert j.probs[0b101] == 1.0

    def test_sampling_within_three_standard_errors(self):
        j = builtin_joint("coupled_2")
        n = 1_000_000
        counts = np.bincount(j.sample(n, make_rng(7)), minlength=4)
        se = np.sqrt(j.probs * (1 - j.probs) / n)
        assert np.all(np.abs(counts / n - j.probs) <= 3 * se)


class TestJointFile:
    def test_round_trip(self, tmp_path):
        j = random_joint(np.random.default_rng(1), 3)
        save_joint(j, tmp_path / "j.joint")
        back = load_joint(tmp_path / "j.joint")
        np.testing.assert_array_equal(back.probs, j.probs)

    def test_missing_entries_are_zero(self, tmp_path):
        p = tmp_path / "j.joint"
        p.write_text("# comment\nL 2\n3 0.75  # both\n0 0.25\n")
        np.testing.assert_array_equal(load_joint(p).probs, [0.25, 0, 0, 0.75])

    @pytest.mark.parametrize(
        "text,lineno,kind",
        [
            ("L 2\n0 0.5\n0 0.5\n", 3, SchemaError),
            ("L 2\n4 1.0\n", 2, SchemaError),
            ("L 2\n0 x\n", 2, ParseError),
            ("M 2\n", 1, ParseError),
        ],
    )
    def test_errors_name_the_line(self, tmp_path, text, lineno, kind):
        p = tmp_path / "bad.joint"
        p.write_text(text)
        with pytest.raises(kind) as exc:
            load_joint(p)
        assert exc.value.lineno == lineno

    def test_shipped_fixture(self):
        from importlib.resources import files

        path = files("zlprlab") / "fixtures" / f"{FIXTURE}.joint"
        j = load_joint(path)
        assert j.label_count == 8
        assert abs(j.probs.sum() - 1) <= 1e-12


class TestExpectedLoss:
    def test_matches_enumeration(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            L = int(rng.integers(1, 5))
            j = random_joint(rng, L)
            s = rng.normal(size=L)
            for kind, loop in (("zlpr", zlpr_loop), ("bce", bce_loop)):
                v, _ = expected_loss(j, s, LossSpec(kind))
                ref = expected_by_enumeration(L, lambda m: j.probs[m], loop, list(s))
                assert v == pytest.approx(ref, rel=1e-12)

    def test_gradient(self):
        rng = np.random.default_rng(3)
        j = random_joint(rng, 3)
        s = rng.normal(size=3)
        for kind in ("zlpr", "bce", "tlpr", "lsep"):
            spec = LossSpec(kind, s0=0.4)
            _, g = expected_loss(j, s, spec)
            fd = finite_difference_gradient(lambda v: expected_loss(j, v, spec)[0], s)
            np.testing.assert_allclose(g, fd, atol=1e-8)

    def test_dice2_rejected(self):
        with pytest.raises(UsageError):
            expected_loss(builtin_joint("coupled_2"), [0.0, 0.0], LossSpec("dice2"))


class TestMinimisers:
    def test_bce_single_label(self):
        rep = minimize_expected_loss(builtin_joint("single_075"), LossSpec("bce"), tol=1e-10)
        assert rep.s_star[0] == pytest.approx(math.log(3), abs=1e-8)

    def test_bce_hits_log_odds(self):
        rng = np.random.default_rng(4)
        for L in (1, 2, 3, 4):
            j = random_joint(rng, L)
            rep = minimize_expected_loss(j, LossSpec("bce"), tol=1e-10)
            np.testing.assert_allclose(rep.s_star, bce_logodds_solution(j), atol=1e-6)

    def test_zlpr_coupled_2(self):
        j = builtin_joint("coupled_2")
        rep = minimize_expected_loss(j, LossSpec("zlpr"))
        assert rep.gradient_norm < 1e-8
        np.testing.assert_allclose(rep.t1, [math.log(4), math.log(1.5)], atol=1e-12)
        assert np.max(np.abs(rep.t2)) > 1e-3
        assert rep.identity_error() < 1e-6

    def test_zlpr_depends_on_coupling(self):
        j = builtin_joint("coupled_2")
        coupled = minimize_expected_loss(j, LossSpec("zlpr")).s_star
        independent = minimize_expected_loss(product_joint(j.marginals()), LossSpec("zlpr")).s_star
        assert np.max(np.abs(coupled - independent)) > 1e-3

    def test_decomposition_identity_on_random_joints(self):
        rng = np.random.default_rng(5)
        for L in (2, 3, 4):
            j = random_joint(rng, L)
            rep = minimize_expected_loss(j, LossSpec("zlpr"))
            t1, t2 = zlpr_decomposition(j, rep.s_star)
            np.testing.assert_allclose(rep.s_star, 0.5 * (t1 + t2), atol=1e-6)

    def test_degenerate_marginal(self):
        with pytest.raises(ValueError):
            bce_logodds_solution(builtin_joint("mirror_2").__class__(1, [0.0, 1.0]))

    def test_soft_zlpr_recovers_probability(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            p = rng.uniform(0.01, 0.99, size=int(rng.integers(1, 7)))
            s, g = minimize_soft_zlpr(p)
            assert g < 1e-9
            np.testing.assert_allclose(1 / (1 + np.exp(-2 * s)), p, atol=1e-6)

    def test_non_convergence_reports_best(self):
        with pytest.raises(NonConvergenceError) as exc:
            gradient_descent(lambda v: (float(v @ v), 2 * v), np.ones(2), tol=1e-12, max_iter=0)
        assert exc.value.best is not None


class TestWorkedExamples:
    def test_point_mass_is_plain_loss(self):
        from zlprlab.losses import zlpr

        j = JointLabelDistribution.from_mapping(3, {(1, 0, 1): 1.0})
        s = np.array([0.3, -0.2, 1.1])
        assert expected_loss(j, s, LossSpec("zlpr"))[0] == pytest.approx(zlpr([1, 0, 1], s).value, abs=1e-15)

    def test_single_label_zlpr_at_zero(self):
        assert expected_loss(builtin_joint("single_075"), [0.0], LossSpec("zlpr"))[0] == pytest.approx(math.log(2), abs=1e-15)

    def test_single_label_zlpr_minimiser(self):
        rep = minimize_expected_loss(builtin_joint("single_075"), LossSpec("zlpr"), tol=1e-10)
        assert rep.s_star[0] == pytest.approx(math.log(3), abs=1e-8)

    def test_log_odds_values(self):
        assert bce_logodds_solution(JointLabelDistribution(1, [0.5, 0.5]))[0] == 0.0
        assert bce_logodds_solution(builtin_joint("single_075"))[0] == pytest.approx(math.log(3), abs=1e-15)
