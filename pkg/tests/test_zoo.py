import numpy as np
import pytest

from deconfound import autograd as ag
from deconfound import zoo


def build(name, d=25, seed=0, **overrides):
    spec = zoo.spec_from_name(name, **overrides)
    return zoo.build_estimator(spec, d, ag.SeededRng(seed))


def param_count(model):
    return sum(p.values.size for p in model.parameters())


class TestSpecValidation:
    def test_adversarial_only_with_propensity_head(self):
        for fam in ("slearner", "tlearner", "tarnet", "cfrnet"):
            with pytest.raises(ValueError, match="adversarial"):
                zoo.EstimatorSpec(family=fam, adversarial=True)

    def test_unknown_family(self):
        with pytest.raises(ValueError, match="unknown family"):
            zoo.EstimatorSpec(family="xlearner")

    def test_unknown_estimator_name(self):
        with pytest.raises(ValueError, match="unknown estimator"):
            zoo.spec_from_name("tarnet+")

    def test_spec_dict_roundtrip(self):
        spec = zoo.spec_from_name("snet+", mmd_weight=2.0)
        again = zoo.EstimatorSpec.from_dict(spec.to_dict())
        assert again.to_dict() == spec.to_dict()

    def test_empty_rep_rejected(self):
        with pytest.raises(ValueError, match="at least one layer"):
            zoo.EstimatorSpec(family="snet", rep_layers={"C": []})


class TestWiring:
    def test_slearner_first_layer_input_width(self):
        model = build("slearner", d=25)
        assert model.reps["C"][0].W.shape == (26, 200)

    def test_snet_mu0_head_input_width(self):
        model = build("snet", d=25)
        # concat of C (100), A (50), A0 (50)
        assert model.heads["mu0"][0].W.shape == (200, 100)
        assert model.heads["mu1"][0].W.shape == (200, 100)
        assert model.heads["pi"][0].W.shape == (200, 1)

    def test_tarnet_cfrnet_identical_param_counts(self):
        assert param_count(build("tarnet")) == param_count(build("cfrnet"))

    def test_snet_plus_same_param_count_as_snet(self):
        assert param_count(build("snet+")) == param_count(build("snet"))

    def test_tlearner_two_independent_stacks(self):
        model = build("tlearner", d=25)
        assert model.heads["mu0"][0].W.shape == (25, 100)
        assert len(model.heads["mu0"]) == 6  # five hidden + output
        assert not model.reps

    def test_dragonnet_propensity_is_single_affine(self):
        model = build("dragonnet", d=10)
        assert len(model.heads["pi"]) == 1
        assert model.heads["pi"][0].W.shape == (200, 1)

    def test_dragonnet_tr_has_epsilon(self):
        model = build("dragonnet_tr")
        assert model.epsilon is not None
        assert model.epsilon.values[0, 0] == 0.0
        assert build("dragonnet").epsilon is None

    def test_drcfr_widths(self):
        model = build("drcfr", d=25)
        assert model.reps["C"][0].W.shape == (25, 150)
        assert model.reps["A"][0].W.shape == (25, 50)
        assert model.reps["I"][0].W.shape == (25, 50)
        assert model.heads["mu0"][0].W.shape == (200, 100)
        assert model.heads["pi"][0].W.shape == (200, 1)

    def test_parameter_groups_partition(self):
        for name in zoo.ESTIMATOR_NAMES:
            model = build(name, d=7)
            groups = model.parameter_groups()
            ids = [id(p) for ps in groups.values() for p in ps]
            assert len(ids) == len(set(ids)), name
            assert set(ids) == {id(p) for p in model.parameters()}, name

    def test_contribution_factors(self):
        assert build("snet").contribution_factors() == ["I", "C", "A", "A0", "A1"]
        assert build("drcfr").contribution_factors() == ["I", "C", "A"]
        assert build("tarnet").contribution_factors() == []


class TestForward:
    def test_zero_output_layers_collapse(self):
        model = build("snet", d=6)
        for head in model.heads.values():
            head[-1].W.values[...] = 0.0
            head[-1].b.values[...] = 0.0
        out = zoo.forward(model, np.random.default_rng(0).normal(size=(4, 6)))
        np.testing.assert_array_equal(out.mu0_hat, np.zeros(4))
        np.testing.assert_array_equal(out.mu1_hat, np.zeros(4))
        np.testing.assert_array_equal(out.pi_hat, np.full(4, 0.5))

    def test_plus_variant_forward_identical(self):
        plain = build("snet", d=8, seed=3)
        plus = build("snet+", d=8, seed=3)
        X = np.random.default_rng(1).normal(size=(5, 8))
        a, b = zoo.forward(plain, X), zoo.forward(plus, X, lam=1.7)
        np.testing.assert_array_equal(a.mu0_hat, b.mu0_hat)
        np.testing.assert_array_equal(a.mu1_hat, b.mu1_hat)
        np.testing.assert_array_equal(a.pi_hat, b.pi_hat)

    def test_batch_length_preserved(self):
        for name in zoo.ESTIMATOR_NAMES:
            model = build(name, d=5)
            out = zoo.forward(model, np.zeros((7, 5)))
            assert out.mu0_hat.shape == (7,)
            assert out.mu1_hat.shape == (7,)
            if model.spec.has_propensity_head:
                assert out.pi_hat.shape == (7,)
                assert np.all((out.pi_hat > 0) & (out.pi_hat < 1))

    def test_wrong_column_count_rejected(self):
        model = build("tarnet", d=5)
        with pytest.raises(ag.ShapeError, match="expected"):
            zoo.forward(model, np.zeros((3, 4)))

    def test_non_finite_input_rejected(self):
        model = build("tarnet", d=2)
        with pytest.raises(ValueError, match="non-finite"):
            zoo.forward(model, np.array([[1.0, np.nan]]))

    def test_negative_lambda_rejected(self):
        model = build("snet+", d=2)
        with pytest.raises(ValueError, match="lambda"):
            zoo.forward(model, np.zeros((1, 2)), lam=-1.0)


class TestHeadRouting:
    def test_perturb_rep_a1_moves_only_mu1(self):
        model = build("snet", d=10, seed=2)
        X = np.random.default_rng(4).normal(size=(6, 10))
        base = zoo.forward(model, X)
        mu0_before, mu1_before = base.mu0_hat, base.mu1_hat
        model.reps["A1"][0].W.values += 0.5
        after = zoo.forward(model, X)
        np.testing.assert_array_equal(after.mu0_hat, mu0_before)
        assert not np.array_equal(after.mu1_hat, mu1_before)

    def test_perturb_rep_i_moves_only_pi(self):
        model = build("snet", d=10, seed=2)
        X = np.random.default_rng(4).normal(size=(6, 10))
        base = zoo.forward(model, X)
        model.reps["I"][0].W.values += 0.5
        after = zoo.forward(model, X)
        np.testing.assert_array_equal(after.mu0_hat, base.mu0_hat)
        np.testing.assert_array_equal(after.mu1_hat, base.mu1_hat)
        assert not np.array_equal(after.pi_hat, base.pi_hat)


class TestGrlPlacement:
    def test_grl_scales_rep_c_gradient_and_leaves_rep_i(self):
        lam = 0.5
        plus = build("snet+", d=6, seed=1)
        plain = build("snet", d=6, seed=1)
        X = np.random.default_rng(2).normal(size=(8, 6))
        t = np.random.default_rng(3).integers(0, 2, size=8).astype(float)

        def bce_grads(model, lam):
            out = zoo.forward(model, X, lam=lam)
            tn = out.tape.constant(t.reshape(-1, 1))
            omt = out.tape.constant(1.0 - t.reshape(-1, 1))
            loss = ag.scale(ag.reduce_mean(
                ag.add(ag.mul(tn, ag.logn(out.pi)),
                       ag.mul(omt, ag.logn(ag.sub(out.tape.constant(np.ones((8, 1))), out.pi))))), -1.0)
            out.tape.backward(loss)
            return {g: [p.grad.copy() for p in ps] for g, ps in model.parameter_groups().items()}

        g_plus = bce_grads(plus, lam)
        g_plain = bce_grads(plain, 0.0)
        # lam = 0.5 scales exactly (power of two): bitwise equality expected
        for a, b in zip(g_plus["rep_C"], g_plain["rep_C"]):
            np.testing.assert_array_equal(a, -lam * b)
        for a, b in zip(g_plus["rep_I"], g_plain["rep_I"]):
            np.testing.assert_array_equal(a, b)


class TestMmd:
    def make_nodes(self, a, b):
        tape = ag.Tape()
        return tape.constant(a), tape.constant(b)

    def test_identical_means_zero(self):
        a = np.array([[1.0, 2.0], [3.0, 0.0]])
        b = np.array([[0.0, 1.0], [4.0, 1.0]])
        ra, rb = self.make_nodes(a, b)
        assert zoo.mmd_linear(ra, rb).value[0, 0] == pytest.approx(0.0)

    def test_unit_distance(self):
        ra, rb = self.make_nodes(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]]))
        assert zoo.mmd_linear(ra, rb).value[0, 0] == pytest.approx(1.0)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(0)
        a, b = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
        ra, rb = self.make_nodes(a, b)
        rap, rbp = self.make_nodes(a[::-1], b[[2, 0, 1, 3]])
        assert zoo.mmd_linear(ra, rb).value[0, 0] == pytest.approx(
            zoo.mmd_linear(rap, rbp).value[0, 0])

    def test_empty_group_contributes_zero(self, caplog):
        ra, rb = self.make_nodes(np.zeros((0, 2)), np.ones((3, 2)))
        with caplog.at_level("WARNING", logger="deconfound"):
            node = zoo.mmd_linear(ra, rb)
        assert node.value[0, 0] == 0.0
        assert "empty" in caplog.text


class TestTargetedRegularisation:
    def run_tr(self, y, t, q, g, eps):
        tape = ag.Tape()
        q_node = tape.constant(np.asarray(q, dtype=float).reshape(-1, 1))
        g_node = tape.constant(np.asarray(g, dtype=float).reshape(-1, 1))
        eps_node = tape.constant(np.array([[eps]]))
        return zoo.targeted_regularisation(y, t, q_node, g_node, eps_node).value[0, 0]

    def test_exact_fit_zero_eps(self):
        assert self.run_tr([1.0, 2.0], [1, 0], [1.0, 2.0], [0.5, 0.5], 0.0) == 0.0

    def test_zero_eps_reduces_to_mse(self):
        y, q = np.array([1.0, 3.0]), np.array([0.0, 1.0])
        expected = np.mean((y - q) ** 2)
        assert self.run_tr(y, [1, 1], q, [0.7, 0.7], 0.0) == pytest.approx(expected)

    def test_hand_computed_single_unit(self):
        # t=1, y=1, q=0, g=0.5, eps=0.5 -> y_tilde = 0 + 0.5 * (1 / 0.5) = 1, loss 0
        assert self.run_tr([1.0], [1], [0.0], [0.5], 0.5) == pytest.approx(0.0)
