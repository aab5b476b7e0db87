import math

import numpy as np
import pytest

from kinopt.kinetic import (
    BinaryRule,
    PairingError,
    check_bounds_conditions,
    collide,
    dsmc_step,
    run_dsmc,
)
from kinopt.model import (
    CompromiseFunction,
    ControlWeight,
    DiffusionFunction,
    NoiseModel,
    OpinionEnsemble,
    ScalingParams,
)

from conftest import implicit_pair_oracle

CONST = CompromiseFunction.constant()
NO_D = DiffusionFunction.none()
QUAD = DiffusionFunction.quadratic()


def rule_with_beta(kind, P, D, alpha, beta, w_d, noise=None, Q=None):
    """Build a rule with a prescribed control strength via nu = 4a^2(1/b - 1)."""
    nu = math.inf if beta == 0.0 else 4.0 * alpha**2 * (1.0 / beta - 1.0)
    return BinaryRule(kind=kind, P=P, D=D, alpha=alpha, nu=nu, w_d=w_d,
                      noise=noise or NoiseModel.none(), Q=Q)


class TestCollideBase:
    def test_hand_worked_pair(self):
        rule = BinaryRule(kind="base", P=CONST, D=NO_D, alpha=0.1, nu=0.36,
                          w_d=0.0, noise=NoiseModel.none())
        assert rule.beta == pytest.approx(0.1)
        ws, vs = collide(0.5, -0.5, 0.0, 0.0, rule)
        assert ws == pytest.approx(0.40, abs=1e-15)
        assert vs == pytest.approx(-0.40, abs=1e-15)

    def test_consensus_fixed_point_all_kinds(self):
        Q = ControlWeight.custom(lambda w: 0.3 + 0.2 * (1 + w))
        for kind in ("base", "noise_coupled", "mean_control", "agent_weighted"):
            rule = BinaryRule(kind=kind, P=CompromiseFunction.sznajd(1.0), D=QUAD,
                              alpha=0.1, nu=0.5, w_d=0.25, noise=NoiseModel.none(),
                              Q=Q if kind == "agent_weighted" else None)
            ws, vs = collide(0.25, 0.25, 0.0, 0.0, rule, mean=0.25)
            assert ws == pytest.approx(0.25, abs=1e-16)
            assert vs == pytest.approx(0.25, abs=1e-16)

    def test_pair_identities_sum_and_difference(self):
        rng = np.random.default_rng(2)
        n = 10**5
        w, v = rng.uniform(-1, 1, (2, n))
        for P in (CONST, CompromiseFunction.bounded_confidence(0.5)):
            alpha = 0.3
            rule = rule_with_beta("base", P, NO_D, alpha, 0.25, w_d=0.4)
            ws, vs = collide(w, v, 0.0, 0.0, rule)
            b = rule.beta
            pwv, pvw = P(w, v), P(v, w)
            sum_id = (1 - b) * (w + v) + 2 * b * rule.w_d + alpha * (1 - b) * (pwv - pvw) * (v - w)
            diff_id = (w - v) * (1 - alpha * (pwv + pvw))
            assert np.max(np.abs(ws + vs - sum_id)) < 1e-14
            assert np.max(np.abs(ws - vs - diff_id)) < 1e-14

    def test_matches_implicit_pair_solve(self):
        rng = np.random.default_rng(4)
        for P in (CONST, CompromiseFunction.sznajd(1.0), CompromiseFunction.sznajd(-1.0)):
            rule = BinaryRule(kind="base", P=P, D=NO_D, alpha=0.2, nu=0.7,
                              w_d=-0.3, noise=NoiseModel.none())
            for _ in range(50):
                w, v = rng.uniform(-1, 1, 2)
                ws, vs = collide(w, v, 0.0, 0.0, rule)
                wi, vi, _ = implicit_pair_oracle(w, v, rule)
                assert abs(float(ws) - wi) < 1e-12
                assert abs(float(vs) - vi) < 1e-12

    def test_contraction(self):
        rng = np.random.default_rng(6)
        w, v = rng.uniform(-1, 1, (2, 20000))
        for _ in range(10):
            alpha = float(rng.uniform(0, 0.5))
            beta = float(rng.uniform(0, 0.99))
            rule = rule_with_beta("base", CONST, NO_D, alpha, beta, w_d=0.1)
            ws, vs = collide(w, v, 0.0, 0.0, rule)
            assert np.all(np.abs(ws - vs) <= (1 - 2 * alpha * 1.0) * np.abs(w - v) + 1e-14)

    def test_noise_scales_with_local_diffusion(self):
        rule = BinaryRule(kind="base", P=CONST, D=QUAD, alpha=0.0, nu=math.inf,
                          w_d=0.0, noise=NoiseModel.uniform(0.1))
        ws, vs = collide(0.0, 0.9, 0.5, 0.5, rule)
        assert ws == pytest.approx(0.5 * 1.0)        # D(0) = 1
        assert vs == pytest.approx(0.9 + 0.5 * (1 - 0.81))  # D(0.9)


class TestCollideVariants:
    def test_noise_coupled_reduces_to_base_without_noise(self):
        rng = np.random.default_rng(8)
        w, v = rng.uniform(-1, 1, (2, 1000))
        base = rule_with_beta("base", CompromiseFunction.sznajd(1.0), QUAD, 0.1, 0.2, 0.3)
        coupled = rule_with_beta("noise_coupled", CompromiseFunction.sznajd(1.0), QUAD, 0.1, 0.2, 0.3)
        assert np.allclose(collide(w, v, 0.0, 0.0, base), collide(w, v, 0.0, 0.0, coupled), atol=1e-16)

    def test_noise_coupled_mixes_partner_noise(self):
        rule = rule_with_beta("noise_coupled", CONST, QUAD, 0.1, 0.2, 0.0)
        b = rule.beta
        ws, vs = collide(0.0, 0.0, 0.4, -0.2, rule)
        assert ws == pytest.approx((1 - b / 2) * 0.4 - (b / 2) * (-0.2), abs=1e-15)
        assert vs == pytest.approx((1 - b / 2) * (-0.2) - (b / 2) * 0.4, abs=1e-15)

    def test_mean_control_needs_mean(self):
        rule = rule_with_beta("mean_control", CONST, NO_D, 0.1, 0.2, 0.0)
        with pytest.raises(ValueError):
            collide(0.1, 0.2, 0.0, 0.0, rule)

    def test_mean_control_equals_base_at_pair_mean(self):
        rng = np.random.default_rng(10)
        w, v = rng.uniform(-1, 1, (2, 500))
        P = CompromiseFunction.sznajd(1.0)
        base = rule_with_beta("base", P, NO_D, 0.15, 0.3, 0.2)
        mc = rule_with_beta("mean_control", P, NO_D, 0.15, 0.3, 0.2)
        for i in range(0, 500, 37):
            got = collide(w[i], v[i], 0.0, 0.0, mc, mean=(w[i] + v[i]) / 2)
            want = collide(w[i], v[i], 0.0, 0.0, base)
            assert got == pytest.approx(want, abs=1e-15)

    def test_agent_weighted_symmetry_identity(self):
        Q = ControlWeight.custom(lambda w: 0.2 + 0.4 * (1 + w) / 2)
        rule = BinaryRule(kind="agent_weighted", P=CONST, D=NO_D, alpha=0.2,
                          nu=0.5, w_d=0.0, noise=NoiseModel.none(), Q=Q)
        g = np.linspace(-1, 1, 201)
        ww, vv = np.meshgrid(g, g, indexing="ij")
        lhs = rule.beta_pair(ww, vv) * Q(vv)
        rhs = rule.beta_pair(vv, ww) * Q(ww)
        assert np.max(np.abs(lhs - rhs)) < 1e-14

    def test_agent_weighted_uniform_equals_base(self):
        rng = np.random.default_rng(12)
        w, v = rng.uniform(-1, 1, (2, 5000))
        P = CompromiseFunction.sznajd(1.0)
        base = BinaryRule(kind="base", P=P, D=QUAD, alpha=0.1, nu=0.4, w_d=0.3,
                          noise=NoiseModel.none())
        aw = BinaryRule(kind="agent_weighted", P=P, D=QUAD, alpha=0.1, nu=0.4,
                        w_d=0.3, noise=NoiseModel.none(), Q=ControlWeight.uniform())
        th = rng.uniform(-0.1, 0.1, (2, 5000))
        got = collide(w, v, th[0], th[1], aw)
        want = collide(w, v, th[0], th[1], base)
        assert np.max(np.abs(got[0] - want[0])) < 1e-14
        assert np.max(np.abs(got[1] - want[1])) < 1e-14


class TestBoundConditions:
    def test_constant_quadratic_minima(self):
        rule = BinaryRule(kind="base", P=CONST, D=QUAD, alpha=0.1, nu=0.36,
                          w_d=0.0, noise=NoiseModel.uniform(0.3))
        rep = check_bounds_conditions(rule)
        assert rep.p == pytest.approx(1.0, abs=1e-12)
        assert rep.d == pytest.approx(0.5, abs=1e-6)
        assert rep.condition_control
        assert rep.noise_cap == pytest.approx(0.5 * (1 - 0.05))
        assert rep.satisfied

    def test_zero_control_no_noise_vacuous(self):
        rule = rule_with_beta("base", CONST, NO_D, 0.2, 0.0, 0.0)
        rep = check_bounds_conditions(rule)
        assert rep.satisfied
        assert math.isinf(rep.d)  # no active diffusion anywhere

    def test_separating_sznajd_unsatisfiable(self):
        rule = BinaryRule(kind="base", P=CompromiseFunction.sznajd(-1.0), D=QUAD,
                          alpha=0.1, nu=1.0, w_d=0.0, noise=NoiseModel.none())
        rep = check_bounds_conditions(rule)
        assert not rep.satisfied
        assert rep.reason == "p <= 0"

    def test_noise_above_cap_detected(self):
        rule = BinaryRule(kind="base", P=CONST, D=QUAD, alpha=0.1, nu=0.36,
                          w_d=0.0, noise=NoiseModel.uniform(0.48))
        rep = check_bounds_conditions(rule)
        assert rep.condition_control and not rep.satisfied

    def test_bound_preservation_under_satisfied_report(self):
        rule = BinaryRule(kind="base", P=CONST, D=QUAD, alpha=0.1, nu=0.36,
                          w_d=0.25, noise=NoiseModel.uniform(0.3))
        assert check_bounds_conditions(rule).satisfied
        rng = np.random.default_rng(14)
        w, v = rng.uniform(-1, 1, (2, 10**5))
        t1, t2 = rule.noise.sample(rng, 10**5), rule.noise.sample(rng, 10**5)
        ws, vs = collide(w, v, t1, t2, rule)
        assert np.count_nonzero((np.abs(ws) > 1) | (np.abs(vs) > 1)) == 0


class TestDsmcStep:
    def scaling(self, eps=0.01, kappa=2.0, zeta=0.0):
        return ScalingParams(epsilon=eps, kappa=kappa, varsigma=zeta)

    def test_odd_count_rejected(self):
        sc = self.scaling()
        rule = BinaryRule.from_scaling("base", CONST, NO_D, sc, w_d=0.0)
        with pytest.raises(PairingError):
            dsmc_step(OpinionEnsemble(np.zeros(5)), rule, sc, np.random.default_rng(0))

    def test_consensus_propagates_exactly(self):
        sc = self.scaling()
        rule = BinaryRule.from_scaling("base", CONST, QUAD, sc, w_d=0.3)
        ens = OpinionEnsemble(np.full(1000, 0.3))
        out, rej = dsmc_step(ens, rule, sc, np.random.default_rng(1))
        assert np.all(out.values == 0.3)
        assert rej == 0

    def test_mean_preserved_without_control(self):
        sc = self.scaling(kappa=math.inf)
        rule = BinaryRule.from_scaling("base", CONST, NO_D, sc, w_d=0.0)
        ens = OpinionEnsemble.uniform(10**5, np.random.default_rng(2))
        out, _ = dsmc_step(ens, rule, sc, np.random.default_rng(3))
        assert abs(out.mean() - ens.mean()) < 1e-13

    def test_determinism_same_seed(self):
        sc = self.scaling(zeta=1.0)
        rule = BinaryRule.from_scaling("base", CONST, QUAD, sc, w_d=0.1)
        ens = OpinionEnsemble.uniform(2000, np.random.default_rng(4))
        t1, f1 = run_dsmc(ens, rule, sc, 0.3, 0.1, np.random.default_rng(77))
        t2, f2 = run_dsmc(ens, rule, sc, 0.3, 0.1, np.random.default_rng(77))
        assert np.array_equal(f1.values, f2.values)
        assert np.array_equal(t1.m, t2.m)

    def test_rejections_counted_for_separating_compromise(self):
        # gamma < 0 pushes opinions apart; the indicator kernel must reject
        # candidates that leave the interval (w* > 1 needs a pair with
        # alpha*|gamma|*(1+w)*(w-v) > 1, i.e. both agents near opposite ends)
        sc = ScalingParams(epsilon=0.45, kappa=math.inf, varsigma=0.0)
        rule = BinaryRule.from_scaling("base", CompromiseFunction.sznajd(-1.2), NO_D, sc, w_d=0.0)
        ens = OpinionEnsemble(np.random.default_rng(5).uniform(-1.0, 1.0, 2000))
        out, rej = dsmc_step(ens, rule, sc, np.random.default_rng(6))
        assert rej > 0
        assert np.all(np.abs(out.values) <= 1.0)


class TestRunDsmc:
    def test_zero_horizon_single_entry(self):
        sc = ScalingParams(epsilon=0.01, kappa=1.0, varsigma=0.0)
        rule = BinaryRule.from_scaling("base", CONST, NO_D, sc, w_d=0.0)
        ens = OpinionEnsemble.uniform(100, np.random.default_rng(7))
        trace, final = run_dsmc(ens, rule, sc, 0.0, 0.1, np.random.default_rng(8))
        assert len(trace) == 1
        assert np.array_equal(final.values, ens.values)

    def test_trace_moment_envelope(self):
        sc = ScalingParams(epsilon=0.01, kappa=0.5, varsigma=1.0)
        rule = BinaryRule.from_scaling("base", CONST, QUAD, sc, w_d=0.4)
        ens = OpinionEnsemble.uniform(20000, np.random.default_rng(9))
        trace, _ = run_dsmc(ens, rule, sc, 1.0, 0.1, np.random.default_rng(10))
        assert np.all(np.abs(trace.m) <= 1.0)
        assert np.all(trace.m**2 <= trace.E + 1e-12)
        assert np.all(trace.E <= 1.0 + 1e-12)

    def test_mean_matches_closed_form_with_thinning(self):
        from kinopt.fokker_planck import mean_closed_form

        sc = ScalingParams(epsilon=0.01, kappa=2.0, varsigma=0.0)
        rule = BinaryRule.from_scaling("base", CONST, NO_D, sc, w_d=0.0)
        rng = np.random.default_rng(11)
        ens = OpinionEnsemble.uniform(40000, rng, 0.0, 1.0)
        m0 = ens.mean()
        trace, final = run_dsmc(ens, rule, sc, 0.5, 0.25, rng, dt_mc=sc.epsilon / 10)
        expected = mean_closed_form(0.5, m0, 0.0, sc.eta, sc.beta)
        spread = math.sqrt(max(trace.E[-1] - trace.m[-1] ** 2, 0.0))
        assert abs(trace.m[-1] - expected) < 4 * spread / math.sqrt(40000) + 1e-4

    def test_dt_mc_beyond_rate_rejected(self):
        sc = ScalingParams(epsilon=0.01, kappa=1.0, varsigma=0.0)
        rule = BinaryRule.from_scaling("base", CONST, NO_D, sc, w_d=0.0)
        ens = OpinionEnsemble.uniform(100, np.random.default_rng(12))
        with pytest.raises(ValueError):
            dsmc_step(ens, rule, sc, np.random.default_rng(13), dt_mc=0.02)
