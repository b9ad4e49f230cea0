import numpy as np
import pytest

from remest.distributions import LaplaceDist, RngHandle, sample_laplace
from remest.strategies import (
    EPSILON,
    AffineCoder,
    NeverTransmitStrategy,
    NoiseBlindStrategy,
    ProtocolViolation,
    SwitchedThresholdStrategy,
    SystemParams,
    ThresholdAffineStrategy,
    ThresholdPolicy,
    always_transmit,
    decode,
    encode,
    never_transmit,
    noise_blind_decoder,
    schedule,
    side_channel,
)

REF = SystemParams(lam=1.0, k=2.0, p_t=1.0, c=1.0)


class TestSystemParams:
    def test_reference_derived_values(self):
        assert REF.theta == 1.0
        assert REF.alpha == 1.0
        assert REF.gamma == 0.5
        assert REF.m == pytest.approx(2.0 / 3.0, rel=1e-15)

    def test_theta_squares_back_to_power(self):
        for p_t in (0.25, 1.0, 2.0, 4.0, 7.3):
            p = SystemParams(lam=1.0, k=1.0, p_t=p_t, c=1.0)
            assert p.theta**2 == pytest.approx(p_t, rel=1e-15)

    def test_gamma_times_k_is_one(self):
        for k in (0.5, 1.0, 3.0, 5.0):
            p = SystemParams(lam=2.0, k=k, p_t=4.0, c=0.1)
            assert p.gamma * p.k == pytest.approx(1.0, rel=1e-15)

    def test_m_formula(self):
        p = SystemParams(lam=2.0, k=1.0, p_t=4.0, c=0.5)
        assert p.m == pytest.approx(0.125, rel=1e-15)

    @pytest.mark.parametrize("field", ["lam", "k", "p_t", "c"])
    def test_rejects_nonpositive(self, field):
        kwargs = {"lam": 1.0, "k": 1.0, "p_t": 1.0, "c": 1.0}
        kwargs[field] = 0.0
        with pytest.raises(ValueError, match=field):
            SystemParams(**kwargs)


class TestScheduler:
    def test_above_threshold_transmits(self):
        assert schedule(ThresholdPolicy(1.0), 1.5) == 1
        assert schedule(ThresholdPolicy(1.0), -1.5) == 1

    def test_inside_band_is_silent(self):
        assert schedule(ThresholdPolicy(1.0), -0.5) == 0

    def test_boundary_is_silent(self):
        assert schedule(ThresholdPolicy(1.0), 1.0) == 0
        assert schedule(ThresholdPolicy(1.0), -1.0) == 0

    def test_zero_threshold(self):
        assert schedule(ThresholdPolicy(0.0), 0.0) == 0
        assert schedule(ThresholdPolicy(0.0), 1e-12) == 1

    def test_rejects_negative_beta(self):
        with pytest.raises(ValueError):
            ThresholdPolicy(-0.1)


class TestEncoder:
    def test_example_values(self):
        coder = AffineCoder(REF, beta=1.0)
        assert encode(coder, 2.5) == pytest.approx(0.5, abs=1e-15)
        assert encode(coder, -2.5) == pytest.approx(0.5, abs=1e-15)

    def test_epsilon_passthrough(self):
        assert encode(AffineCoder(REF, 1.0), EPSILON) is EPSILON

    def test_contract_violation_inside_band(self):
        coder = AffineCoder(REF, beta=1.0)
        with pytest.raises(ProtocolViolation):
            encode(coder, 0.5)
        with pytest.raises(ProtocolViolation):
            encode(coder, 1.0)  # boundary belongs to the silent branch


class TestSideChannel:
    def test_sign_values(self):
        assert side_channel(-3.0) == -1
        assert side_channel(2.0) == 1

    def test_epsilon_passthrough(self):
        assert side_channel(EPSILON) is EPSILON

    def test_zero_payload_convention(self):
        assert side_channel(0.0) == 1


class TestDecoder:
    def test_example_value(self):
        # gamma = 1/2 so the shrinkage factor is 1/3
        coder = AffineCoder(REF, beta=1.0)
        assert decode(coder, 0.9, 1) == pytest.approx(0.9 / 3.0 + 1.0 / 3.0 + 1.0, abs=1e-14)
        assert decode(coder, 0.9, -1) == pytest.approx(-(0.9 / 3.0 + 1.0 / 3.0 + 1.0), abs=1e-14)

    def test_silent_stage_decodes_to_zero(self):
        assert decode(AffineCoder(REF, 1.0), EPSILON, EPSILON) == 0.0

    def test_mixed_inputs_rejected(self):
        coder = AffineCoder(REF, 1.0)
        with pytest.raises(ProtocolViolation):
            decode(coder, 0.9, EPSILON)
        with pytest.raises(ProtocolViolation):
            decode(coder, EPSILON, 1)

    def test_bad_sign_rejected(self):
        with pytest.raises(ProtocolViolation):
            decode(AffineCoder(REF, 1.0), 0.9, 2)

    def test_odd_symmetry(self):
        coder = AffineCoder(REF, beta=0.7)
        for y in np.linspace(-8.0, 8.0, 33):
            assert decode(coder, float(y), -1) == -decode(coder, float(y), 1)


class TestEpsilonSymbol:
    def test_singleton(self):
        assert type(EPSILON)() is EPSILON

    def test_distinguishable_from_zero(self):
        assert EPSILON != 0.0
        assert EPSILON != 0
        assert not isinstance(EPSILON, float)


def _transmitting_draws(params, beta, n, seed):
    src = LaplaceDist(0.0, 1.0 / params.lam)
    x = sample_laplace(src, RngHandle(seed), size=n)
    return x[np.abs(x) > beta]


class TestConditionalMoments:
    """Monte Carlo checks of the conditional algebra behind the affine coder."""

    def test_power_equality(self):
        # conditioned on transmission, E[Y^2] equals the budget exactly
        beta = 1.2909944487358056
        x = _transmitting_draws(REF, beta, 4_000_000, seed=31)
        y = AffineCoder(REF, beta).encode_value(x)
        sq = y**2
        se = sq.std(ddof=1) / np.sqrt(sq.size)
        assert abs(sq.mean() - REF.p_t) < 4.0 * se

    def test_power_equality_other_params(self):
        p = SystemParams(lam=2.0, k=1.0, p_t=4.0, c=0.5)
        beta = 0.6
        x = _transmitting_draws(p, beta, 2_000_000, seed=32)
        sq = AffineCoder(p, beta).encode_value(x) ** 2
        se = sq.std(ddof=1) / np.sqrt(sq.size)
        assert abs(sq.mean() - p.p_t) < 4.0 * se


class TestBaselines:
    def test_always_transmit_is_zero_threshold(self):
        strat = always_transmit(REF)
        assert isinstance(strat, ThresholdAffineStrategy)
        assert strat.beta == 0.0
        t = np.arange(1, 6)
        x = np.array([0.1, -0.2, 3.0, -4.0, 0.5])
        assert strat.transmit(t, x).all()

    def test_never_transmit_is_distinguished(self):
        strat = never_transmit(REF)
        assert isinstance(strat, NeverTransmitStrategy)
        x = np.array([0.0, 100.0, -100.0])
        assert not strat.transmit(np.arange(3), x).any()
        with pytest.raises(ProtocolViolation):
            strat.encode(np.array([1]), np.array([5.0]))
        with pytest.raises(ProtocolViolation):
            strat.decode(np.array([1]), np.array([5.0]), np.array([1]))

    def test_noise_blind_inverts_encoder_exactly(self):
        strat = noise_blind_decoder(REF, beta=1.0)
        assert isinstance(strat, NoiseBlindStrategy)
        t = np.zeros(5)
        x = np.array([1.5, 2.5, -3.0, 7.0, -1.1])
        y = strat.encode(t, x)
        s = np.where(x >= 0.0, 1, -1)
        recovered = strat.decode(t, y, s)  # noiseless channel
        np.testing.assert_allclose(recovered, x, rtol=1e-12)

    def test_threshold_strategy_exposes_policy_triple(self):
        strat = ThresholdAffineStrategy(REF, 0.8)
        assert strat.scheduler == ThresholdPolicy(0.8)
        assert strat.coder == AffineCoder(REF, 0.8)
        assert strat.silent_estimate() == 0.0


class TestSwitchedThreshold:
    def test_threshold_doubles_after_switch(self):
        strat = SwitchedThresholdStrategy(REF, beta=1.0, switch_stage=5)
        x = np.full(10, 1.5)
        t = np.arange(1, 11)
        u = strat.transmit(t, x)
        assert u[:5].all()  # |x| = 1.5 > 1.0
        assert not u[5:].any()  # 1.5 <= 2.0

    def test_coder_follows_the_active_threshold(self):
        strat = SwitchedThresholdStrategy(REF, beta=1.0, switch_stage=5)
        early = strat.encode(np.array([1]), np.array([3.0]))[0]
        late = strat.encode(np.array([9]), np.array([3.0]))[0]
        assert early == pytest.approx(1.0)  # 3 - 1 - 1
        assert late == pytest.approx(0.0)  # 3 - 2 - 1
