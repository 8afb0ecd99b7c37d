import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from rangenav.estimators import ObservabilityAuditor, RangeAidedNavigator
from rangenav.observability import analysis_truth
from rangenav.scenario import NoiseConfig, preset, run_truth, sense_run


@pytest.fixture(scope="module")
def short_log(eight_spec, world):
    truth = run_truth(eight_spec, world, 1e-3, 3.0)
    return truth, sense_run(truth, NoiseConfig.noiseless())


class Test_RangeAidedNavigator:
    def test_params_and_clone(self):
        est = RangeAidedNavigator(Q=3.0, k1=1.5)
        params = est.get_params()
        assert params["Q"] == 3.0 and params["k1"] == 1.5 and params["V"] == 10.0
        twin = clone(est)
        assert twin is not est and twin.get_params() == params
        est.set_params(rho1=0.5)
        assert est.rho1 == 0.5

    def test_fit_matches_pipeline(self, short_log, noiseless_cascade):
        truth, log = short_log
        est = RangeAidedNavigator().fit(log.as_array())
        n = len(truth)
        assert est.n_features_in_ == 10
        np.testing.assert_allclose(est.t_, truth.t, atol=1e-12)
        np.testing.assert_allclose(est.x_hat_, noiseless_cascade.riccati.x_hat[:n], rtol=0, atol=1e-12)
        np.testing.assert_allclose(est.R_hat_, noiseless_cascade.R_hat[:n], rtol=0, atol=1e-12)

    def test_transform_columns(self, short_log):
        _, log = short_log
        est = RangeAidedNavigator()
        Z = est.fit_transform(log.as_array(), t=log.t)
        assert Z.shape == (len(log), 18)
        np.testing.assert_array_equal(Z[:, :9], est.x_hat_[:, 4:13])
        np.testing.assert_array_equal(Z[:, 9:].reshape(-1, 3, 3), est.R_hat_)
        np.testing.assert_array_equal(est.transform(log.as_array()), Z)

    def test_transform_needs_fit(self, short_log):
        with pytest.raises(NotFittedError):
            RangeAidedNavigator().transform(short_log[1].as_array())

    def test_initial_estimates(self, short_log):
        _, log = short_log
        x0 = np.arange(13.0) / 10
        est = RangeAidedNavigator(x_hat0=x0, R_hat0=np.eye(3)).fit(log.as_array())
        np.testing.assert_array_equal(est.x_hat_[0], x0)

    @pytest.mark.parametrize(
        "kwargs",
        [{"g_I": (0, 0)}, {"R_hat0": 2 * np.eye(3)}, {"Q": -1.0}, {"k1": -1.0}],
    )
    def test_bad_params(self, short_log, kwargs):
        with pytest.raises(ValueError):
            RangeAidedNavigator(**kwargs).fit(short_log[1].as_array())

    def test_bad_input(self):
        with pytest.raises(ValueError):
            RangeAidedNavigator().fit(np.ones((10, 7)))


class Test_ObservabilityAuditor:
    def test_eight(self, eight_spec, world):
        truth = analysis_truth(eight_spec, world, 1e-3, 4.0)
        aud = ObservabilityAuditor().fit(truth)
        assert aud.passed_
        assert set(aud.margins_) == {"full_augmented", "reduced_pair", "pe_phi"}
        assert aud.score() == min(aud.margins_.values()) > 0

    def test_free_fall_fails(self, world):
        truth = analysis_truth(preset("free_fall", world), world, 1e-3, 3.0)
        aud = ObservabilityAuditor(delta=1.0)
        assert abs(aud.score(truth)) < 1e-8
        assert not aud.passed_

    def test_clone(self):
        aud = clone(ObservabilityAuditor(delta=0.5, step=0.25))
        assert aud.get_params() == {"delta": 0.5, "step": 0.25, "threshold": 1e-8}

    def test_errors(self, eight_truth):
        with pytest.raises(TypeError):
            ObservabilityAuditor().fit(np.zeros(3))
        with pytest.raises(ValueError):
            ObservabilityAuditor(delta=0).fit(eight_truth)
        with pytest.raises(NotFittedError):
            ObservabilityAuditor().score()
