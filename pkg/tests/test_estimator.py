import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gossipnash.estimator import GossipNashSeeker, NashOracle, check_step_size
from gossipnash.exceptions import ValidationError
from suite import five_player_game, five_player_x_star


def test_seeker_fit_and_score():
    spec = five_player_game()
    est = GossipNashSeeker(n_iters=20_000, stride=100, random_state=0, x_star=five_player_x_star()).fit(spec)
    assert est.equilibrium_.shape == (5,)
    assert est.trace_.res_ne[-1] < 1.0
    assert est.index_map_.m == est.trace_.m
    assert -1e-1 < est.score(spec) <= 0.0


def test_seeker_params_and_clone():
    est = GossipNashSeeker(step_size=0.05, n_iters=10)
    assert est.get_params()["step_size"] == 0.05
    other = clone(est).set_params(n_iters=20)
    assert other.n_iters == 20 and est.n_iters == 10


def test_seeker_validation():
    spec = five_player_game()
    with pytest.raises(ValidationError):
        GossipNashSeeker(n_iters=0).fit(spec)
    with pytest.raises(ValidationError):
        GossipNashSeeker(algorithm="other").fit(spec)
    with pytest.raises(ValidationError):
        GossipNashSeeker().fit(np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        check_step_size("fast")
    with pytest.raises(NotFittedError):
        GossipNashSeeker().score(spec)


def test_nash_oracle():
    spec = five_player_game()
    est = NashOracle().fit(spec)
    assert np.allclose(est.equilibrium_, five_player_x_star(), atol=1e-9)
    assert est.score(spec) >= -1e-10
