import numpy as np
import pytest

from erglearn.baselines import (
    expert_cartpole,
    negative_cartpole,
    scripted_planar,
    upright_lqr_gain,
)
from erglearn.demos import default_demo_set, dumps_demos, loads_demos
from erglearn.metrics import DEFAULT_OBSTACLE, cartpole_success, cleaning_score, reach_success
from erglearn.spectral import grid_cell_centers, reconstruct_density, traj_coefficients


class TestExpertCartpole:
    def test_noise_free_is_deterministic(self):
        a = expert_cartpole(12.0, 0.0, seed=0)
        b = expert_cartpole(12.0, 0.0, seed=1)  # seed unused without noise
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.times, b.times)

    def test_enters_and_holds_success_region(self):
        demo = expert_cartpole(30.0, 0.0, seed=0)
        outcome = cartpole_success(demo.times, demo.states)
        assert outcome.first_success_time is not None
        # once caught, the regulator holds to the end
        assert outcome.total_success_time == pytest.approx(
            30.0 - outcome.first_success_time, abs=0.5
        )
        assert outcome.total_success_time > 0.5 * 30.0 - 5.0

    def test_sampling_grid(self):
        demo = expert_cartpole(30.0, 0.0, seed=0)
        assert demo.times.size == 1501  # 30 s at 50 Hz plus the initial sample
        assert demo.label == "positive" and demo.source == "synthetic"

    def test_metadata_and_validation(self):
        demo = expert_cartpole(11.0, 0.2, seed=4)
        assert demo.meta["seed"] == 4
        with pytest.raises(ValueError):
            expert_cartpole(5.0, 0.0)

    def test_lqr_gain_stabilizes_discrete_linearization(self):
        gain, a_d, b_d = upright_lqr_gain()
        eigen = np.linalg.eigvals(a_d - b_d @ gain)
        assert np.all(np.abs(eigen) < 1.0)


class TestNegativeCartpole:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_never_succeeds(self, seed):
        demo = negative_cartpole(20.0, seed=seed)
        assert cartpole_success(demo.times, demo.states).total_success_time == 0.0

    def test_distinct_seeds_distinct_trajectories(self):
        a = negative_cartpole(12.0, seed=0)
        b = negative_cartpole(12.0, seed=1)
        assert not np.array_equal(a.states, b.states)

    def test_density_concentrates_at_rest(self):
        demo = negative_cartpole(30.0, seed=0)
        ds = default_demo_set([demo])
        coeffs = traj_coefficients(
            demo.times, demo.states[:, :2], 10, ds.domain, periodic=[True, False]
        )
        grid = reconstruct_density(coeffs, 33)
        axes = grid_cell_centers(ds.domain, 33)
        i, _ = np.unravel_index(np.argmax(grid), grid.shape)
        assert abs(axes[0][i]) > 2.0

    def test_duration_guard(self):
        with pytest.raises(ValueError):
            negative_cartpole(5.0)


class TestScriptedPlanar:
    def test_positive_reach_succeeds(self):
        demo = scripted_planar("reach", "positive", seed=0)
        assert reach_success(demo.states[:, :2])
        assert 10.0 <= demo.duration <= 15.0

    def test_negative_reach_fails(self):
        demo = scripted_planar("reach", "negative", seed=0)
        assert not reach_success(demo.states[:, :2])

    def test_positive_clean_covers_without_collision(self):
        demo = scripted_planar("clean", "positive", seed=1)
        score = cleaning_score(demo.states[:, :2])
        assert score.m >= 0.8
        assert not score.collided
        assert 40.0 <= demo.duration <= 50.0

    def test_negative_clean_orbits_the_obstacle(self):
        demo = scripted_planar("clean", "negative", seed=1)
        center = np.asarray(DEFAULT_OBSTACLE.center)
        dist = np.hypot(*(demo.states[:, :2] - center).T)
        assert np.all(dist <= 2.0 * DEFAULT_OBSTACLE.radius)
        assert cleaning_score(demo.states[:, :2]).m < 0.5
        assert 18.0 <= demo.duration <= 25.0

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            scripted_planar("fly", "positive")
        with pytest.raises(ValueError):
            scripted_planar("reach", "neutral")

    def test_seeded_determinism(self):
        a = scripted_planar("clean", "positive", seed=9)
        b = scripted_planar("clean", "positive", seed=9)
        assert dumps_demos([a]) == dumps_demos([b])


class TestFaithfulnessAndSerialization:
    def test_every_generator_roundtrips(self, tmp_path):
        demos_list = [
            expert_cartpole(12.0, 0.1, seed=0),
            negative_cartpole(12.0, seed=0),
        ]
        text = dumps_demos(demos_list, system="cartpole")
        system, loaded = loads_demos(text)
        assert system == "cartpole"
        for orig, back in zip(demos_list, loaded):
            assert np.array_equal(orig.states, back.states)
            assert orig.label == back.label

    @pytest.mark.parametrize("seed", [0, 3])
    def test_label_faithfulness_coupling(self, seed):
        pos_reach = scripted_planar("reach", "positive", seed=seed)
        neg_reach = scripted_planar("reach", "negative", seed=seed)
        assert reach_success(pos_reach.states[:, :2])
        assert not reach_success(neg_reach.states[:, :2])
        pos_clean = scripted_planar("clean", "positive", seed=seed)
        neg_clean = scripted_planar("clean", "negative", seed=seed)
        assert cleaning_score(pos_clean.states[:, :2]).m >= 0.8
        assert cleaning_score(neg_clean.states[:, :2]).m < 0.5
