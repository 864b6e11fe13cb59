import numpy as np
import pytest

import stackinfer as si
from conftest import HORIZON, make_follower, make_leader
from stackinfer.studies import run_episodes


@pytest.fixture(scope="module")
def solved_200(follower):
    grid = si.build_grid(HORIZON, 200)
    fr = si.solve_follower_a(follower, grid)
    coeffs = si.compute_coefficients(fr, follower)
    return grid, fr, coeffs


class TestEpisodeDriver:
    def test_states_chain_and_noise_is_fresh(self, follower, solved_200):
        grid, fr, coeffs = solved_200
        leader = make_leader(0.5)
        history = run_episodes(leader, follower, fr, coeffs, grid, 3, si.RngContract(3))
        assert len(history) == 3
        states = [h[0] for h in history]
        assert [s.n_episodes for s in states] == [1, 2, 3]
        # precision accumulates strictly
        totals = [s.total_precision for s in states]
        assert all(b > a for a, b in zip(totals, totals[1:]))

    def test_common_seed_noise_shared_across_intensities(self, follower, solved_200):
        # same master seed => identical Brownian streams per episode, so the
        # two intensities see the same follower innovations
        grid, fr, coeffs = solved_200
        rng = si.RngContract(12)
        a = rng.normals(grid.n_steps, si.core.STREAM_FOLLOWER, 0)
        b = si.RngContract(12).normals(grid.n_steps, si.core.STREAM_FOLLOWER, 0)
        assert np.array_equal(a, b)

    def test_error_dominance_every_episode(self, follower, solved_200):
        # With no information incentive, the aggregate error stays above the
        # informed one at every episode count (pinned common-seed run).
        grid, fr, coeffs = solved_200
        h0 = run_episodes(make_leader(0.0), follower, fr, coeffs, grid, 30,
                          si.RngContract(16))
        h93 = run_episodes(make_leader(0.93), follower, fr, coeffs, grid, 30,
                           si.RngContract(16))
        e0 = [abs(s.m_bar - follower.dilation) for s, _, _ in h0]
        e93 = [abs(s.m_bar - follower.dilation) for s, _, _ in h93]
        assert all(a > b for a, b in zip(e0, e93))

    def test_stopping_episode_concentrates_across_seeds(self, follower, solved_200):
        # The plug-in stopping rule at a 1e-3 variance threshold fires after
        # a tightly clustered number of episodes.
        grid, fr, coeffs = solved_200
        leader = make_leader(0.93)
        stops = []
        for seed in range(1, 21):
            history = run_episodes(leader, follower, fr, coeffs, grid, 25,
                                   si.RngContract(seed))
            stop_n = next(
                (i + 1 for i, (state, _, _) in enumerate(history)
                 if si.stopping_rule(state, 1e-3, follower)),
                None,
            )
            assert stop_n is not None
            stops.append(stop_n)
        median = float(np.median(stops))
        within = sum(abs(s - median) <= 2 for s in stops)
        assert within >= 0.8 * len(stops)
