import json
import pytest
import numpy as np

from parallel_lsvi.envs import (
    LinearMdpSpec,
    RewardFunction,
    SpecKind,
    generate_random_mdp,
    generate_random_mg,
    load_reward,
    load_spec,
    sample_transition,
    save_reward,
    save_spec,
    spec_from_dict,
    tabular_mdp,
    validate,
)
from parallel_lsvi.errors import GenerationError, ParameterError


def _copy_mdp(spec, **overrides) -> LinearMdpSpec:
    fields = dict(
        n_states=spec.n_states,
        n_actions=spec.n_actions,
        horizon=spec.horizon,
        dim=spec.dim,
        features=spec.features.copy(),
        measures=spec.measures.copy(),
        theta=spec.theta.copy(),
        initial_state=spec.initial_state,
    )
    fields.update(overrides)
    return LinearMdpSpec(**fields)


def test_tabular_embedding_is_valid(chain_mdp):
    assert validate(chain_mdp) == []
    assert chain_mdp.dim == 4
    assert np.array_equal(chain_mdp.kernel[0, 0, 1], [0.0, 1.0])
    assert chain_mdp.rewards[0, 1, 1] == pytest.approx(0.5)


def test_generated_specs_are_valid():
    assert validate(generate_random_mdp(2, 2, 3, 4, seed=0)) == []
    assert validate(generate_random_mdp(4, 3, 4, 5, seed=7)) == []
    assert validate(generate_random_mg(3, 2, 2, 3, 4, seed=1)) == []


def test_generation_is_deterministic():
    first = generate_random_mdp(4, 3, 4, 5, seed=7)
    second = generate_random_mdp(4, 3, 4, 5, seed=7)
    assert np.array_equal(first.features, second.features)
    assert np.array_equal(first.measures, second.measures)
    assert np.array_equal(first.theta, second.theta)
    assert first.hash() == second.hash()

    game = generate_random_mg(3, 2, 2, 3, 4, seed=1)
    assert game.hash() == generate_random_mg(3, 2, 2, 3, 4, seed=1).hash()
    assert game.hash() != generate_random_mg(3, 2, 2, 3, 4, seed=2).hash()


def test_one_hot_generation_matches_dimension():
    spec = generate_random_mdp(2, 2, 3, 4, seed=0)
    assert np.array_equal(spec.joint_features, np.eye(4).reshape(2, 2, 4))


@pytest.mark.parametrize(
    "n_states, n_actions, horizon, dim",
    [(2, 2, 3, 5), (2, 2, 1, 3), (2, 2, 3, 1), (0, 2, 3, 2)],
)
def test_generation_rejects_sizes(n_states, n_actions, horizon, dim):
    with pytest.raises(GenerationError):
        generate_random_mdp(n_states, n_actions, horizon, dim, seed=0)


def test_validate_reports_feature_bound(chain_mdp):
    features = chain_mdp.features.copy()
    features[1, 0] *= 1.5
    violations = validate(_copy_mdp(chain_mdp, features=features))
    bound = [v for v in violations if v.code == "feature_bound"]
    assert len(bound) == 1
    assert bound[0].index == (1, 0)
    assert bound[0].value == pytest.approx(1.5)


def test_validate_reports_kernel_normalization(chain_mdp):
    measures = chain_mdp.measures.copy()
    # one-hot coordinate 0 is the pair (x=0, a=0)
    measures[0, :, 0] *= 0.9
    violations = validate(_copy_mdp(chain_mdp, measures=measures))
    codes = {(v.code, v.index) for v in violations}
    assert ("kernel_normalization", (0, 0, 0)) in codes
    row = [v for v in violations if v.code == "kernel_normalization"][0]
    assert row.value == pytest.approx(0.9)


def test_validate_reports_negative_kernel_and_rewards(chain_mdp):
    measures = chain_mdp.measures.copy()
    measures[1, 0, 3] = -0.25
    measures[1, 1, 3] = 1.25
    theta = chain_mdp.theta.copy()
    theta[0, 2] = 1.2
    violations = validate(_copy_mdp(chain_mdp, measures=measures, theta=theta))
    codes = {v.code for v in violations}
    assert "kernel_negative" in codes
    assert "reward_range" in codes
    assert "kernel_normalization" not in codes


def test_spec_rejects_bad_shapes(chain_mdp):
    with pytest.raises(ParameterError):
        _copy_mdp(chain_mdp, features=np.zeros((2, 2, 3)))
    with pytest.raises(ParameterError):
        _copy_mdp(chain_mdp, initial_state=2)


def test_joint_index(random_mg):
    assert random_mg.joint_index(1, 0) == 2
    assert random_mg.split_joint(3) == (1, 1)
    with pytest.raises(ParameterError):
        random_mg.joint_index(1)
    with pytest.raises(ParameterError):
        random_mg.joint_index(2, 0)


def test_sample_transition_deterministic_row(chain_mdp):
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert sample_transition(chain_mdp, 0, 1, 0, rng) == (1, 0.0)
        assert sample_transition(chain_mdp, 1, 0, 1, rng) == (1, 1.0)


def test_sample_transition_uniform_frequency():
    transitions = np.full((2, 2, 1, 2), 0.5)
    rewards = np.full((2, 2, 1), 0.7)
    spec = tabular_mdp(transitions, rewards)
    rng = np.random.default_rng(11)
    samples = [sample_transition(spec, 0, 0, 0, rng) for _ in range(100_000)]
    frequency = np.mean([x for x, _ in samples])
    assert frequency == pytest.approx(0.5, abs=0.01)
    assert all(r == pytest.approx(0.7) for _, r in samples[:10])


def test_sample_transition_rejects_bad_inputs(chain_mdp, random_mg):
    rng = np.random.default_rng(0)
    with pytest.raises(ParameterError):
        sample_transition(chain_mdp, 2, 0, 0, rng)
    with pytest.raises(ParameterError):
        sample_transition(chain_mdp, 0, 0, 2, rng)
    with pytest.raises(ParameterError):
        sample_transition(random_mg, 0, 0, 0, rng)


def test_reward_functions(random_mdp):
    goal = RewardFunction.single_goal(random_mdp, 3)
    assert goal.table[:, 3].min() == 1.0
    assert goal.table[:, :3].max() == 0.0
    assert RewardFunction.constant(random_mdp, 0.25).table.max() == 0.25
    assert RewardFunction.zero(random_mdp).table.max() == 0.0

    linear = RewardFunction.random_linear(random_mdp, seed=4)
    assert linear.table.shape == (4, 4, 3)
    assert np.array_equal(linear.table, RewardFunction.random_linear(random_mdp, seed=4).table)

    with pytest.raises(ParameterError):
        RewardFunction.single_goal(random_mdp, 4)
    with pytest.raises(ParameterError):
        RewardFunction.constant(random_mdp, 1.5)


def test_spec_file_round_trip(tmp_path, random_mg):
    path = str(tmp_path / "game.json")
    save_spec(random_mg, path)
    loaded = load_spec(path)
    assert loaded.kind == SpecKind.MG
    assert np.array_equal(loaded.measures, random_mg.measures)
    assert loaded.hash() == random_mg.hash()


def test_spec_from_dict_rejects_bad_documents(random_mdp):
    payload = random_mdp.to_dict()
    with pytest.raises(ParameterError):
        spec_from_dict({k: v for k, v in payload.items() if k != "theta"})
    with pytest.raises(ParameterError):
        spec_from_dict(dict(payload, extra=1))
    with pytest.raises(ParameterError):
        spec_from_dict(dict(payload, kind="pomdp"))


def test_reward_file_accepts_table_or_theta(tmp_path, random_mdp):
    reward = RewardFunction.random_linear(random_mdp, seed=2)
    path = tmp_path / "reward.json"
    save_reward(reward, str(path))
    assert np.array_equal(load_reward(random_mdp, str(path)).table, reward.table)

    theta = np.full((random_mdp.horizon, random_mdp.dim), 0.1)
    path.write_text(json.dumps({"theta": theta.tolist()}))
    expected = np.einsum("xad,hd->hxa", random_mdp.features, theta)
    assert np.allclose(load_reward(random_mdp.feature_map(), str(path)).table, expected)

    path.write_text(json.dumps({"kind": "mg", "table": reward.table.tolist()}))
    with pytest.raises(ParameterError):
        load_reward(random_mdp, str(path))
