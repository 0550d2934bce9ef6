from .policies import (
    DeterministicPolicy,
    MixedPolicyPair,
    ValueTable,
    AnyPolicy,
    policy_from_dict,
    load_policy,
    save_policy,
)
from .mdp import evaluate_policy, optimal_value, subopt_mdp, greedy_policy_value_gap, bellman_backup, clamp_gap
from .game import (
    evaluate_joint_policy,
    best_response_p1,
    best_response_p2,
    duality_gap,
    subopt_mg,
    nash_value_backward,
)
