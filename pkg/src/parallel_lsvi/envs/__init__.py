from .spec import (
    SpecKind,
    LinearSpec,
    LinearMdpSpec,
    LinearMgSpec,
    FeatureMap,
    RewardFunction,
    Violation,
    validate,
    sample_transition,
)
from .generator import generate_random_mdp, generate_random_mg, tabular_mdp, tabular_mg
from .io import load_spec, save_spec, spec_from_dict, load_reward, save_reward, reward_from_dict
