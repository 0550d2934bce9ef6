import argparse
import numpy as np

from parallel_lsvi.envs import load_spec, validate
from parallel_lsvi.utils import render_table


def summary(path: str) -> str:
    """
    showing the arrays, shapes and norms of a spec file like a table for readable.

    example:

        Spec: LinearMdpSpec(|S|=5, actions=(3,), H=4, d=6, s0=0)
        Hash: 3f1c...

        Arrays:
                      Name      |     Shape     |     max norm     |
                  -----------------------------------------------
           (0)      features    |   (5, 3, 6)   |      1.0000      |
    """
    spec = load_spec(path)
    info = f"Spec: {spec}\n"
    info += f"Hash: {spec.hash()}\n\n"

    rows = [
        {"Name": "features", "Shape": spec.features.shape, "max norm": np.linalg.norm(spec.features, axis=-1).max()},
        {"Name": "measures", "Shape": spec.measures.shape, "max norm": np.linalg.norm(np.abs(spec.measures).sum(axis=1), axis=-1).max()},
        {"Name": "theta", "Shape": spec.theta.shape, "max norm": np.linalg.norm(spec.theta, axis=-1).max()},
        {"Name": "rewards", "Shape": spec.rewards.shape, "max norm": np.abs(spec.rewards).max()},
    ]
    for row in rows:
        row["max norm"] = f"{row['max norm']:.4f}"
    info += render_table(rows, ["Name", "Shape", "max norm"], "Arrays")

    violations = validate(spec)
    info += "\n"
    if violations:
        info += render_table(
            [{"code": v.code, "index": v.index, "value": f"{v.value:.6g}"} for v in violations], ["code", "index", "value"], "Violations"
        )
    else:
        info += "Violations: none\n"
    return info


if __name__ == "__main__":
    parser = argparse.ArgumentParser("Inspection of a linear MDP/MG spec file")
    parser.add_argument('--spec', type=str, help="spec's path for inspection")
    args = parser.parse_args()
    print(summary(args.spec))
