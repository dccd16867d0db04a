"""Regenerate the files under src/zlprlab/fixtures/.

    python tools/make_fixtures.py
"""

from pathlib import Path

from zlprlab.data import SyntheticSpec, generate_synthetic, save_dataset
from zlprlab.risk import prototype_joint, save_joint

OUT = Path(__file__).resolve().parents[1] / "src" / "zlprlab" / "fixtures"

# Eight categories that co-occur in a few fixed groups, plus 3% per-bit noise.
PROTOTYPES = [(0, 1), (0, 1, 2), (3, 4), (5,), (), (5, 6, 7)]
WEIGHTS = [0.30, 0.15, 0.20, 0.15, 0.10, 0.10]


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    joint = prototype_joint(8, PROTOTYPES, WEIGHTS, flip=0.03)
    save_joint(joint, OUT / "coupled_L8.joint")
    tiny = generate_synthetic(SyntheticSpec("independent", 4, 3, 20, noise_std=0.1, name="tiny20"), seed=20)
    save_dataset(tiny, OUT / "tiny20.jsonl")


if __name__ == "__main__":
    main()
