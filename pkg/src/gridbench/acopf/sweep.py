"""The augmentation-strategy generalization experiment.

For each (mode, n_fake, seed): draw realistic configurations, hold out a
test slice, augment the remainder's mean load with the mode's factor
structure, train the penalty network on the augmented data only, and
measure mean constraint violations on the held-out realistic samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import SampleSet, gen_augmented, gen_realistic
from .mlp import build_mlp
from .space import DecisionSpace, ViolationReport
from .train import TrainConfig, evaluate_decisions, train_penalty
from ..grid.model import GridCase
from ..rng import derive_seed

DEFAULT_SEEDS = tuple(range(0, 100, 10))
DEFAULT_MODES = ("naive", "grouped", "brute_force")


@dataclass(frozen=True)
class ExperimentConfig:
    case: GridCase
    n_real: int = 200
    n_fake: tuple[int, ...] = (200, 1000)
    modes: tuple[str, ...] = DEFAULT_MODES
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    test_fraction: float = 0.25
    hidden_layers: int = 2
    width: int = 200
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not self.seeds:
            raise ValueError("need at least one seed")
        if not (0 < self.test_fraction < 1):
            raise ValueError("test_fraction must be in (0, 1)")
        if self.n_real * self.test_fraction < 1:
            raise ValueError("n_real too small for the test split")


@dataclass(frozen=True)
class SweepRow:
    mode: str
    n_fake: int
    seed: int
    equality_mean: float
    inequality_mean: float
    overall_mean: float


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    failures: tuple[str, ...]

    def mean_overall_by_mode(self) -> dict[str, float]:
        out: dict[str, list[float]] = {}
        for row in self.rows:
            out.setdefault(row.mode, []).append(row.overall_mean)
        return {m: float(np.mean(v)) for m, v in out.items()}

    def gap_positive_count(self, worse: str = "naive", better: str = "brute_force"
                           ) -> tuple[int, int]:
        """(number of seeds with worse > better, number of seeds compared)."""
        per_seed: dict[int, dict[str, list[float]]] = {}
        for row in self.rows:
            per_seed.setdefault(row.seed, {}).setdefault(row.mode, []).append(
                row.overall_mean)
        wins = total = 0
        for seed, modes in sorted(per_seed.items()):
            if worse in modes and better in modes:
                total += 1
                if np.mean(modes[worse]) > np.mean(modes[better]):
                    wins += 1
        return wins, total


def split_realistic(samples: SampleSet, test_fraction: float
                    ) -> tuple[SampleSet, SampleSet]:
    """Deterministic split: the trailing slice becomes the test set."""
    n = len(samples)
    n_test = max(1, int(round(n * test_fraction)))
    train = samples.subset(slice(0, n - n_test))
    test = samples.subset(slice(n - n_test, n))
    return train, test


def run_cell(config: ExperimentConfig, mode: str, n_fake: int, seed: int
             ) -> SweepRow:
    """One (mode, n_fake, seed) cell: generate, train, evaluate."""
    case = config.case
    space = DecisionSpace(case)
    realistic = gen_realistic(case, config.n_real, seed)
    train_pool, test_set = split_realistic(realistic, config.test_fraction)
    base_pd = train_pool.pd.mean(axis=0)
    base_qd = train_pool.qd.mean(axis=0)
    fake = gen_augmented(case, base_pd, base_qd, mode, n_fake,
                         derive_seed(seed, 17))
    inputs = np.concatenate([fake.pd, fake.qd], axis=1)
    model = build_mlp(space, hidden_layers=config.hidden_layers,
                      width=config.width, seed=derive_seed(seed, 23),
                      train_inputs=inputs)
    train_cfg = TrainConfig(epochs=config.train.epochs,
                            batch_size=config.train.batch_size,
                            lr=config.train.lr, momentum=config.train.momentum,
                            weights=config.train.weights,
                            seed=derive_seed(seed, 29))
    model, _ = train_penalty(model, fake.pd, fake.qd, train_cfg)
    report = evaluate_decisions(model, test_set.pd, test_set.qd)
    return SweepRow(mode=mode, n_fake=n_fake, seed=seed,
                    equality_mean=report.equality_mean,
                    inequality_mean=report.inequality_mean,
                    overall_mean=report.overall_mean)


def evaluate_generalization(model, test_set: SampleSet) -> ViolationReport:
    """Mean violation of the model's decisions on held-out realistic samples."""
    return evaluate_decisions(model, test_set.pd, test_set.qd)


def experiment_sweep(config: ExperimentConfig) -> SweepResult:
    """Full grid over (mode, n_fake, seed); failures recorded, not fatal."""
    rows: list[SweepRow] = []
    failures: list[str] = []
    for mode in config.modes:
        for n_fake in config.n_fake:
            for seed in config.seeds:
                try:
                    rows.append(run_cell(config, mode, n_fake, seed))
                except Exception as exc:  # noqa: BLE001 - cell isolation is the contract
                    failures.append(f"{mode}/n_fake={n_fake}/seed={seed}: {exc}")
    return SweepResult(rows=tuple(rows), failures=tuple(failures))
