"""The seeded desk-scale synthetic benchmark used by the acceptance suite
and the experiment scripts."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

from .config import TrainConfig, preset
from .dataio import WindowedDataset, inject_noise, stratified_split, synth_generate
from .encoder import normalized_correlation
from .evalkit import baseline_concat, raw_accuracy, run_setting
from .trainer import TrainResult, train


@dataclass(frozen=True)
class BenchmarkSpec:
    classes: int = 4
    train_per_class: int = 50
    test_per_class: int = 25
    frames: int = 8
    dim_x: int = 20
    dim_y: int = 12
    hidden: int = 32
    noise: float = 0.3
    epochs: int = 30
    batch: int = 32
    lr: float = 0.05


def make_split(seed: int, spec: BenchmarkSpec = BenchmarkSpec()) -> tuple[WindowedDataset, WindowedDataset]:
    ds = synth_generate(spec.classes, spec.train_per_class + spec.test_per_class, spec.frames,
                        spec.dim_x, spec.dim_y, spec.noise, seed)
    return stratified_split(ds, spec.test_per_class, seed)


def train_config(seed: int, spec: BenchmarkSpec = BenchmarkSpec()) -> TrainConfig:
    return TrainConfig(epochs=spec.epochs, batch_size=spec.batch, base_lr=spec.lr, seed=seed,
                       hidden=spec.hidden)


@dataclass
class SeedRun:
    seed: int
    train: WindowedDataset
    test: WindowedDataset
    models: dict[str, TrainResult] = field(default_factory=dict)
    seconds: dict[str, float] = field(default_factory=dict)

    def model(self, name: str, spec: BenchmarkSpec = BenchmarkSpec()) -> TrainResult:
        if name not in self.models:
            t = time.perf_counter()
            self.models[name] = train(self.train.X, self.train.Y, preset(name),
                                      train_config(self.seed, spec))
            self.seconds[name] = time.perf_counter() - t
        return self.models[name]

    def norm_corr(self, name: str) -> float:
        cfg = preset(name)
        return normalized_correlation(self.model(name).params.enc, self.train.X, self.train.Y,
                                      cfg.use_dw, batch_size=32)

    def accuracy(self, name: str, setting: str = "fusion", num_slices: int = 1,
                 noisy_y_snr: float | None = None) -> float:
        test = self.test
        if noisy_y_snr is not None:
            test = inject_noise(test, 2, noisy_y_snr, seed=self.seed)
        return run_setting(self.model(name).params, preset(name), self.train, test, setting,
                           num_slices)

    def raw(self, mode: str) -> float:
        return raw_accuracy(self.train, self.test, mode)

    def baseline(self, spec: BenchmarkSpec = BenchmarkSpec()) -> float:
        return baseline_concat(self.train, self.test, train_config(self.seed, spec))


def seed_run(seed: int, spec: BenchmarkSpec = BenchmarkSpec()) -> SeedRun:
    tr, te = make_split(seed, spec)
    return SeedRun(seed, tr, te)
