"""Generic seeded genetic-algorithm engine with roulette selection and elitism.

Genomes are opaque immutable values; problem modules supply fitness,
crossover, mutation, and a validating repair hook.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Sequence, TypeVar

import numpy as np

from .errors import FitnessNotFinite, InvalidInitialPopulation

G = TypeVar("G")
Sense = Literal["maximize", "minimize"]

CrossoverFn = Callable[[G, G, np.random.Generator], tuple[G, G]]
MutationFn = Callable[[G, np.random.Generator], G]
ValidatorFn = Callable[[G], G]
FitnessFn = Callable[[G], float]
GenerationHook = Callable[[int, Sequence[G], np.ndarray], None]


@dataclass(frozen=True)
class GaConfig:
    """Evolution knobs shared by both optimization stages.

    Defaults are tunable engineering choices, except generations=10 which is
    the working value the whole pipeline was sized around.
    """

    population_size: int = 50
    generations: int = 10
    crossover_rate: float = 0.9
    mutation_rate: float = 0.3
    elite_count: int = 2
    rng_seed: int = 0
    objective_sense: Sense = "maximize"

    def __post_init__(self):
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        if not (0 <= self.elite_count < self.population_size):
            raise ValueError("elite_count must satisfy 0 <= elite_count < population_size")
        for name in ("crossover_rate", "mutation_rate"):
            rate = getattr(self, name)
            if not (0.0 <= rate <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1]")
        if not (0 <= self.rng_seed < 2**64):
            raise ValueError("rng_seed must be an unsigned 64-bit integer")
        if self.objective_sense not in ("maximize", "minimize"):
            raise ValueError(f"unknown objective_sense {self.objective_sense!r}")


@dataclass(frozen=True)
class GenerationRecord:
    generation: int
    best_fitness: float
    mean_fitness: float
    best_index: int


@dataclass
class EvolutionHistory:
    """Per-generation convergence log; row 0 describes the initial population."""

    records: list[GenerationRecord] = field(default_factory=list)

    def best_values(self) -> list[float]:
        return [r.best_fitness for r in self.records]

    def write_csv(self, path: Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["generation", "best_fitness", "mean_fitness"])
            for r in self.records:
                writer.writerow([r.generation, repr(r.best_fitness), repr(r.mean_fitness)])


def _is_better(a: float, b: float, sense: Sense) -> bool:
    return a > b if sense == "maximize" else a < b


def selection_weights(fitnesses: Sequence[float], sense: Sense) -> np.ndarray:
    """Shifted roulette weights, strictly positive for any finite fitness list.

    Maximize weights by f - min(f); minimize by max(f) - f; both offset by
    eps = 1e-6 * (spread + 1) so equal fitnesses degrade to uniform draws.
    """
    fits = np.asarray(fitnesses, dtype=float)
    lo, hi = fits.min(), fits.max()
    eps = 1e-6 * ((hi - lo) + 1.0)
    base = fits - lo if sense == "maximize" else hi - fits
    return base + eps


def roulette_select(fitnesses: Sequence[float], sense: Sense,
                    rng: np.random.Generator, raw: bool = False) -> int:
    """Draw one index with probability proportional to its selection weight.

    With ``raw=True`` the fitnesses themselves are the weights (they must be
    nonnegative); an all-zero list falls back to a uniform draw.
    """
    if raw:
        w = np.asarray(fitnesses, dtype=float)
        if (w < 0).any():
            raise ValueError("raw roulette weights must be nonnegative")
        if w.sum() == 0:
            return int(rng.integers(len(w)))
    else:
        w = selection_weights(fitnesses, sense)
    cum = np.cumsum(w)
    r = rng.random() * cum[-1]
    return min(int(np.searchsorted(cum, r, side="right")), len(w) - 1)


def run(
    initial_population: Sequence[G],
    fitness_fn: FitnessFn,
    crossover_fn: CrossoverFn,
    mutation_fn: MutationFn,
    validator_fn: ValidatorFn,
    config: GaConfig,
    on_generation: GenerationHook | None = None,
) -> tuple[G, EvolutionHistory]:
    """Evolve the population and return the best-ever genome plus its history.

    Each generation copies the elite_count best genomes unchanged, then fills
    the rest with roulette-selected parents put through crossover (with
    probability crossover_rate, else the fitter parent is cloned), mutation
    (with probability mutation_rate), and the validating repair hook.

    Randomness comes from one stream per generation derived from
    (rng_seed, generation), so results do not depend on how fitness
    evaluations are scheduled.
    """
    population = list(initial_population)
    n = config.population_size
    if len(population) != n:
        raise InvalidInitialPopulation(f"expected {n} genomes, got {len(population)}")
    for i, genome in enumerate(population):
        if validator_fn(genome) != genome:
            raise InvalidInitialPopulation(f"initial genome {i} fails validation")

    sense = config.objective_sense
    history = EvolutionHistory()
    best_genome: G | None = None
    best_fit = -math.inf if sense == "maximize" else math.inf

    def evaluate(pop: list[G], gen: int) -> np.ndarray:
        nonlocal best_genome, best_fit
        fits = np.empty(len(pop))
        for i, genome in enumerate(pop):
            value = float(fitness_fn(genome))
            if not math.isfinite(value):
                raise FitnessNotFinite(gen, i, value)
            fits[i] = value
        idx = int(np.argmax(fits) if sense == "maximize" else np.argmin(fits))
        if _is_better(fits[idx], best_fit, sense):
            best_fit = float(fits[idx])
            best_genome = pop[idx]
        history.records.append(
            GenerationRecord(gen, float(fits[idx]), float(fits.mean()), idx)
        )
        if on_generation is not None:
            on_generation(gen, pop, fits)
        return fits

    fits = evaluate(population, 0)
    for gen in range(1, config.generations + 1):
        rng = np.random.default_rng(np.random.SeedSequence(config.rng_seed, spawn_key=(gen,)))
        population = _breed(population, fits, config, rng, crossover_fn, mutation_fn, validator_fn)
        fits = evaluate(population, gen)

    assert best_genome is not None
    return best_genome, history


def _breed(
    population: list[G],
    fits: np.ndarray,
    config: GaConfig,
    rng: np.random.Generator,
    crossover_fn: CrossoverFn,
    mutation_fn: MutationFn,
    validator_fn: ValidatorFn,
) -> list[G]:
    sense = config.objective_sense
    n = config.population_size
    key = (lambda i: (-fits[i], i)) if sense == "maximize" else (lambda i: (fits[i], i))
    ranked = sorted(range(n), key=key)
    new_population = [population[i] for i in ranked[: config.elite_count]]

    # fitnesses are fixed while breeding, so the roulette wheel is built once
    cum = np.cumsum(selection_weights(fits, sense))
    total = cum[-1]

    def select() -> int:
        return min(int(np.searchsorted(cum, rng.random() * total, side="right")), n - 1)

    while len(new_population) < n:
        i = select()
        j = select()
        if rng.random() < config.crossover_rate:
            children = list(crossover_fn(population[i], population[j], rng))
        else:
            fitter = i if not _is_better(fits[j], fits[i], sense) else j
            children = [population[fitter]]
        for child in children:
            if len(new_population) >= n:
                break
            if rng.random() < config.mutation_rate:
                child = mutation_fn(child, rng)
            new_population.append(validator_fn(child))
    return new_population
