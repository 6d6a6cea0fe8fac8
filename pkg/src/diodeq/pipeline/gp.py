"""Small genetic-programming search over pipeline trees."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..errors import InputError
from ..model_core import cross_validate
from .tree import MAX_DEPTH, REGISTRY, CompiledPipeline, PipelineNode, inp, transformer_depth, validate_tree

DEFAULT_KINDS = ("iqr-scaler", "standard-scaler", "stacking-gbt", "stacking-knn",
                 "feature-union", "knn-regressor", "gbt-regressor")


@dataclass(frozen=True)
class GpConfig:
    population: int = 24
    generations: int = 50
    mutation_rate: float = 0.85
    crossover_rate: float = 0.15
    tournament_size: int = 3
    cv_folds: int = 5
    seed: int = 0
    elitism: int = 1
    max_depth: int = MAX_DEPTH
    kinds: tuple[str, ...] = DEFAULT_KINDS
    workers: int = 1

    def __post_init__(self):
        if self.population < 2:
            raise InputError("population must be at least 2")
        if not (0 <= self.mutation_rate <= 1 and 0 <= self.crossover_rate <= 1):
            raise InputError("rates must lie in [0, 1]")
        if self.elitism < 1 or self.elitism > self.population:
            raise InputError("elitism must be in [1, population]")
        if self.tournament_size < 1 or self.generations < 0:
            raise InputError("invalid tournament size or generation count")
        unknown = set(self.kinds) - set(REGISTRY)
        if unknown:
            raise InputError(f"unknown node kinds {sorted(unknown)}")
        if not any(REGISTRY[k].role == "estimator" for k in self.kinds):
            raise InputError("registry has no estimator")


@dataclass
class GpResult:
    best: PipelineNode
    best_fitness: float
    history: list[tuple[int, float, float]] = field(default_factory=list)
    evaluated: dict[str, float] = field(default_factory=dict)


class _Builder:
    def __init__(self, config: GpConfig, rng: np.random.Generator):
        self.cfg = config
        self.rng = rng
        self.estimators = [k for k in config.kinds if REGISTRY[k].role == "estimator"]
        self.transformers = [k for k in config.kinds if REGISTRY[k].role == "transformer"]

    def params(self, kind):
        return {name: values[int(self.rng.integers(len(values)))]
                for name, values in REGISTRY[kind].menu.items()}

    def feeder(self, budget: int) -> PipelineNode:
        """Random transformer subtree using at most ``budget`` transformer levels."""
        if budget <= 0 or not self.transformers or self.rng.random() < 0.4:
            return inp()
        kind = self.transformers[int(self.rng.integers(len(self.transformers)))]
        spec = REGISTRY[kind]
        return PipelineNode(kind, self.params(kind),
                            [self.feeder(budget - 1) for _ in range(spec.arity)])

    def individual(self) -> PipelineNode:
        kind = self.estimators[int(self.rng.integers(len(self.estimators)))]
        return PipelineNode(kind, self.params(kind), [self.feeder(self.cfg.max_depth)])

    def mutate(self, tree: PipelineNode) -> PipelineNode:
        tree = tree.copy()
        nodes = list(tree.nodes())
        node, parent, i = nodes[int(self.rng.integers(len(nodes)))]
        spec = REGISTRY[node.kind]
        if spec.role == "estimator":
            kind = self.estimators[int(self.rng.integers(len(self.estimators)))]
            node.kind, node.params = kind, self.params(kind)
            return tree
        depth_above = self._depth_above(tree, node)
        budget = self.cfg.max_depth - depth_above
        if spec.arity == 1 and self.rng.random() < 0.5:
            same = [k for k in self.transformers if REGISTRY[k].arity == 1]
            kind = same[int(self.rng.integers(len(same)))]
            node.kind, node.params = kind, self.params(kind)
            return tree
        parent.children[i] = self.feeder(budget)
        return tree

    def _depth_above(self, root, target) -> int:
        # transformer levels strictly above target
        def walk(node, d):
            if node is target:
                return d
            step = 1 if REGISTRY[node.kind].role == "transformer" else 0
            for c in node.children:
                r = walk(c, d + step)
                if r is not None:
                    return r
            return None
        return walk(root, 0) or 0

    def crossover(self, a: PipelineNode, b: PipelineNode) -> tuple[PipelineNode, PipelineNode]:
        a, b = a.copy(), b.copy()
        slots_a = [(n, p, i) for n, p, i in a.nodes() if p is not None]
        slots_b = [(n, p, i) for n, p, i in b.nodes() if p is not None]
        if not slots_a or not slots_b:
            return a, b
        na, pa, ia = slots_a[int(self.rng.integers(len(slots_a)))]
        nb, pb, ib = slots_b[int(self.rng.integers(len(slots_b)))]
        pa.children[ia], pb.children[ib] = nb, na
        if transformer_depth(a) > self.cfg.max_depth or transformer_depth(b) > self.cfg.max_depth:
            pa.children[ia], pb.children[ib] = na, nb
        return a, b


def evaluate(tree: PipelineNode, X, y, folds: int, seed: int) -> float:
    """Mean k-fold CV MSE; any failure scores +inf."""
    try:
        validate_tree(tree, X.shape[1])
        score = cross_validate(lambda: CompiledPipeline(tree), X, y, folds, seed).mean_mse
    except Exception:
        return math.inf
    return score if math.isfinite(score) else math.inf


def gp_search(config: GpConfig, X, y) -> GpResult:
    """Generational GP with tournament selection, subtree crossover, node mutation and elitism."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    rng = np.random.default_rng(config.seed)
    build = _Builder(config, rng)
    cache: dict[str, float] = {}

    def score_all(pop):
        todo = []
        for t in pop:
            key = t.key()
            if key not in cache and key not in todo:
                todo.append(key)
        trees = {t.key(): t for t in pop}
        if config.workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(config.workers) as ex:
                vals = list(ex.map(lambda k: evaluate(trees[k], X, y, config.cv_folds, config.seed), todo))
        else:
            vals = [evaluate(trees[k], X, y, config.cv_folds, config.seed) for k in todo]
        cache.update(zip(todo, vals))
        return [cache[t.key()] for t in pop]

    def ranked(pop, fit):
        # stable: ties keep population order
        return [pop[i] for i in sorted(range(len(pop)), key=lambda i: fit[i])]

    def tournament(pop, fit):
        picks = rng.integers(len(pop), size=config.tournament_size)
        best = min(picks, key=lambda i: (fit[i], i))
        return pop[int(best)]

    pop = [build.individual() for _ in range(config.population)]
    fit = score_all(pop)
    history = []

    def record(gen):
        finite = [f for f in fit if math.isfinite(f)]
        history.append((gen, float(min(fit)), float(np.mean(finite)) if finite else math.inf))

    record(0)
    for gen in range(1, config.generations + 1):
        elite = ranked(pop, fit)[:config.elitism]
        children = [e.copy() for e in elite]
        while len(children) < config.population:
            a = tournament(pop, fit)
            b = tournament(pop, fit)
            if rng.random() < config.crossover_rate:
                a, b = build.crossover(a, b)
            else:
                a, b = a.copy(), b.copy()
            for c in (a, b):
                if rng.random() < config.mutation_rate:
                    c = build.mutate(c)
                if len(children) < config.population:
                    children.append(c)
        pop = children
        fit = score_all(pop)
        record(gen)
    order = sorted(range(len(pop)), key=lambda i: fit[i])
    return GpResult(pop[order[0]], fit[order[0]], history, dict(cache))


def enumerate_depth1(kinds=DEFAULT_KINDS) -> list[PipelineNode]:
    """Every estimator over raw input or over a single transformer level, default params."""
    ests = [k for k in kinds if REGISTRY[k].role == "estimator"]
    trans = [k for k in kinds if REGISTRY[k].role == "transformer"]
    out = []
    for e in ests:
        ep = REGISTRY[e].default_params()
        out.append(PipelineNode(e, ep, [inp()]))
        for t in trans:
            children = [inp() for _ in range(REGISTRY[t].arity)]
            out.append(PipelineNode(e, ep, [PipelineNode(t, REGISTRY[t].default_params(), children)]))
    return out
