"""Anchor grids and differential-evolution search over anchor scales.

Anchors follow the usual pyramid convention: at each level, cell centers at
((i+0.5)*stride, (j+0.5)*stride) carry one box per (ratio, scale) of size
base*scale*sqrt(ratio) x base*scale/sqrt(ratio).  The scale search maximizes
mean best-IoU between the anchor set and the ground-truth boxes with a
classic rand/1/bin differential evolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import EmptyGroundTruthError, InvalidBoundsError
from .rng import RandomStream

__all__ = [
    "AnchorConfig",
    "DeParams",
    "generate_anchors",
    "anchor_fitness",
    "differential_evolution",
    "optimize_scales",
]

DEFAULT_LEVELS = ((8, 32), (16, 64), (32, 128), (64, 256), (128, 512))


@dataclass(frozen=True)
class AnchorConfig:
    levels: tuple[tuple[int, int], ...] = DEFAULT_LEVELS  # (stride, base_size) pairs
    ratios: tuple[float, ...] = (1.0,)
    scales: tuple[float, ...] = (1.0, 2.0 ** (1.0 / 3.0), 2.0 ** (2.0 / 3.0))

    def __post_init__(self):
        strides = [s for s, _ in self.levels]
        if any(b <= a for a, b in zip(strides, strides[1:])):
            raise ValueError(f"strides must be strictly increasing, got {strides}")
        if any(s <= 0 for s in self.scales):
            raise ValueError(f"scales must be positive, got {self.scales}")

    @property
    def strides(self) -> np.ndarray:
        return np.array([s for s, _ in self.levels], dtype=np.float64)

    @property
    def base_sizes(self) -> np.ndarray:
        return np.array([b for _, b in self.levels], dtype=np.float64)


def generate_anchors(config: AnchorConfig, image_size: tuple[int, int]) -> np.ndarray:
    """All anchor boxes for an image: (n, 4) float64 [x0, y0, x1, y1].

    Order is level-major, then row-major over cells, then ratio, then scale
    (scale varies fastest).  Boxes are not clipped to the image.
    """
    w, h = image_size
    per_level = []
    for stride, base in config.levels:
        nx = -(-w // stride)
        ny = -(-h // stride)
        cx = (np.arange(nx, dtype=np.float64) + 0.5) * stride
        cy = (np.arange(ny, dtype=np.float64) + 0.5) * stride
        sizes = []
        for ratio in config.ratios:
            rt = np.sqrt(ratio)
            for scale in config.scales:
                sizes.append((base * scale * rt, base * scale / rt))
        sizes = np.array(sizes, dtype=np.float64)  # (A, 2)
        gx, gy = np.meshgrid(cx, cy)  # row-major: y outer, x inner
        centers = np.stack([gx.ravel(), gy.ravel()], axis=1)  # (ny*nx, 2)
        half = sizes / 2.0
        boxes = np.empty((centers.shape[0], sizes.shape[0], 4), dtype=np.float64)
        boxes[:, :, 0] = centers[:, None, 0] - half[None, :, 0]
        boxes[:, :, 1] = centers[:, None, 1] - half[None, :, 1]
        boxes[:, :, 2] = centers[:, None, 0] + half[None, :, 0]
        boxes[:, :, 3] = centers[:, None, 1] + half[None, :, 1]
        per_level.append(boxes.reshape(-1, 4))
    return np.concatenate(per_level, axis=0)


def _as_boxes(gt_boxes) -> np.ndarray:
    boxes = np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4)
    if boxes.shape[0] == 0:
        raise EmptyGroundTruthError("no ground-truth boxes")
    return boxes


def anchor_fitness(
    scales,
    gt_boxes,
    config: AnchorConfig | None = None,
    objective: str = "mean_max_iou",
) -> float:
    """Mean over GT boxes of the best IoU against the anchor set built with
    ``scales`` (anchors on a virtual grid covering every box) -- in [0, 1].

    objective="recall_at_50" instead scores the fraction of GT boxes whose
    best IoU reaches 0.5.
    """
    config = config or AnchorConfig()
    boxes = _as_boxes(gt_boxes)
    scales = np.asarray(scales, dtype=np.float64)
    ratios = np.asarray(config.ratios, dtype=np.float64)
    if objective == "mean_max_iou":
        return float(
            _kernels.mean_max_iou(boxes, config.strides, config.base_sizes, ratios, scales)
        )
    if objective == "recall_at_50":
        hits = 0
        for b in boxes:
            iou = _kernels.mean_max_iou(
                b[None, :], config.strides, config.base_sizes, ratios, scales
            )
            if iou >= 0.5:
                hits += 1
        return hits / boxes.shape[0]
    raise ValueError(f"unknown objective {objective!r}")


@dataclass(frozen=True)
class DeParams:
    population: int = 15
    mutation: tuple[float, float] = (0.5, 1.0)  # F dithered per generation
    crossover: float = 0.7
    max_generations: int = 200
    tolerance: float = 1e-4  # stop when population fitness spread falls below
    bounds: tuple[tuple[float, float], ...] = ((0.4, 3.0), (0.4, 3.0), (0.4, 3.0))

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("rand/1/bin needs a population of at least 4")
        if not 0.0 <= self.crossover <= 1.0:
            raise ValueError(f"crossover {self.crossover} outside [0, 1]")
        for lo, hi in self.bounds:
            if not lo < hi:
                raise InvalidBoundsError(f"degenerate bounds ({lo}, {hi})")


@dataclass
class DeResult:
    best: np.ndarray
    fitness: float
    generations: int
    history: list[float] = field(default_factory=list)  # best fitness per generation


def differential_evolution(
    objective,
    params: DeParams,
    rng: RandomStream,
) -> DeResult:
    """Maximize ``objective`` over params.bounds with rand/1/bin DE.

    Mutant = a + F * (b - c) over three distinct members (all distinct from
    the target), F ~ U(mutation range) per generation, binomial crossover at
    the configured rate with one forced dimension, clamp to bounds, greedy
    selection.  Stops at max_generations or when the population fitness
    spread drops below tolerance.
    """
    dim = len(params.bounds)
    lo = np.array([b[0] for b in params.bounds])
    hi = np.array([b[1] for b in params.bounds])
    npop = params.population

    pop = np.stack(
        [lo + (hi - lo) * np.array([rng.uniform() for _ in range(dim)]) for _ in range(npop)]
    )
    fit = np.array([objective(member) for member in pop])
    history: list[float] = [float(fit.max())]

    generations = 0
    f_lo, f_hi = min(params.mutation), max(params.mutation)
    for _ in range(params.max_generations):
        generations += 1
        f_scale = rng.uniform(f_lo, f_hi)
        for i in range(npop):
            others = list(range(npop))
            others.remove(i)
            picks = rng.shuffle(others)[:3]
            a, b, c = pop[picks[0]], pop[picks[1]], pop[picks[2]]
            mutant = a + f_scale * (b - c)
            forced = rng.randint(dim)
            trial = pop[i].copy()
            for d in range(dim):
                if d == forced or rng.uniform() < params.crossover:
                    trial[d] = mutant[d]
            trial = np.clip(trial, lo, hi)
            trial_fit = objective(trial)
            if trial_fit >= fit[i]:
                pop[i] = trial
                fit[i] = trial_fit
        history.append(float(fit.max()))
        if float(fit.max() - fit.min()) < params.tolerance:
            break

    best_idx = int(np.argmax(fit))
    return DeResult(pop[best_idx].copy(), float(fit[best_idx]), generations, history)


def optimize_scales(
    gt_boxes,
    config: AnchorConfig | None = None,
    params: DeParams | None = None,
    rng: RandomStream | None = None,
    objective: str = "mean_max_iou",
) -> DeResult:
    """Search anchor scales maximizing :func:`anchor_fitness`; the returned
    best member is sorted ascending."""
    config = config or AnchorConfig()
    params = params or DeParams()
    rng = rng or RandomStream(0)
    boxes = _as_boxes(gt_boxes)
    strides = config.strides
    bases = config.base_sizes
    ratios = np.asarray(config.ratios, dtype=np.float64)

    if objective == "mean_max_iou":
        def fn(scales):
            return float(_kernels.mean_max_iou(boxes, strides, bases, ratios, scales))
    else:
        def fn(scales):
            return anchor_fitness(scales, boxes, config, objective=objective)

    result = differential_evolution(fn, params, rng)
    result.best = np.sort(result.best)
    result.fitness = fn(result.best)
    return result
