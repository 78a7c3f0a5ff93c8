"""Greedy layer-wise training of a dictionary stack.

The stack synthesizes data as ``X = D1 @ D2 @ ... @ DL @ ZL``. Layer ``k`` is
trained on the codes of layer ``k - 1``; by default every layer is dense
except the last, which is sparse.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from deepdict.exceptions import DimensionError
from deepdict.shallow import (
    LayerTrainConfig,
    ista_sparse_code,
    objective,
    solve_coefficients_dense,
    train_layer_dense,
    train_layer_sparse,
)

logger = logging.getLogger(__name__)

DENSE = "dense"
SPARSE = "sparse"
KINDS = (DENSE, SPARSE)


@dataclass(frozen=True, eq=False)
class Layer:
    dictionary: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        D = np.array(self.dictionary, dtype=np.float64)
        if D.ndim != 2:
            raise DimensionError(f"dictionary must be 2-D, got shape {D.shape}")
        D.flags.writeable = False
        object.__setattr__(self, "dictionary", D)

    @property
    def shape(self) -> tuple[int, int]:
        return self.dictionary.shape


@dataclass(frozen=True, eq=False)
class DeepDictModel:
    """A frozen stack of dictionaries.

    ``lam``, ``ista_iters`` and ``step_safety`` are the sparse-coding
    settings used at training time; :func:`encode` reuses them.
    """

    layers: tuple[Layer, ...]
    lam: float = 0.1
    ista_iters: int = 50
    step_safety: float = 1.01
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise DimensionError("a model needs at least one layer")
        for i in range(len(layers) - 1):
            if layers[i].shape[1] != layers[i + 1].shape[0]:
                raise DimensionError(
                    f"layer {i} has {layers[i].shape[1]} atoms but layer {i + 1} "
                    f"expects inputs of dimension {layers[i + 1].shape[0]}"
                )

    @classmethod
    def from_dictionaries(cls, dictionaries: Sequence, kinds: Sequence[str] | None = None,
                          **kwargs) -> "DeepDictModel":
        if kinds is None:
            kinds = default_kinds(len(dictionaries))
        if len(kinds) != len(dictionaries):
            raise DimensionError(f"{len(kinds)} kinds for {len(dictionaries)} layers")
        return cls(tuple(Layer(D, k) for D, k in zip(dictionaries, kinds)), **kwargs)

    @property
    def input_dim(self) -> int:
        return self.layers[0].shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].shape[1]

    @property
    def kinds(self) -> list[str]:
        return [layer.kind for layer in self.layers]

    @property
    def dictionaries(self) -> list[np.ndarray]:
        return [layer.dictionary for layer in self.layers]

    @property
    def layer_sizes(self) -> list[int]:
        return [layer.shape[1] for layer in self.layers]


def default_kinds(n_layers: int) -> list[str]:
    """Dense up to the penultimate layer, sparse for the last one."""
    return [DENSE] * (n_layers - 1) + [SPARSE]


@dataclass(frozen=True)
class DeepTrainConfig:
    """Layer widths plus shared per-layer settings.

    ``overrides`` maps a layer index to keyword overrides of
    :class:`LayerTrainConfig` for that layer (``n_atoms`` always comes from
    ``layer_sizes``). ``kinds`` defaults to :func:`default_kinds`.
    """

    layer_sizes: tuple[int, ...]
    outer_iters_dense: int = 10
    outer_iters_sparse: int = 15
    ista_iters: int = 50
    lam: float = 0.1
    rel_tol: float = 1e-4
    step_safety: float = 1.01
    kinds: tuple[str, ...] | None = None
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if not sizes:
            raise ValueError("layer_sizes must not be empty")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if self.kinds is not None:
            kinds = tuple(self.kinds)
            object.__setattr__(self, "kinds", kinds)
            if len(kinds) != len(sizes):
                raise ValueError(f"{len(kinds)} kinds for {len(sizes)} layers")
            for k in kinds:
                if k not in KINDS:
                    raise ValueError(f"unknown layer kind {k!r}")

    def layer_kinds(self) -> list[str]:
        return list(self.kinds) if self.kinds is not None else default_kinds(len(self.layer_sizes))

    def layer_config(self, i: int) -> LayerTrainConfig:
        kind = self.layer_kinds()[i]
        params = dict(
            n_atoms=self.layer_sizes[i],
            outer_iters=self.outer_iters_sparse if kind == SPARSE else self.outer_iters_dense,
            ista_iters=self.ista_iters,
            lam=self.lam,
            rel_tol=self.rel_tol,
            step_safety=self.step_safety,
        )
        params.update(self.overrides.get(i, {}))
        params["n_atoms"] = self.layer_sizes[i]
        return LayerTrainConfig(**params)

    def echo(self) -> dict:
        return {
            "layer_sizes": list(self.layer_sizes),
            "kinds": self.layer_kinds(),
            "outer_iters_dense": self.outer_iters_dense,
            "outer_iters_sparse": self.outer_iters_sparse,
            "ista_iters": self.ista_iters,
            "lam": self.lam,
            "rel_tol": self.rel_tol,
            "step_safety": self.step_safety,
        }


CHAIN_HINT = (
    "each layer must have at most as many atoms as its input dimension "
    "(the QR initialization cannot produce more orthonormal atoms than that). "
    "A chain such as 300-15-50 widens after a narrow layer; "
    "300-150-50 is the usual reading"
)


def check_chain(input_dim: int, n_samples: int, layer_sizes: Sequence[int]) -> None:
    """Raise :class:`DimensionError` if ``layer_sizes`` cannot be trained."""
    prev = input_dim
    for i, size in enumerate(layer_sizes):
        limit = min(prev, n_samples)
        if size > limit:
            raise DimensionError(
                f"layer {i} asks for {size} atoms but at most {limit} are possible "
                f"(input dimension {prev}, {n_samples} samples); {CHAIN_HINT}"
            )
        prev = size


def train_deep(X, cfg: DeepTrainConfig, report: list | None = None):
    """Greedily train a dictionary stack on ``X``.

    Returns ``(model, Z)`` where ``Z`` are the last-layer training codes.
    If ``report`` is a list, one dict per layer with its final objective is
    appended.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError(f"X must be 2-D, got shape {X.shape}")
    check_chain(X.shape[0], X.shape[1], cfg.layer_sizes)

    kinds = cfg.layer_kinds()
    current = X
    dictionaries = []
    for i, kind in enumerate(kinds):
        lcfg = cfg.layer_config(i)
        if kind == DENSE:
            D, Z = train_layer_dense(current, lcfg)
            obj = objective(D, Z, current)
        else:
            D, Z = train_layer_sparse(current, lcfg)
            obj = objective(D, Z, current, lcfg.lam)
        logger.info("layer %d (%s, %d atoms): objective %.6e", i, kind, lcfg.n_atoms, obj)
        if report is not None:
            report.append({"layer": i, "kind": kind, "n_atoms": lcfg.n_atoms,
                           "objective": obj})
        dictionaries.append(D)
        current = Z

    last = cfg.layer_config(len(kinds) - 1)
    model = DeepDictModel.from_dictionaries(
        dictionaries, kinds,
        lam=last.lam, ista_iters=last.ista_iters, step_safety=last.step_safety,
        config=cfg.echo(),
    )
    return model, current


def encode(model: DeepDictModel, X) -> np.ndarray:
    """Code new samples through the frozen stack.

    Dense layers use least squares, the sparse layer uses ISTA from zero
    with the model's stored ``lam`` and ``ista_iters``.
    """
    Z = np.asarray(X, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != model.input_dim:
        raise DimensionError(
            f"data has shape {Z.shape} but the model expects {model.input_dim} rows"
        )
    for layer in model.layers:
        if layer.kind == DENSE:
            Z = solve_coefficients_dense(layer.dictionary, Z)
        else:
            Z = ista_sparse_code(layer.dictionary, Z, model.lam, model.ista_iters,
                                 safety=model.step_safety)
    return Z


def reconstruct(model: DeepDictModel, Z) -> np.ndarray:
    """Synthesize ``D1 @ ... @ DL @ Z``."""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] != model.output_dim:
        raise DimensionError(
            f"codes have shape {Z.shape} but the last layer has {model.output_dim} atoms"
        )
    for D in reversed(model.dictionaries):
        Z = D @ Z
    return Z


def collapse_check(model: DeepDictModel, X) -> float:
    """Relative gap between stacked coding and coding against the product.

    Returns ``||Z_deep - Z_flat||_F / ||Z_deep||_F`` where ``Z_deep`` is
    :func:`encode` through the stack and ``Z_flat`` codes ``X`` against the
    single dictionary ``D1 @ ... @ DL`` (with the kind of the last layer).
    """
    Z_deep = encode(model, X)
    if len(model.layers) == 1:
        return 0.0
    product = model.dictionaries[0]
    for D in model.dictionaries[1:]:
        product = product @ D
    flat = DeepDictModel.from_dictionaries(
        [product], [model.kinds[-1]],
        lam=model.lam, ista_iters=model.ista_iters, step_safety=model.step_safety,
    )
    Z_flat = encode(flat, X)
    denom = np.linalg.norm(Z_deep)
    if denom == 0.0:
        return 0.0 if not np.any(Z_flat) else float("inf")
    return float(np.linalg.norm(Z_deep - Z_flat) / denom)
