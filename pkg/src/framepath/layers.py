"""Trainable layers on top of the tape: parameter store, embeddings,
linear maps, layer norm, and a bidirectional LSTM.

Every parameter lives in a ParamStore under a unique path.  The store is
the single source of truth for optimization (which tensors train, which
decay), for checkpoints (path -> values), and for gradient checking.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class ParamEntry:
    tensor: Tensor
    decay: bool          # participates in decoupled weight decay
    group: str | None    # squared-norm penalty group, if any


class ParamStore:
    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._entries: dict[str, ParamEntry] = {}

    def add(self, path: str, values: np.ndarray, *, decay: bool = True,
            group: str | None = None) -> Tensor:
        if path in self._entries:
            raise ValueError(f"duplicate parameter path {path!r}")
        t = ad.param(np.asarray(values, dtype=np.float64), name=path)
        self._entries[path] = ParamEntry(t, decay, group)
        return t

    # initializer shorthands ------------------------------------------------

    def glorot(self, path: str, fan_in: int, fan_out: int, *,
               shape: tuple[int, ...] | None = None, decay: bool = True,
               group: str | None = None) -> Tensor:
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        values = self.rng.uniform(-limit, limit, shape or (fan_in, fan_out))
        return self.add(path, values, decay=decay, group=group)

    def zeros(self, path: str, shape, *, decay: bool = False,
              group: str | None = None) -> Tensor:
        return self.add(path, np.zeros(shape), decay=decay, group=group)

    def embedding(self, path: str, n: int, dim: int) -> Tensor:
        values = self.rng.normal(0.0, 1.0 / np.sqrt(dim), (n, dim))
        return self.add(path, values, decay=False)

    # access ----------------------------------------------------------------

    def __contains__(self, path: str) -> bool:
        return path in self._entries

    def __getitem__(self, path: str) -> Tensor:
        return self._entries[path].tensor

    def paths(self) -> list[str]:
        return list(self._entries)

    def entries(self) -> Iterable[tuple[str, ParamEntry]]:
        return self._entries.items()

    def tensors(self, prefixes: Sequence[str] | None = None) -> list[Tensor]:
        """All parameters, or those whose path starts with a given prefix."""
        if prefixes is None:
            return [e.tensor for e in self._entries.values()]
        return [e.tensor for path, e in self._entries.items()
                if any(path.startswith(p) for p in prefixes)]

    def group(self, name: str) -> list[Tensor]:
        return [e.tensor for e in self._entries.values() if e.group == name]

    def n_values(self) -> int:
        return sum(e.tensor.data.size for e in self._entries.values())

    # checkpoint state ------------------------------------------------------

    def state(self) -> dict:
        return {
            path: {"shape": list(e.tensor.data.shape),
                   "values": e.tensor.data.reshape(-1).tolist()}
            for path, e in self._entries.items()
        }

    def load_state(self, state: dict) -> None:
        missing = set(self._entries) - set(state)
        extra = set(state) - set(self._entries)
        if missing or extra:
            raise ValueError(
                f"parameter mismatch: missing {sorted(missing)}, "
                f"unexpected {sorted(extra)}"
            )
        for path, entry in self._entries.items():
            rec = state[path]
            shape = tuple(rec["shape"])
            if shape != entry.tensor.data.shape:
                raise ValueError(
                    f"{path}: shape {shape} does not match "
                    f"{entry.tensor.data.shape}"
                )
            entry.tensor.data = np.array(rec["values"],
                                         dtype=np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# layers

class Embedding:
    def __init__(self, store: ParamStore, path: str, n: int, dim: int):
        self.table = store.embedding(path, n, dim)
        self.dim = dim

    def __call__(self, ids: Sequence[int]) -> Tensor:
        return ad.row_select(self.table, ids)


class Linear:
    """y = x W + b with W stored (in_dim, out_dim); works on vectors and
    row-batched matrices."""

    def __init__(self, store: ParamStore, path: str, in_dim: int, out_dim: int,
                 *, bias: bool = True, group: str | None = None):
        self.w = store.glorot(f"{path}.w", in_dim, out_dim, group=group)
        self.b = store.zeros(f"{path}.b", (out_dim,)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        if x.data.ndim == 1:
            y = ad.vecmat(x, self.w)
            return ad.add(y, self.b) if self.b is not None else y
        y = ad.matmul(x, self.w)
        return ad.add_rowvec(y, self.b) if self.b is not None else y


class LayerNorm:
    def __init__(self, store: ParamStore, path: str, dim: int):
        self.gain = store.add(f"{path}.gain", np.ones(dim), decay=False)
        self.bias = store.zeros(f"{path}.bias", (dim,))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self.bias)


def reverse_rows(x: Tensor) -> Tensor:
    n = x.data.shape[0]
    return ad.row_select(x, list(range(n - 1, -1, -1)))


class LstmDirection:
    """One left-to-right LSTM pass with packed gates [i, f, g, o].

    The input projection for the whole sequence is a single matmul; the
    recurrence then works on one row per step.  The forget-gate bias
    starts at +1 so early training does not erase the cell state.
    """

    def __init__(self, store: ParamStore, path: str, in_dim: int, hidden: int):
        self.hidden = hidden
        self.wx = store.glorot(f"{path}.wx", in_dim, 4 * hidden)
        self.wh = store.glorot(f"{path}.wh", hidden, 4 * hidden)
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.0
        self.b = store.add(f"{path}.b", b, decay=False)

    def __call__(self, x: Tensor) -> Tensor:
        xw = ad.matmul(x, self.wx)
        return ad.lstm_sequence(xw, self.wh, self.b)


class BiLstm:
    """Stacked bidirectional LSTM; output width is 2 * hidden."""

    def __init__(self, store: ParamStore, path: str, in_dim: int, hidden: int,
                 layers: int = 1):
        if layers < 1:
            raise ValueError("need at least one layer")
        self.layers = []
        width = in_dim
        for k in range(layers):
            fwd = LstmDirection(store, f"{path}.l{k}.fwd", width, hidden)
            bwd = LstmDirection(store, f"{path}.l{k}.bwd", width, hidden)
            self.layers.append((fwd, bwd))
            width = 2 * hidden
        self.out_dim = width

    def __call__(self, x: Tensor) -> Tensor:
        out = x
        for fwd, bwd in self.layers:
            left = fwd(out)
            right = reverse_rows(bwd(reverse_rows(out)))
            out = ad.concat_cols([left, right])
        return out
