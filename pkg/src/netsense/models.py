"""Desk-scale training tasks with analytic gradients.

Three tasks share one interface: a flat parameter vector of dimension D,
per-worker deterministic gradients, and global loss/accuracy evaluation.

 * ``quadratic``  - least squares 0.5 * ||A w - b||^2, rows sharded across
   workers; full local blocks, so dense synchronization reproduces exact
   gradient descent.
 * ``clusters``   - multinomial softmax on synthetic Gaussian clusters.
 * ``mlp``        - one-hidden-layer tanh network on the same cluster data.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError


class QuadraticTask:
    """Convex least-squares problem with a controlled spectrum."""

    name = "quadratic"

    def __init__(self, dimension: int, workers: int, seed: int, rows_per_dim: int = 2):
        if dimension < workers:
            raise ConfigurationError("need at least one row block per worker")
        self.dimension = dimension
        self.workers = workers
        rng = np.random.default_rng([seed, 0x9ED])
        m = rows_per_dim * dimension
        # near-isotropic design keeps the Hessian well conditioned
        self.design = rng.normal(0.0, 1.0, size=(m, dimension)) / np.sqrt(m)
        w_true = rng.normal(0.0, 1.0, size=dimension)
        self.target = self.design @ w_true
        self._row_blocks = np.array_split(np.arange(m), workers)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return np.zeros(self.dimension)

    def worker_gradient(
        self, params: np.ndarray, worker_id: int, batch_seed: int
    ) -> np.ndarray:
        rows = self._row_blocks[worker_id]
        a = self.design[rows]
        return a.T @ (a @ params - self.target[rows])

    def full_gradient(self, params: np.ndarray) -> np.ndarray:
        return self.design.T @ (self.design @ params - self.target)

    def loss(self, params: np.ndarray) -> float:
        r = self.design @ params - self.target
        return 0.5 * float(r @ r)

    def accuracy(self, params: np.ndarray) -> float:
        """Progress proxy in [0, 1]: fraction of the initial loss removed."""
        if not hasattr(self, "_loss0"):
            self._loss0 = self.loss(np.zeros(self.dimension))
        if self._loss0 <= 0:
            return 1.0
        return float(np.clip(1.0 - self.loss(params) / self._loss0, 0.0, 1.0))

    def gradient_lipschitz(self) -> float:
        """Largest Hessian eigenvalue of the full objective."""
        s = np.linalg.svd(self.design, compute_uv=False)
        return float(s[0] ** 2)


class _ClusterData:
    """Shared synthetic classification data: Gaussian blobs per class."""

    def __init__(
        self,
        features: int,
        classes: int,
        workers: int,
        seed: int,
        per_worker: int = 256,
        eval_size: int = 512,
        spread: float = 0.9,
    ):
        rng = np.random.default_rng([seed, 0xC1])
        self.features = features
        self.classes = classes
        self.means = rng.normal(0.0, 1.0, size=(classes, features)) * 2.0

        def draw(n, gen):
            labels = gen.integers(0, classes, size=n)
            x = self.means[labels] + gen.normal(0.0, spread, size=(n, features))
            return x, labels

        self.shards = []
        for w in range(workers):
            gen = np.random.default_rng([seed, 0xC1, w])
            self.shards.append(draw(per_worker, gen))
        eval_gen = np.random.default_rng([seed, 0xC1, 0xEEE])
        self.eval_x, self.eval_y = draw(eval_size, eval_gen)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class ClusterSoftmaxTask:
    """Linear softmax classifier; parameters are the flattened weight matrix."""

    name = "clusters"

    def __init__(
        self,
        dimension: int,
        workers: int,
        seed: int,
        classes: int = 8,
        batch_size: int = 32,
    ):
        if dimension % classes:
            raise ConfigurationError("dimension must be divisible by the class count")
        self.dimension = dimension
        self.classes = classes
        self.features = dimension // classes
        self.batch_size = batch_size
        self.data = _ClusterData(self.features, classes, workers, seed)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        return rng.normal(0.0, 0.01, size=self.dimension)

    def _unpack(self, params: np.ndarray) -> np.ndarray:
        return params.reshape(self.classes, self.features)

    def _batch(self, worker_id: int, batch_seed: int):
        x, y = self.data.shards[worker_id]
        gen = np.random.default_rng([batch_seed, worker_id])
        pick = gen.integers(0, x.shape[0], size=self.batch_size)
        return x[pick], y[pick]

    def worker_gradient(
        self, params: np.ndarray, worker_id: int, batch_seed: int
    ) -> np.ndarray:
        x, y = self._batch(worker_id, batch_seed)
        w = self._unpack(params)
        probs = _softmax(x @ w.T)
        probs[np.arange(x.shape[0]), y] -= 1.0
        grad = probs.T @ x / x.shape[0]
        return grad.reshape(-1)

    def loss(self, params: np.ndarray) -> float:
        w = self._unpack(params)
        probs = _softmax(self.data.eval_x @ w.T)
        picked = probs[np.arange(self.data.eval_y.shape[0]), self.data.eval_y]
        return float(-np.log(np.clip(picked, 1e-12, None)).mean())

    def accuracy(self, params: np.ndarray) -> float:
        w = self._unpack(params)
        pred = np.argmax(self.data.eval_x @ w.T, axis=1)
        return float((pred == self.data.eval_y).mean())


class MlpClassifierTask:
    """One-hidden-layer tanh classifier on the cluster data.

    Parameter layout: [W1 (H x F), b1 (H), W2 (C x H), b2 (C)], flattened.
    """

    name = "mlp"

    def __init__(
        self,
        workers: int,
        seed: int,
        features: int = 16,
        hidden: int = 24,
        classes: int = 6,
        batch_size: int = 32,
    ):
        self.features = features
        self.hidden = hidden
        self.classes = classes
        self.batch_size = batch_size
        self.dimension = hidden * features + hidden + classes * hidden + classes
        self.data = _ClusterData(features, classes, workers, seed)

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        w1 = rng.normal(0.0, 1.0 / np.sqrt(self.features), size=(self.hidden, self.features))
        w2 = rng.normal(0.0, 1.0 / np.sqrt(self.hidden), size=(self.classes, self.hidden))
        return np.concatenate(
            [w1.ravel(), np.zeros(self.hidden), w2.ravel(), np.zeros(self.classes)]
        )

    def _unpack(self, params: np.ndarray):
        f, h, c = self.features, self.hidden, self.classes
        i = 0
        w1 = params[i : i + h * f].reshape(h, f); i += h * f
        b1 = params[i : i + h]; i += h
        w2 = params[i : i + c * h].reshape(c, h); i += c * h
        b2 = params[i : i + c]
        return w1, b1, w2, b2

    def _forward(self, params: np.ndarray, x: np.ndarray):
        w1, b1, w2, b2 = self._unpack(params)
        hidden = np.tanh(x @ w1.T + b1)
        return _softmax(hidden @ w2.T + b2), hidden

    def _batch(self, worker_id: int, batch_seed: int):
        x, y = self.data.shards[worker_id]
        gen = np.random.default_rng([batch_seed, worker_id])
        pick = gen.integers(0, x.shape[0], size=self.batch_size)
        return x[pick], y[pick]

    def batch_loss(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> float:
        probs, _ = self._forward(params, x)
        picked = probs[np.arange(y.shape[0]), y]
        return float(-np.log(np.clip(picked, 1e-12, None)).mean())

    def batch_gradient(self, params: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        w1, b1, w2, b2 = self._unpack(params)
        n = x.shape[0]
        probs, hidden = self._forward(params, x)
        dlogits = probs.copy()
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
        dw2 = dlogits.T @ hidden
        db2 = dlogits.sum(axis=0)
        dhidden = (dlogits @ w2) * (1.0 - hidden**2)
        dw1 = dhidden.T @ x
        db1 = dhidden.sum(axis=0)
        return np.concatenate([dw1.ravel(), db1, dw2.ravel(), db2])

    def worker_gradient(
        self, params: np.ndarray, worker_id: int, batch_seed: int
    ) -> np.ndarray:
        x, y = self._batch(worker_id, batch_seed)
        return self.batch_gradient(params, x, y)

    def loss(self, params: np.ndarray) -> float:
        return self.batch_loss(params, self.data.eval_x, self.data.eval_y)

    def accuracy(self, params: np.ndarray) -> float:
        probs, _ = self._forward(params, self.data.eval_x)
        pred = np.argmax(probs, axis=1)
        return float((pred == self.data.eval_y).mean())


def make_task(
    task: str,
    dimension: int,
    workers: int,
    seed: int,
    batch_size: int = 32,
):
    if task == "quadratic":
        return QuadraticTask(dimension, workers, seed)
    if task == "clusters":
        return ClusterSoftmaxTask(dimension, workers, seed, batch_size=batch_size)
    if task == "mlp":
        return MlpClassifierTask(workers, seed, batch_size=batch_size)
    raise ConfigurationError(f"unknown task {task!r}")
