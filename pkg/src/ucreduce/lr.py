"""Per-target L2-regularized logistic regression on normalized nodal demand.

One binary classifier is trained for every (generator, period) pair. The
objective for a target with labels ``y`` in {0, 1} (mapped to +-1) is

    0.5 * w.w + C * sum_i log(1 + exp(-y_i * (x_i.w + c)))

with the intercept ``c`` left unpenalized. It is minimized by cyclic
coordinate descent: each coordinate takes an exact one-dimensional Newton
step, halved until a sufficient-decrease test passes. The sweep kernel
is compiled with numba.
"""
from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import DimensionMismatch, NonFinite, ShapeMismatch

DEFAULT_GRID = tuple(round(0.20 + 0.05 * k, 2) for k in range(13))


@dataclass(frozen=True)
class LrConfig:
    C: float = 1.0
    tol: float = 1e-6
    max_iter: int = 1000
    seed: int = 0
    grid: tuple = DEFAULT_GRID

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be > 0")
        if not self.grid or any(not 0.0 <= g <= 1.0 for g in self.grid):
            raise ValueError("threshold grid must be non-empty and within [0, 1]")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))


@dataclass(frozen=True)
class FeatureScaler:
    min: np.ndarray
    max: np.ndarray

    @classmethod
    def fit(cls, demands) -> "FeatureScaler":
        X = np.array([_flatten(d) for d in demands])
        return cls(X.min(axis=0), X.max(axis=0))

    def transform(self, demands) -> np.ndarray:
        X = np.array([_flatten(d) for d in demands], dtype=float)
        if X.ndim != 2 or X.shape[1] != self.min.size:
            raise DimensionMismatch(
                f"expected {self.min.size} features, got shape {X.shape}")
        span = self.max - self.min
        out = np.zeros_like(X)
        ok = span > 0
        out[:, ok] = (X[:, ok] - self.min[ok]) / span[ok]
        return out


def _flatten(demand) -> np.ndarray:
    values = getattr(demand, "values", demand)
    return np.asarray(values, dtype=float).ravel()  # bus-major, period-minor


def featurize(demand, scaler: FeatureScaler) -> np.ndarray:
    return scaler.transform([demand])[0]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@njit(cache=True)
def _log1pexp(a):
    # log(1 + exp(a)) without overflow
    if a > 0.0:
        return a + np.log1p(np.exp(-a))
    return np.log1p(np.exp(a))


@njit(cache=True)
def _sig(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@njit(cache=True)
def _line_search(z, col, d, grad, coef, C, penal):
    """Halve a Newton step until it satisfies the sufficient-decrease test."""
    m = z.size
    base = 0.0
    for i in range(m):
        base += _log1pexp(-z[i])
    for _ in range(40):
        acc = 0.0
        for i in range(m):
            acc += _log1pexp(-(z[i] + d * col[i]))
        change = C * (acc - base)
        if penal:
            change += 0.5 * ((coef + d) ** 2 - coef ** 2)
        if change <= 1e-2 * d * grad:
            return d, change
        d *= 0.5
    return 0.0, 0.0


@njit(cache=True)
def _cd_solve(X, s, C, tol, max_iter):
    m, D = X.shape
    Xs = np.empty((D, m))  # row j holds s_i * x_ij
    sq = np.empty((D, m))
    live = np.zeros(D, dtype=np.bool_)
    for j in range(D):
        for i in range(m):
            Xs[j, i] = s[i] * X[i, j]
            sq[j, i] = X[i, j] * X[i, j]
            if X[i, j] != 0.0:
                live[j] = True
    w = np.zeros(D)
    c = 0.0
    z = np.zeros(m)
    p = np.empty(m)
    loss = C * m * np.log(2.0)
    history = np.empty(max_iter + 1)
    history[0] = loss
    n_iter = 0
    for it in range(1, max_iter + 1):
        n_iter = it
        for j in range(D):
            if not live[j]:
                continue
            g = w[j]
            h = 1.0
            for i in range(m):
                pi = _sig(-z[i])
                g -= C * Xs[j, i] * pi
                h += C * sq[j, i] * pi * (1.0 - pi)
            if g == 0.0:
                continue
            d, change = _line_search(z, Xs[j], -g / h, g, w[j], C, True)
            if d != 0.0:
                for i in range(m):
                    z[i] += d * Xs[j, i]
                w[j] += d
                loss += change
        gc = 0.0
        hc = 1e-12
        for i in range(m):
            pi = _sig(-z[i])
            gc -= C * s[i] * pi
            hc += C * pi * (1.0 - pi)
        if gc != 0.0:
            d, change = _line_search(z, s, -gc / hc, gc, c, C, False)
            if d != 0.0:
                for i in range(m):
                    z[i] += d * s[i]
                c += d
                loss += change
        history[it] = loss
        if not np.isfinite(loss):
            break
        # full gradient for the stopping test
        for i in range(m):
            p[i] = _sig(-z[i])
        gmax = 0.0
        acc = 0.0
        for i in range(m):
            acc -= C * s[i] * p[i]
        gmax = abs(acc)
        for j in range(D):
            gj = w[j]
            for i in range(m):
                gj -= C * Xs[j, i] * p[i]
            if abs(gj) > gmax:
                gmax = abs(gj)
        if gmax <= tol:
            break
    return w, c, n_iter, history[: n_iter + 1].copy()


def logistic_loss(w, c, X, y, C) -> float:
    """Regularized objective; ``y`` holds labels in {0, 1}."""
    s = 2.0 * np.asarray(y, dtype=float) - 1.0
    z = s * (X @ w + c)
    return float(0.5 * w @ w + C * np.sum(np.logaddexp(0.0, -z)))


def logistic_grad(w, c, X, y, C):
    """Gradient of :func:`logistic_loss` as ``(grad_w, grad_c)``."""
    s = 2.0 * np.asarray(y, dtype=float) - 1.0
    z = s * (X @ w + c)
    q = -s * _sigmoid(-z)
    return w + C * (X.T @ q), float(C * q.sum())


@dataclass
class LrTargetModel:
    weights: np.ndarray
    intercept: float
    C: float
    constant_class: Optional[int] = None
    n_iter: int = 0
    loss_history: list = field(default_factory=list, repr=False)

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.constant_class is not None:
            return np.full(X.shape[0], float(self.constant_class))
        return _sigmoid(X @ self.weights + self.intercept)


def train_target(X, y, C: float = 1.0, tol: float = 1e-6, max_iter: int = 1000) -> LrTargetModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    m, D = X.shape
    if m < 1 or y.shape != (m,):
        raise ShapeMismatch(f"labels shape {y.shape} does not match {m} rows")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0/1")
    if np.all(y == y[0]):
        return LrTargetModel(np.zeros(D), 0.0, C, constant_class=int(y[0]))

    s = 2.0 * y.astype(float) - 1.0
    w, c, n_iter, history = _cd_solve(np.ascontiguousarray(X), s, float(C), float(tol), int(max_iter))
    if not (np.isfinite(c) and np.all(np.isfinite(w)) and np.all(np.isfinite(history))):
        raise NonFinite("logistic loss diverged; check C and feature scaling")
    history = [float(v) for v in history]
    return LrTargetModel(w, float(c), C, None, n_iter, history)


@dataclass
class PredictionSet:
    probabilities: np.ndarray
    classified: np.ndarray


def classify(probabilities, threshold: float) -> np.ndarray:
    return (np.asarray(probabilities) >= threshold).astype(np.int8)


@dataclass
class LrEnsemble:
    models: list  # models[g][t]
    scaler: FeatureScaler
    threshold: float
    config: LrConfig
    system_hash: str = ""
    training_time: float = 0.0

    @property
    def shape(self):
        return len(self.models), len(self.models[0])

    def predict_proba(self, demands) -> np.ndarray:
        """Probabilities of shape (m, N_g, N_t)."""
        X = self.scaler.transform(demands)
        G, T = self.shape
        out = np.empty((X.shape[0], G, T))
        for g in range(G):
            for t in range(T):
                out[:, g, t] = self.models[g][t].predict_proba(X)
        return out

    def predict(self, demand, threshold: Optional[float] = None) -> PredictionSet:
        probs = self.predict_proba([demand])[0]
        th = self.threshold if threshold is None else threshold
        return PredictionSet(probs, classify(probs, th))

    def with_threshold(self, threshold: float) -> "LrEnsemble":
        return LrEnsemble(self.models, self.scaler, float(threshold), self.config,
                          self.system_hash, self.training_time)


def train_ensemble(samples: Sequence, config: LrConfig = LrConfig(), system_hash: str = "",
                   threshold: float = 0.5) -> LrEnsemble:
    """Fit the scaler and one classifier per (g, t) on the training samples."""
    samples = list(samples)
    if not samples:
        raise ValueError("no training samples")
    start = time.perf_counter()
    scaler = FeatureScaler.fit([s.demand for s in samples])
    X = scaler.transform([s.demand for s in samples])
    U = np.array([s.commitment for s in samples])
    _, G, T = U.shape
    models = []
    for g in range(G):
        row = []
        for t in range(T):
            try:
                row.append(train_target(X, U[:, g, t], config.C, config.tol, config.max_iter))
            except NonFinite as exc:
                raise NonFinite(f"target (g={g}, t={t}): {exc}") from exc
        models.append(row)
    elapsed = time.perf_counter() - start
    return LrEnsemble(models, scaler, float(threshold), config, system_hash, elapsed)


def accuracy(predicted, truth) -> float:
    """One minus the mean absolute disagreement over samples, generators and periods."""
    P = np.asarray(predicted, dtype=float)
    U = np.asarray(truth, dtype=float)
    if P.shape != U.shape:
        raise ShapeMismatch(f"prediction shape {P.shape} != truth shape {U.shape}")
    if P.ndim == 2:
        P, U = P[None], U[None]
    if P.ndim != 3 or P.shape[0] < 1:
        raise ShapeMismatch("expected (m, N_g, N_t) arrays with m >= 1")
    return float(1.0 - np.abs(U - P).sum() / P.size)


def threshold_accuracies(ensemble: LrEnsemble, samples, grid) -> dict:
    probs = ensemble.predict_proba([s.demand for s in samples])
    truth = np.array([s.commitment for s in samples])
    return {float(th): accuracy(classify(probs, th), truth) for th in grid}


def tune_threshold(ensemble: LrEnsemble, samples, grid=None) -> float:
    """Grid value with the best accuracy on ``samples``; ties go to the larger threshold."""
    grid = ensemble.config.grid if grid is None else grid
    if not len(grid):
        raise ValueError("threshold grid is empty")
    scores = threshold_accuracies(ensemble, samples, grid)
    return max(scores, key=lambda th: (scores[th], th))


def ensemble_to_dict(ensemble: LrEnsemble) -> dict:
    cfg = asdict(ensemble.config)
    cfg["grid"] = list(cfg["grid"])
    return {
        "system_hash": ensemble.system_hash,
        "threshold": float(ensemble.threshold),
        "config": cfg,
        "scaler": {"min": [float(v) for v in ensemble.scaler.min],
                   "max": [float(v) for v in ensemble.scaler.max]},
        "models": [
            [{"w": [float(v) for v in m.weights], "c": float(m.intercept),
              "constant_class": m.constant_class} for m in row]
            for row in ensemble.models
        ],
    }


def ensemble_from_dict(doc: dict) -> LrEnsemble:
    cfg = dict(doc["config"])
    cfg["grid"] = tuple(cfg["grid"])
    config = LrConfig(**cfg)
    scaler = FeatureScaler(np.array(doc["scaler"]["min"], dtype=float),
                           np.array(doc["scaler"]["max"], dtype=float))
    models = [
        [LrTargetModel(np.array(m["w"], dtype=float), float(m["c"]), config.C,
                       None if m["constant_class"] is None else int(m["constant_class"]))
         for m in row]
        for row in doc["models"]
    ]
    return LrEnsemble(models, scaler, float(doc["threshold"]), config, doc.get("system_hash", ""))


def save_ensemble(ensemble: LrEnsemble, path) -> None:
    Path(path).write_text(json.dumps(ensemble_to_dict(ensemble)) + "\n")


def load_ensemble(path) -> LrEnsemble:
    return ensemble_from_dict(json.loads(Path(path).read_text()))
