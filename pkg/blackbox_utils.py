"""
Black Box Utilities Module
Handles the trainable MLP black box, analytic stand-in models and the model file format
"""
import json
import os
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from config_utils import TrainConfig, ensure_valid, validate_train_config
from domain_types import Dataset, provenance
from error_utils import DataFormatError, DimensionError, TrainingDivergedError

MODEL_FORMAT = 'surrogate-lab-mlp'
MODEL_FORMAT_VERSION = 1


def _as_batch(x) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return arr.reshape(1, -1), True
    return arr, False


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.flags.writeable = False
    return out


class FunctionModel:
    """
    Black box defined by a vectorised score function.

    predict_proba returns the function's values unchanged, so analytic games
    (e.g. a linear score a.x + b) can be explained exactly.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], n_features: int):
        self.fn = fn
        self.n_features = n_features

    def predict_proba(self, x):
        batch, single = _as_batch(x)
        if batch.shape[1] != self.n_features:
            raise DimensionError(f'Model expects {self.n_features} features, got {batch.shape[1]}')
        probas = np.asarray(self.fn(batch), dtype=float).reshape(-1)
        return float(probas[0]) if single else probas

    def predict_label(self, x):
        probas = self.predict_proba(x)
        if np.isscalar(probas):
            return int(probas >= 0.5)
        return (probas >= 0.5).astype(int)


@dataclass(frozen=True)
class MlpModel:
    """d -> h -> 1 network: tanh hidden layer, logistic output, standardised inputs"""
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    input_mean: np.ndarray
    input_scale: np.ndarray
    initial_loss: Optional[float] = None
    final_loss: Optional[float] = None

    def __post_init__(self):
        for name in ('w1', 'b1', 'w2', 'input_mean', 'input_scale'):
            object.__setattr__(self, name, _readonly(getattr(self, name)))
        d, h = self.w1.shape
        if self.b1.shape != (h,) or self.w2.shape != (h,):
            raise DimensionError(f'Inconsistent MLP shapes: w1 {self.w1.shape}, b1 {self.b1.shape}, w2 {self.w2.shape}')
        if self.input_mean.shape != (d,) or self.input_scale.shape != (d,):
            raise DimensionError('Input standardisation does not match the input layer')
        params = (self.w1, self.b1, self.w2, np.array([self.b2]), self.input_mean, self.input_scale)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise DataFormatError('MLP parameters must be finite')

    @property
    def n_features(self) -> int:
        return self.w1.shape[0]

    @property
    def layer_sizes(self) -> Tuple[int, int, int]:
        return (self.w1.shape[0], self.w1.shape[1], 1)

    @classmethod
    def random(cls, d: int, hidden: int, seed: int, scale: float = 1.0) -> 'MlpModel':
        """Untrained network with Gaussian parameters (used for property tests)"""
        rng = np.random.default_rng(seed)
        return cls(w1=rng.normal(0.0, scale, size=(d, hidden)),
                   b1=rng.normal(0.0, scale, size=hidden),
                   w2=rng.normal(0.0, scale, size=hidden),
                   b2=float(rng.normal(0.0, scale)),
                   input_mean=np.zeros(d), input_scale=np.ones(d))

    def logits(self, batch: np.ndarray) -> np.ndarray:
        if batch.shape[1] != self.n_features:
            raise DimensionError(f'Model expects {self.n_features} features, got {batch.shape[1]}')
        standardised = (batch - self.input_mean) / self.input_scale
        hidden = np.tanh(standardised @ self.w1 + self.b1)
        return hidden @ self.w2 + self.b2

    def predict_proba(self, x):
        batch, single = _as_batch(x)
        probas = expit(self.logits(batch))
        return float(probas[0]) if single else probas

    def predict_label(self, x):
        probas = self.predict_proba(x)
        if np.isscalar(probas):
            return int(probas >= 0.5)
        return (probas >= 0.5).astype(int)


def loss_and_gradients(model: MlpModel, x: np.ndarray, y: np.ndarray) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    Mean binary cross-entropy and its gradients with respect to w1, b1, w2, b2.

    Args:
        model: MlpModel
        x: n x d inputs
        y: n labels in {0, 1}

    Returns:
        Tuple of (loss, gradients dict)
    """
    n = x.shape[0]
    standardised = (x - model.input_mean) / model.input_scale
    hidden = np.tanh(standardised @ model.w1 + model.b1)
    logits = hidden @ model.w2 + model.b2
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))

    g_logits = (expit(logits) - y) / n
    g_hidden = np.outer(g_logits, model.w2) * (1.0 - hidden ** 2)
    grads = {
        'w1': standardised.T @ g_hidden,
        'b1': g_hidden.sum(axis=0),
        'w2': hidden.T @ g_logits,
        'b2': np.array(g_logits.sum()),
    }
    return loss, grads


def train_mlp(data: Dataset, hidden: int, epochs: int, learning_rate: float, seed: int) -> MlpModel:
    """
    Full-batch gradient descent on mean binary cross-entropy.

    Args:
        data: Labelled binary Dataset
        hidden: Hidden layer width
        epochs: Number of full-batch steps
        learning_rate: Step size
        seed: Initialisation seed

    Returns:
        Trained MlpModel

    Raises:
        DataFormatError: If the dataset is unlabelled
        TrainingDivergedError: If the loss becomes non-finite (lower the learning rate)
    """
    ensure_valid(validate_train_config(TrainConfig(hidden=hidden, epochs=epochs,
                                                   learning_rate=learning_rate, seed=seed)))
    if data.labels is None:
        raise DataFormatError('Training needs a labelled dataset')

    x = data.rows
    y = data.labels.astype(float)
    d = data.d
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0

    rng = np.random.default_rng(seed)
    w1 = rng.normal(0.0, 1.0 / np.sqrt(d), size=(d, hidden))
    b1 = np.zeros(hidden)
    w2 = rng.normal(0.0, 1.0 / np.sqrt(hidden), size=hidden)
    b2 = 0.0

    model = MlpModel(w1=w1, b1=b1, w2=w2, b2=b2, input_mean=mean, input_scale=scale)
    initial_loss = None
    loss = None
    for _ in range(epochs):
        loss, grads = loss_and_gradients(model, x, y)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f'Training loss became non-finite; lower the learning rate (now {learning_rate})')
        if initial_loss is None:
            initial_loss = loss
        w1 = w1 - learning_rate * grads['w1']
        b1 = b1 - learning_rate * grads['b1']
        w2 = w2 - learning_rate * grads['w2']
        b2 = b2 - learning_rate * float(grads['b2'])
        if not (np.all(np.isfinite(w1)) and np.all(np.isfinite(w2)) and np.isfinite(b2)):
            raise TrainingDivergedError(f'Parameters became non-finite; lower the learning rate (now {learning_rate})')
        model = MlpModel(w1=w1, b1=b1, w2=w2, b2=b2, input_mean=mean, input_scale=scale)

    final_loss, _ = loss_and_gradients(model, x, y)
    if not np.isfinite(final_loss):
        raise TrainingDivergedError('Final training loss is non-finite; lower the learning rate')
    return MlpModel(w1=w1, b1=b1, w2=w2, b2=b2, input_mean=mean, input_scale=scale,
                    initial_loss=initial_loss, final_loss=final_loss)


def accuracy(model, data: Dataset) -> float:
    """Fraction of rows whose predicted label equals the dataset label"""
    if data.labels is None:
        raise DataFormatError('Accuracy needs a labelled dataset')
    return float(np.mean(model.predict_label(data.rows) == data.labels))


def grid_axes(bounds, resolution: int) -> Tuple[np.ndarray, np.ndarray]:
    """Cell-centre coordinates along x and y for a resolution x resolution grid"""
    (x_min, x_max), (y_min, y_max) = bounds
    xs = x_min + (np.arange(resolution) + 0.5) * (x_max - x_min) / resolution
    ys = y_min + (np.arange(resolution) + 0.5) * (y_max - y_min) / resolution
    return xs, ys


def decision_grid(model, bounds, resolution: int) -> np.ndarray:
    """
    Black-box labels over a 2-D box, row-major (row i = i-th y value, column j = j-th x value).

    Args:
        model: Black box with two input features
        bounds: ((x_min, x_max), (y_min, y_max))
        resolution: Cells per axis

    Returns:
        resolution x resolution matrix of class ids
    """
    if getattr(model, 'n_features', 2) != 2:
        raise DimensionError(f'Decision grids need a 2-feature model, got d = {model.n_features}')
    xs, ys = grid_axes(bounds, resolution)
    gx, gy = np.meshgrid(xs, ys)
    cells = np.column_stack([gx.ravel(), gy.ravel()])
    return np.asarray(model.predict_label(cells)).reshape(resolution, resolution)


def save_model(model: MlpModel, path: str, seed: Optional[int] = None, config_digest: Optional[str] = None):
    """
    Write the model as JSON: layer-shape header plus row-major weight lists,
    stamped with the training seed, config digest and tool version.

    Floats are written with Python's shortest round-trip repr, so load_model
    reproduces predictions bit-exactly.
    """
    doc = {
        'format': MODEL_FORMAT,
        'version': MODEL_FORMAT_VERSION,
        'layer_sizes': list(model.layer_sizes),
        'hidden_activation': 'tanh',
        'output_activation': 'logistic',
        'input_mean': model.input_mean.tolist(),
        'input_scale': model.input_scale.tolist(),
        'w1': model.w1.tolist(),
        'b1': model.b1.tolist(),
        'w2': model.w2.tolist(),
        'b2': model.b2,
        'initial_loss': model.initial_loss,
        'final_loss': model.final_loss,
    }
    doc.update(provenance(seed, config_digest))
    with open(path, 'w') as f:
        f.write(json.dumps(doc, indent=1) + '\n')


def load_model(path: str) -> MlpModel:
    """
    Read a model written by save_model.

    Raises:
        DataFormatError: If the file is missing, malformed or its shapes disagree with the header
    """
    if not os.path.exists(path):
        raise DataFormatError(f'Model file not found: {path}')
    try:
        with open(path, 'r') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f'Model file {path} is not valid JSON: {e}')
    if not isinstance(doc, dict) or doc.get('format') != MODEL_FORMAT:
        raise DataFormatError(f'{path} is not a {MODEL_FORMAT} model file')
    try:
        d, h, out = doc['layer_sizes']
        w1 = np.array(doc['w1'], dtype=float)
        if out != 1 or w1.shape != (d, h):
            raise DataFormatError(f'Model file {path}: w1 shape {w1.shape} disagrees with layer sizes {doc["layer_sizes"]}')
        return MlpModel(w1=w1, b1=np.array(doc['b1'], dtype=float), w2=np.array(doc['w2'], dtype=float),
                        b2=float(doc['b2']), input_mean=np.array(doc['input_mean'], dtype=float),
                        input_scale=np.array(doc['input_scale'], dtype=float),
                        initial_loss=doc.get('initial_loss'), final_loss=doc.get('final_loss'))
    except (KeyError, TypeError, ValueError) as e:
        raise DataFormatError(f'Model file {path} is malformed: {e}')
    except DimensionError as e:
        raise DataFormatError(f'Model file {path} is malformed: {e}')
