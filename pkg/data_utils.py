"""
Data Utilities Module
Handles synthetic data generation and CSV ingestion/emission of datasets
"""
import os
from typing import List, Optional

import numpy as np
import pandas as pd

from config_utils import HalfMoonsSpec, ensure_valid, validate_half_moons_spec
from domain_types import CATEGORICAL, CONTINUOUS, Dataset
from error_utils import ConfigError, DataFormatError

LABEL_COLUMN = 'label'
CATEGORICAL_SUFFIX = ':cat'


def generate_half_moons(spec: HalfMoonsSpec) -> Dataset:
    """
    Two interleaving unit-radius half circles with Gaussian noise.

    Class 0 lies on (cos t, sin t), class 1 on (1 - cos t, 0.5 - sin t),
    t ~ U[0, pi]. Class 0 gets ceil(n/2) points, class 1 floor(n/2).

    Args:
        spec: HalfMoonsSpec (n, noise, seed)

    Returns:
        Labelled Dataset with two continuous features
    """
    ensure_valid(validate_half_moons_spec(spec))

    rng = np.random.default_rng(spec.seed)
    n0 = (spec.n + 1) // 2
    n1 = spec.n // 2
    t0 = rng.uniform(0.0, np.pi, size=n0)
    t1 = rng.uniform(0.0, np.pi, size=n1)
    outer = np.column_stack([np.cos(t0), np.sin(t0)])
    inner = np.column_stack([1.0 - np.cos(t1), 0.5 - np.sin(t1)])
    rows = np.vstack([outer, inner])
    if spec.noise > 0:
        rows = rows + rng.normal(0.0, spec.noise, size=rows.shape)
    labels = np.concatenate([np.zeros(n0, dtype=int), np.ones(n1, dtype=int)])
    return Dataset.from_rows(rows, labels)


def generate_blobs(n: int, centers, std: float, seed: int) -> Dataset:
    """Isotropic Gaussian blobs, one per center; the blob index is the label"""
    centers = np.asarray(centers, dtype=float)
    if centers.shape[0] != 2:
        raise ConfigError('Blobs are generated for exactly two classes')
    rng = np.random.default_rng(seed)
    sizes = [(n + 1) // 2, n // 2]
    rows = np.vstack([c + rng.normal(0.0, std, size=(k, centers.shape[1]))
                      for c, k in zip(centers, sizes)])
    labels = np.concatenate([np.full(k, i, dtype=int) for i, k in enumerate(sizes)])
    return Dataset.from_rows(rows, labels)


def load_csv(path: str) -> Dataset:
    """
    Load a numeric CSV with a header row and an optional final 'label' column.

    Columns whose header ends with ':cat' are categorical-coded features.

    Args:
        path: CSV file path

    Returns:
        Dataset

    Raises:
        DataFormatError: Missing header, ragged rows, non-numeric cells or unknown labels
    """
    if not os.path.exists(path):
        raise DataFormatError(f'CSV file not found: {path}')
    try:
        frame = pd.read_csv(path, header=None, dtype=str, keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise DataFormatError(f'CSV file {path} is empty')
    except pd.errors.ParserError as e:
        raise DataFormatError(f'CSV file {path} has ragged rows: {e}')

    if frame.isna().to_numpy().any():
        raise DataFormatError(f'CSV file {path} has ragged rows')

    header = [str(h).strip() for h in frame.iloc[0].tolist()]
    if all(_looks_numeric(h) for h in header):
        raise DataFormatError(f'CSV file {path} is missing its header row')
    body = frame.iloc[1:]
    if body.shape[0] == 0:
        raise DataFormatError(f'CSV file {path} has no data rows')

    try:
        values = body.to_numpy().astype(float)
    except ValueError as e:
        raise DataFormatError(f'CSV file {path} has a non-numeric cell: {e}')

    labels = None
    if header[-1] == LABEL_COLUMN:
        raw_labels = values[:, -1]
        if not np.all(np.isin(raw_labels, (0.0, 1.0))):
            bad = sorted(set(raw_labels.tolist()) - {0.0, 1.0})
            raise DataFormatError(f'CSV file {path} has unknown label values {bad[:5]}; expected 0 or 1')
        labels = raw_labels.astype(int)
        values = values[:, :-1]
        header = header[:-1]
    if not header:
        raise DataFormatError(f'CSV file {path} has no feature columns')

    kinds = [CATEGORICAL if h.endswith(CATEGORICAL_SUFFIX) else CONTINUOUS for h in header]
    names = [h[:-len(CATEGORICAL_SUFFIX)] if h.endswith(CATEGORICAL_SUFFIX) else h for h in header]
    return Dataset.from_rows(values, labels, kinds=kinds, feature_names=names)


def save_csv(data: Dataset, path: str):
    """Write a Dataset in the same CSV dialect load_csv reads"""
    columns = [name + (CATEGORICAL_SUFFIX if meta.kind == CATEGORICAL else '')
               for name, meta in zip(data.feature_names, data.feature_meta)]
    frame = pd.DataFrame(data.rows, columns=columns)
    if data.labels is not None:
        frame[LABEL_COLUMN] = data.labels.astype(int)
    frame.to_csv(path, index=False, lineterminator='\n')


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def feature_names_for(data: Optional[Dataset], d: int) -> List[str]:
    if data is not None and len(data.feature_names) == d:
        return list(data.feature_names)
    return [f'x{j}' for j in range(d)]
