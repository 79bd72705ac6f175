"""Dataset ingestion, normalization, splitting, and synthetic study data.

CSV convention: UTF-8, comma-separated, one header row, the last column is
the output. The bundled generators produce clearly-synthetic stand-ins for
the experiment protocols: a 21-point three-input testbed, a matched
low-fidelity/high-fidelity pair, a 2-sparse recovery instance, and a wide
25-input table mimicking the blade-efficiency file layout.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import IndexScheme, InputSpace, build_index_set, design_matrix, gauss_quadrature
from .errors import DataError

BOUND_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Dataset:
    """Input-output pairs with column labels and provenance."""

    inputs: np.ndarray
    outputs: np.ndarray
    column_names: tuple[str, ...]
    source: str = "<memory>"

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=float))
        outputs = np.atleast_1d(np.asarray(self.outputs, dtype=float))
        if inputs.shape[0] != outputs.size or inputs.shape[0] < 1:
            raise DataError("inputs and outputs must align, with at least one row")
        if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(outputs))):
            raise DataError("dataset contains non-finite values")
        if len(self.column_names) != inputs.shape[1] + 1:
            raise DataError("need one column name per input plus the output")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "column_names", tuple(self.column_names))

    @property
    def n(self) -> int:
        return self.outputs.size

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


def ingest_csv(path: str | Path) -> Dataset:
    """Parse a dataset file; the last column is the output.

    Errors carry 1-based file row (header is row 1) and column positions.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need at least one input column and one output column")
        rows = []
        for file_row, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise DataError(
                    f"{path}: row {file_row} has {len(record)} fields, expected {len(header)}"
                )
            values = []
            for col, cell in enumerate(record, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell.strip()!r} at row {file_row}, "
                        f"column {col}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: non-finite value at row {file_row}, column {col}"
                    )
                values.append(value)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.asarray(rows, dtype=float)
    return Dataset(table[:, :-1], table[:, -1], tuple(header), source=str(path))


def write_csv(dataset: Dataset, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(dataset.column_names)
        for x, y in zip(dataset.inputs, dataset.outputs):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def map_to_unit_interval(dataset: Dataset, bounds) -> Dataset:
    """Affinely map each input column from [lo, hi] onto [-1, 1].

    Values beyond a bound by more than BOUND_TOLERANCE raise; smaller
    excursions are clamped as rounding noise.
    """
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (dataset.d, 2):
        raise DataError(f"expected {dataset.d} (lower, upper) bound pairs")
    if np.any(bounds[:, 0] >= bounds[:, 1]):
        raise DataError("each lower bound must be below its upper bound")
    lo, hi = bounds[:, 0], bounds[:, 1]
    excess_low = lo[None, :] - dataset.inputs
    excess_high = dataset.inputs - hi[None, :]
    worst = max(float(excess_low.max(initial=0.0)), float(excess_high.max(initial=0.0)))
    if worst > BOUND_TOLERANCE:
        culprit = np.unravel_index(
            int(np.argmax(np.maximum(excess_low, excess_high))), dataset.inputs.shape
        )
        raise DataError(
            f"input exceeds configured bounds by {worst:.3e} "
            f"(row {culprit[0] + 1}, input column {culprit[1] + 1})"
        )
    scaled = 2.0 * (dataset.inputs - lo[None, :]) / (hi - lo)[None, :] - 1.0
    scaled = np.clip(scaled, -1.0, 1.0)
    return Dataset(scaled, dataset.outputs, dataset.column_names, dataset.source)


def split_indices(n: int, train_count: int, rng: np.random.Generator):
    """Disjoint, covering train/test index split."""
    if not 1 <= train_count < n:
        raise DataError(f"train_count must be in [1, {n - 1}], got {train_count}")
    perm = rng.permutation(n)
    return np.sort(perm[:train_count]), np.sort(perm[train_count:])


# --------------------------------------------------------------------------
# Synthetic study data. All of it is generated, none of it is measured.
# --------------------------------------------------------------------------

def smooth_three_input_response(x: np.ndarray) -> np.ndarray:
    """Smooth reference response on [-1, 1]^3 with a large mean offset."""
    x = np.atleast_2d(x)
    return (
        10.0
        + 2.5 * x[:, 0]
        + 1.5 * x[:, 1]
        - 1.0 * x[:, 2]
        + 0.8 * x[:, 0] * x[:, 1]
        - 0.6 * x[:, 2] ** 2
        + 0.4 * np.sin(1.3 * x[:, 0] + 0.5 * x[:, 1])
    )


def synthetic_three_input_dataset(n_points: int = 21, seed: int = 0,
                                  noise_sd: float = 0.5) -> Dataset:
    """Synthetic 21-point testbed for the scarce-data split protocols."""
    rng = np.random.default_rng(seed)
    space = InputSpace.uniform_cube(3)
    x = space.sample(rng, n_points)
    y = smooth_three_input_response(x) + noise_sd * rng.standard_normal(n_points)
    return Dataset(x, y, ("x1", "x2", "x3", "response"), source="synthetic")


def low_fidelity_response(x: np.ndarray) -> np.ndarray:
    """Cheap companion model: same trends, systematic discrepancy."""
    x = np.atleast_2d(x)
    return 0.95 * smooth_three_input_response(x) + 0.3 + 0.2 * x[:, 0] ** 2


def dense_low_fidelity_dataset(max_degree: int = 3) -> Dataset:
    """Noise-free low-fidelity evaluations on a tensor grid of Gauss nodes."""
    space = InputSpace.uniform_cube(3)
    nodes, _ = gauss_quadrature(space.dims[0], max_degree + 1)
    grid = np.stack(np.meshgrid(nodes, nodes, nodes, indexing="ij"), axis=-1).reshape(-1, 3)
    y = low_fidelity_response(grid)
    return Dataset(grid, y, ("x1", "x2", "x3", "response"), source="synthetic")


def low_fidelity_coefficients(max_degree: int = 3) -> np.ndarray:
    """Least-squares fit of the low-fidelity model on the shared basis."""
    dataset = dense_low_fidelity_dataset(max_degree)
    space = InputSpace.uniform_cube(3)
    idx = build_index_set(IndexScheme.TOTAL_ORDER, 3, max_degree)
    v = design_matrix(space, idx, dataset.inputs).values
    coeffs, *_ = np.linalg.lstsq(v, dataset.outputs, rcond=None)
    return coeffs


def sparse_recovery_dataset(n_train: int = 15, n_test: int = 200, seed: int = 0,
                            noise_sd: float = 0.15):
    """2-sparse truth on a d=5, p=2 total-order basis (N=21).

    Returns (space, index set, train dataset, test dataset, true coefficients);
    the active coefficients sit at graded-lex positions 1 and 6.
    """
    rng = np.random.default_rng(seed)
    space = InputSpace.uniform_cube(5)
    idx = build_index_set(IndexScheme.TOTAL_ORDER, 5, 2)
    alpha = np.zeros(idx.n)
    alpha[1] = 3.0
    alpha[6] = 1.5
    names = tuple(f"x{i + 1}" for i in range(5)) + ("response",)
    x_train = space.sample(rng, n_train)
    y_train = design_matrix(space, idx, x_train).values @ alpha
    y_train = y_train + noise_sd * rng.standard_normal(n_train)
    x_test = space.sample(rng, n_test)
    y_test = design_matrix(space, idx, x_test).values @ alpha
    train = Dataset(x_train, y_train, names, source="synthetic")
    test = Dataset(x_test, y_test, names, source="synthetic")
    return space, idx, train, test, alpha


def paired_sine_outputs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """The seven-input analytic pair with strongly correlated outputs."""
    x = np.atleast_2d(x)
    phase = x.sum(axis=1) / math.sqrt(7.0)
    return np.sin(phase), 0.9 * np.sin(phase + 0.5)


def analytic_pair_datasets(n_train: int = 105, n_test: int = 300, seed: int = 0):
    """Training inputs (different per output) and shared test inputs, d=7."""
    rng = np.random.default_rng(seed)
    space = InputSpace.uniform_cube(7)
    x1 = space.sample(rng, n_train)
    x2 = space.sample(rng, n_train)
    x_test = space.sample(rng, n_test)
    y1, _ = paired_sine_outputs(x1)
    _, y2 = paired_sine_outputs(x2)
    yt1, yt2 = paired_sine_outputs(x_test)
    return space, (x1, x2), (y1, y2), x_test, (yt1, yt2)


def blade_format_dataset(n_rows: int = 548, seed: int = 0) -> Dataset:
    """Synthetic table shaped like the 25-input blade-efficiency files.

    A sparse quadratic response with small noise; stands in for the real
    datasets, which are not bundled, to exercise the wide-table pipeline.
    """
    rng = np.random.default_rng(seed)
    d = 25
    x = rng.uniform(-1.0, 1.0, size=(n_rows, d))
    y = (
        0.90
        + 0.020 * x[:, 0]
        - 0.015 * x[:, 2]
        + 0.010 * x[:, 6] * x[:, 11]
        - 0.008 * x[:, 17] ** 2
        + 0.004 * x[:, 21]
        + 0.002 * rng.standard_normal(n_rows)
    )
    names = tuple(f"g{i + 1}" for i in range(d)) + ("efficiency",)
    return Dataset(x, y, names, source="synthetic")
