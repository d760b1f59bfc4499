"""Quantum extreme learning machine pipeline.

Feature vectors are min-max normalized to rotation angles in [0, pi],
injected by a hardware-efficient encoder (one qubit per feature), evolved
through a fixed randomly-parameterized reservoir, and measured as the
3M-vector of per-qubit X/Y/Z expectations. Only the linear readout on top
of those expectations is trained, by plain (optionally ridge) least squares.

Execution is batched: a whole dataset of angle vectors runs through the
circuit as one (P, 2^M) amplitude array.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import quantum
from .errors import ConfigurationError, ShapeError, ValidationError
from .quantum import DenseUnitary, GateOp, IsingParams

ENCODER_KINDS = ("DHE", "RHE")
RESERVOIR_KINDS = ("CNOT", "HAAR", "ISING", "ROTATION")
AXES = ("X", "Y", "Z")


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

@dataclass
class NormalizationParams:
    """Per-feature training min/max defining the linear map onto [0, pi]."""

    mins: np.ndarray
    maxs: np.ndarray

    @property
    def num_features(self) -> int:
        return len(self.mins)


def fit_normalization(training_features: np.ndarray) -> NormalizationParams:
    """Column-wise extrema of a (P, M) training matrix."""
    feats = np.asarray(training_features, dtype=float)
    if feats.ndim != 2:
        raise ShapeError("training features must be a 2-D (windows x features) matrix")
    if feats.shape[0] < 1:
        raise ValidationError("training features must contain at least one row")
    return NormalizationParams(feats.min(axis=0), feats.max(axis=0))


def apply_normalization(params: NormalizationParams, features: np.ndarray) -> np.ndarray:
    """Map features linearly so the training min is 0 and the training max
    is pi; values outside the training range are clamped, and a constant
    training feature maps to 0 (its rotation becomes a no-op)."""
    feats = np.asarray(features, dtype=float)
    if feats.shape[-1] != params.num_features:
        raise ShapeError(
            f"expected {params.num_features} features, got {feats.shape[-1]}"
        )
    span = params.maxs - params.mins
    safe_span = np.where(span > 0, span, 1.0)
    angles = (feats - params.mins) / safe_span * np.pi
    angles = np.where(span > 0, angles, 0.0)
    return np.clip(angles, 0.0, np.pi)


# ---------------------------------------------------------------------------
# encoder
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamRotation:
    """Rotation slot whose angle is bound to one feature at execution time."""

    axis: str
    qubit: int
    feature: int


@dataclass
class EncoderSpec:
    """Hardware-efficient encoder: per-qubit rotations then a cyclic CZ ring.

    DHE rotates every qubit around X; RHE draws each qubit's axis uniformly
    from {X, Y, Z} (per layer, from `seed`). One qubit per feature.
    """

    kind: str
    num_features: int
    depth: int = 1
    seed: int | None = None
    axis_assignment: tuple[tuple[str, ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in ENCODER_KINDS:
            raise ConfigurationError(f"unknown encoder kind {self.kind!r}")
        if self.depth < 1:
            raise ConfigurationError("encoder depth must be >= 1")
        if self.axis_assignment is None:
            if self.kind == "DHE":
                axes = tuple(tuple("X" for _ in range(self.num_features))
                             for _ in range(self.depth))
            else:
                if self.seed is None:
                    raise ConfigurationError("RHE encoder requires a seed")
                rng = np.random.default_rng(self.seed)
                axes = tuple(
                    tuple(AXES[i] for i in rng.integers(0, 3, size=self.num_features))
                    for _ in range(self.depth)
                )
            self.axis_assignment = axes
        for layer in self.axis_assignment:
            if len(layer) != self.num_features:
                raise ConfigurationError("axis assignment must cover every qubit")
            if any(a not in AXES for a in layer):
                raise ConfigurationError("axes must be X, Y or Z")
        if self.kind == "DHE" and any(a != "X" for layer in self.axis_assignment
                                      for a in layer):
            raise ConfigurationError("DHE axes must all be X")


def cyclic_ring(num_qubits: int, kind: str) -> list[GateOp]:
    """Entangling ring (0,1), (1,2), ..., (D-1, 0) of CZ or CNOT gates."""
    return [GateOp(kind, target=(i + 1) % num_qubits, control=i)
            for i in range(num_qubits)]


def build_encoder(spec: EncoderSpec) -> list[list[ParamRotation | GateOp]]:
    """Gate layers with rotation angles left symbolic (bound at execution).

    Every layer rebinds the same feature angles (re-uploading).
    """
    m = spec.num_features
    if m < 2:
        raise ConfigurationError("cyclic entanglement needs at least 2 qubits")
    layers = []
    for layer_axes in spec.axis_assignment:
        layer: list[ParamRotation | GateOp] = [
            ParamRotation(axis, qubit=k, feature=k) for k, axis in enumerate(layer_axes)
        ]
        layer.extend(cyclic_ring(m, "CZ"))
        layers.append(layer)
    return layers


# ---------------------------------------------------------------------------
# reservoirs
# ---------------------------------------------------------------------------

@dataclass
class ReservoirSpec:
    """Which fixed reservoir to build; random parameters come from `seed`
    unless given explicitly (`ising`, `rotation_layers`)."""

    kind: str
    num_qubits: int
    depth: int = 10
    seed: int | None = None
    ising: IsingParams | None = None
    rotation_layers: tuple[tuple[tuple[str, float], ...], ...] | None = None

    def __post_init__(self):
        if self.kind not in RESERVOIR_KINDS:
            raise ConfigurationError(f"unknown reservoir kind {self.kind!r}")
        if self.num_qubits < 1:
            raise ConfigurationError("num_qubits must be >= 1")
        if self.kind in ("CNOT", "ROTATION") and self.depth < 1:
            raise ConfigurationError("reservoir depth must be >= 1")
        if self.ising is not None and self.kind != "ISING":
            raise ConfigurationError("ising parameters only apply to the ISING kind")
        if self.rotation_layers is not None and self.kind != "ROTATION":
            raise ConfigurationError("rotation_layers only apply to the ROTATION kind")


@dataclass
class Reservoir:
    """Built reservoir: either a gate list or one dense unitary, with the
    sampled parameters retained so it serializes without the seed."""

    kind: str
    num_qubits: int
    depth: int = 10
    gates: list[GateOp] | None = None
    unitary: DenseUnitary | None = None
    ising: IsingParams | None = None
    rotation_layers: tuple[tuple[tuple[str, float], ...], ...] | None = None


def _sample_rotation_layers(num_qubits: int, depth: int,
                            seed: int) -> tuple[tuple[tuple[str, float], ...], ...]:
    rng = np.random.default_rng(seed)
    layers = []
    for _ in range(depth):
        axes = [AXES[i] for i in rng.integers(0, 3, size=num_qubits)]
        angles = rng.uniform(0.0, 2.0 * np.pi, size=num_qubits)
        layers.append(tuple((a, float(t)) for a, t in zip(axes, angles)))
    return tuple(layers)


def _rotation_gates(num_qubits: int,
                    layers: tuple[tuple[tuple[str, float], ...], ...]) -> list[GateOp]:
    gates: list[GateOp] = []
    for layer in layers:
        gates.extend(GateOp("R" + axis, target=q, angle=angle)
                     for q, (axis, angle) in enumerate(layer))
        gates.extend(cyclic_ring(num_qubits, "CNOT"))
    return gates


def build_reservoir(spec: ReservoirSpec) -> Reservoir:
    """Materialize a reservoir; deterministic for a fixed spec and seed."""
    d = spec.num_qubits
    if spec.kind == "CNOT":
        gates = [g for _ in range(spec.depth) for g in cyclic_ring(d, "CNOT")]
        return Reservoir("CNOT", d, spec.depth, gates=gates)
    if spec.kind == "HAAR":
        if spec.seed is None:
            raise ConfigurationError("HAAR reservoir requires a seed")
        return Reservoir("HAAR", d, unitary=quantum.haar_unitary(1 << d, spec.seed))
    if spec.kind == "ISING":
        params = spec.ising
        if params is None:
            if spec.seed is None:
                raise ConfigurationError("ISING reservoir requires a seed or parameters")
            params = quantum.sample_ising_params(d, spec.seed)
        if params.num_qubits != d:
            raise ConfigurationError("Ising parameter size does not match num_qubits")
        return Reservoir("ISING", d, unitary=quantum.ising_unitary(params), ising=params)
    layers = spec.rotation_layers
    if layers is None:
        if spec.seed is None:
            raise ConfigurationError("ROTATION reservoir requires a seed or layers")
        layers = _sample_rotation_layers(d, spec.depth, spec.seed)
    return Reservoir("ROTATION", d, spec.depth,
                     gates=_rotation_gates(d, layers), rotation_layers=layers)


# ---------------------------------------------------------------------------
# circuit execution
# ---------------------------------------------------------------------------

def _apply_bound_rotations(amps: np.ndarray, num_qubits: int, rot: ParamRotation,
                           angles: np.ndarray) -> np.ndarray:
    """Apply one rotation slot with a per-row angle to a (P, 2^D) batch."""
    dim = 1 << num_qubits
    theta = angles[:, rot.feature]
    c = np.cos(theta / 2.0)[:, None, None]
    s = np.sin(theta / 2.0)[:, None, None]
    arr = amps.reshape(len(amps), dim >> (rot.qubit + 1), 2, 1 << rot.qubit)
    a0, a1 = arr[:, :, 0, :], arr[:, :, 1, :]
    out = np.empty_like(arr)
    if rot.axis == "X":
        out[:, :, 0, :] = c * a0 - 1j * s * a1
        out[:, :, 1, :] = -1j * s * a0 + c * a1
    elif rot.axis == "Y":
        out[:, :, 0, :] = c * a0 - s * a1
        out[:, :, 1, :] = s * a0 + c * a1
    else:
        out[:, :, 0, :] = (c - 1j * s) * a0
        out[:, :, 1, :] = (c + 1j * s) * a1
    return out.reshape(len(amps), dim)


def run_circuit_batch(encoder: EncoderSpec, reservoir: Reservoir | ReservoirSpec,
                      angles: np.ndarray) -> np.ndarray:
    """Observation matrix (P, 3M) for a batch of angle vectors (P, M).

    Rows start in |0...0>, go through the encoder with each row's angles
    bound, then through the reservoir; columns are ordered
    [<X^1>, <Y^1>, <Z^1>, ..., <X^M>, <Y^M>, <Z^M>].
    """
    if isinstance(reservoir, ReservoirSpec):
        reservoir = build_reservoir(reservoir)
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    m = encoder.num_features
    if angles.shape[1] != m:
        raise ShapeError(f"expected {m} angles per row, got {angles.shape[1]}")
    if reservoir.num_qubits != m:
        raise ShapeError("reservoir size does not match encoder width")
    amps = np.zeros((len(angles), 1 << m), dtype=complex)
    amps[:, 0] = 1.0
    for layer in build_encoder(encoder):
        for op in layer:
            if isinstance(op, ParamRotation):
                amps = _apply_bound_rotations(amps, m, op, angles)
            else:
                amps = quantum.apply_gate_kernel(amps, m, op)
    if reservoir.unitary is not None:
        amps = amps @ reservoir.unitary.entries.T
    else:
        for op in reservoir.gates:
            amps = quantum.apply_gate_kernel(amps, m, op)
    obs = np.empty((len(angles), 3 * m))
    for q in range(m):
        x, y, z = quantum.pauli_expectations(amps, m, q)
        obs[:, 3 * q], obs[:, 3 * q + 1], obs[:, 3 * q + 2] = x, y, z
    return np.clip(obs, -1.0, 1.0)


def run_circuit(encoder: EncoderSpec, reservoir: Reservoir | ReservoirSpec,
                angles: np.ndarray) -> np.ndarray:
    """Observation vector (3M,) for one angle vector (M,)."""
    return run_circuit_batch(encoder, reservoir, np.asarray(angles)[None, :])[0]


# ---------------------------------------------------------------------------
# readout
# ---------------------------------------------------------------------------

@dataclass
class ReadoutModel:
    """Linear readout t_pre = W . V (+ optional intercept)."""

    weights: np.ndarray
    include_intercept: bool = False
    intercept: float = 0.0
    ridge_lambda: float = 0.0


def fit_readout(observations: np.ndarray, targets: np.ndarray,
                ridge_lambda: float = 0.0,
                include_intercept: bool = False) -> ReadoutModel:
    """Least-squares weights minimizing sum (W.V_j - t_j)^2 (+ lambda |W|^2).

    Solved by SVD-based lstsq on the (optionally ridge-augmented) system,
    which returns the minimum-norm solution for rank-deficient matrices.
    The intercept column, when enabled, is never penalized.
    """
    obs = np.asarray(observations, dtype=float)
    t = np.asarray(targets, dtype=float)
    if obs.ndim != 2:
        raise ShapeError("observations must be a 2-D matrix")
    if t.shape != (obs.shape[0],):
        raise ShapeError("targets length does not match observation rows")
    if obs.shape[0] < 1:
        raise ValidationError("need at least one training row")
    if not np.all(np.isfinite(obs)) or not np.all(np.isfinite(t)):
        raise ValidationError("observations and targets must be finite")
    if ridge_lambda < 0:
        raise ValidationError("ridge_lambda must be >= 0")
    k = obs.shape[1]
    design = np.hstack([obs, np.ones((obs.shape[0], 1))]) if include_intercept else obs
    rhs = t
    if ridge_lambda > 0:
        penalty = np.sqrt(ridge_lambda) * np.eye(k)
        if include_intercept:
            penalty = np.hstack([penalty, np.zeros((k, 1))])
        design = np.vstack([design, penalty])
        rhs = np.concatenate([t, np.zeros(k)])
    solution, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    intercept = float(solution[-1]) if include_intercept else 0.0
    weights = solution[:k]
    return ReadoutModel(weights, include_intercept, intercept, float(ridge_lambda))


def predict(model: ReadoutModel, observation: np.ndarray) -> float:
    """W . V (+ intercept if the model has one)."""
    v = np.asarray(observation, dtype=float)
    if v.shape != model.weights.shape:
        raise ShapeError(
            f"observation length {v.shape} does not match weights {model.weights.shape}"
        )
    return float(model.weights @ v + model.intercept)


# ---------------------------------------------------------------------------
# end-to-end pipeline
# ---------------------------------------------------------------------------

@dataclass
class Pipeline:
    """Trained QELM: normalization + encoder + built reservoir + readout.

    Immutable after training; prediction is pure."""

    normalization: NormalizationParams
    encoder: EncoderSpec
    reservoir: Reservoir
    readout: ReadoutModel
    training_rss: float = field(default=float("nan"))

    def predict_batch(self, features: np.ndarray) -> np.ndarray:
        feats = np.atleast_2d(np.asarray(features, dtype=float))
        angles = apply_normalization(self.normalization, feats)
        obs = run_circuit_batch(self.encoder, self.reservoir, angles)
        return obs @ self.readout.weights + self.readout.intercept

    def predict(self, features: np.ndarray) -> float:
        return float(self.predict_batch(np.asarray(features)[None, :])[0])

    def to_json(self) -> str:
        return json.dumps(_pipeline_to_dict(self))

    @classmethod
    def from_json(cls, text: str) -> "Pipeline":
        return _pipeline_from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "Pipeline":
        with open(path) as fh:
            return cls.from_json(fh.read())


def _as_training_arrays(train) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(train, "feature_matrix"):
        return (np.asarray(train.feature_matrix(), dtype=float),
                np.asarray(train.awt_values(), dtype=float))
    features, targets = train
    return np.asarray(features, dtype=float), np.asarray(targets, dtype=float)


def qelm_train(train, encoder: EncoderSpec, reservoir: ReservoirSpec | Reservoir,
               ridge_lambda: float = 0.0, include_intercept: bool = False) -> Pipeline:
    """Fit the full pipeline on training windows.

    `train` is either a dataset object exposing feature_matrix()/awt_values()
    or a (features, targets) pair. Normalization is fit on the training data
    only.
    """
    features, targets = _as_training_arrays(train)
    if features.shape[0] < 1:
        raise ValidationError("training set is empty")
    if features.shape[1] != encoder.num_features:
        raise ShapeError("encoder width does not match dataset feature count")
    norm = fit_normalization(features)
    built = build_reservoir(reservoir) if isinstance(reservoir, ReservoirSpec) else reservoir
    angles = apply_normalization(norm, features)
    observations = run_circuit_batch(encoder, built, angles)
    readout = fit_readout(observations, targets, ridge_lambda, include_intercept)
    residuals = observations @ readout.weights + readout.intercept - targets
    return Pipeline(norm, encoder, built, readout,
                    training_rss=float(residuals @ residuals))


def qelm_predict(pipeline: Pipeline, features: np.ndarray) -> float:
    """Normalize, run the circuit, apply the readout."""
    return pipeline.predict(features)


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------

def _pipeline_to_dict(p: Pipeline) -> dict:
    reservoir: dict = {"kind": p.reservoir.kind, "num_qubits": p.reservoir.num_qubits,
                       "depth": p.reservoir.depth}
    if p.reservoir.kind == "ISING":
        reservoir["ising"] = {
            "couplings": p.reservoir.ising.couplings.tolist(),
            "fields": p.reservoir.ising.fields.tolist(),
            "time_step": p.reservoir.ising.time_step,
        }
    elif p.reservoir.kind == "ROTATION":
        reservoir["rotation_layers"] = [
            [[axis, angle] for axis, angle in layer] for layer in p.reservoir.rotation_layers
        ]
    elif p.reservoir.kind == "HAAR":
        reservoir["unitary_re"] = p.reservoir.unitary.entries.real.tolist()
        reservoir["unitary_im"] = p.reservoir.unitary.entries.imag.tolist()
    return {
        "format": "qelm-pipeline-v1",
        "encoder": {
            "kind": p.encoder.kind,
            "num_features": p.encoder.num_features,
            "depth": p.encoder.depth,
            "axis_assignment": [list(layer) for layer in p.encoder.axis_assignment],
        },
        "reservoir": reservoir,
        "normalization": {"mins": p.normalization.mins.tolist(),
                          "maxs": p.normalization.maxs.tolist()},
        "readout": {"weights": p.readout.weights.tolist(),
                    "include_intercept": p.readout.include_intercept,
                    "intercept": p.readout.intercept,
                    "ridge_lambda": p.readout.ridge_lambda},
        "training_rss": p.training_rss,
    }


def _pipeline_from_dict(doc: dict) -> Pipeline:
    if doc.get("format") != "qelm-pipeline-v1":
        raise ConfigurationError("unrecognized pipeline document format")
    enc = doc["encoder"]
    encoder = EncoderSpec(enc["kind"], enc["num_features"], enc["depth"],
                          axis_assignment=tuple(tuple(layer)
                                                for layer in enc["axis_assignment"]))
    res = doc["reservoir"]
    kind, d, depth = res["kind"], res["num_qubits"], res["depth"]
    if kind == "CNOT":
        reservoir = build_reservoir(ReservoirSpec("CNOT", d, depth))
    elif kind == "ISING":
        params = IsingParams(d, np.array(res["ising"]["couplings"]),
                             np.array(res["ising"]["fields"]),
                             res["ising"]["time_step"])
        reservoir = build_reservoir(ReservoirSpec("ISING", d, ising=params))
    elif kind == "ROTATION":
        layers = tuple(tuple((axis, angle) for axis, angle in layer)
                       for layer in res["rotation_layers"])
        reservoir = build_reservoir(ReservoirSpec("ROTATION", d, depth,
                                                  rotation_layers=layers))
    else:
        entries = np.array(res["unitary_re"]) + 1j * np.array(res["unitary_im"])
        reservoir = Reservoir("HAAR", d, unitary=DenseUnitary(1 << d, entries))
    norm = NormalizationParams(np.array(doc["normalization"]["mins"], dtype=float),
                               np.array(doc["normalization"]["maxs"], dtype=float))
    ro = doc["readout"]
    readout = ReadoutModel(np.array(ro["weights"], dtype=float),
                           ro["include_intercept"], ro["intercept"],
                           ro["ridge_lambda"])
    return Pipeline(norm, encoder, reservoir, readout,
                    training_rss=doc.get("training_rss", float("nan")))
