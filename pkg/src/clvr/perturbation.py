"""First-order perturbation experiments on tiny dense networks.

A TinyNetSpec is a small MLP whose weights live in a TensorMap, so weight
deltas compose with the same arithmetic as full checkpoints. The two
experiments here measure, on synthetic data:

* superposition_error — how far f(W + s(D1+D2)) deviates from the additive
  first-order picture f(W) + s·J·D1 + s·J·D2. For smooth activations the
  deviation shrinks quadratically in s.
* increment_cosine — how orthogonal the output increments of two
  independently trained deltas are (a denoise-toward-circle delta against a
  rotate-along-circle delta).

Jacobian-vector products use central finite differences; there is no
autodiff dependency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .container import TensorMap
from .manifold import ToyManifold, project

#: Default central-difference step for Jacobian-vector products, applied to
#: the unit-scale direction (the s-scaling is applied analytically).
FD_STEP = 1e-4

#: Median |cos| measured by the pre-registered run of
#: trained_circle_deltas(seed=13) at repository creation (rounded up at the
#: sixth decimal). Regression tests assert the experiment stays at or below
#: this bound.
TRAINED_DECOUPLING_BOUND = 0.102762


@dataclass(frozen=True)
class TinyNetSpec:
    """Dense MLP: widths, activation tag, and weights in a TensorMap.

    Tensor names are ``layer{i}.weight`` (out × in) and ``layer{i}.bias``;
    the activation is applied after every layer except the last.
    """

    widths: tuple[int, ...]
    activation: str
    weights: TensorMap

    def __post_init__(self):
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        if len(self.widths) < 2:
            raise ValueError("need at least an input and an output width")
        if self.activation not in ("tanh", "identity"):
            raise ValueError(f"unsupported activation {self.activation!r}")
        for i, (n_in, n_out) in enumerate(zip(self.widths, self.widths[1:])):
            w = self.weights[f"layer{i}.weight"]
            b = self.weights[f"layer{i}.bias"]
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ValueError(
                    f"layer {i}: want weight {(n_out, n_in)} and bias {(n_out,)}, "
                    f"got {w.shape} and {b.shape}"
                )

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


def init_tiny_net(widths, activation: str, rng: np.random.Generator) -> TinyNetSpec:
    """Random net with 1/sqrt(fan_in)-scaled normal weights."""
    tensors = {}
    for i, (n_in, n_out) in enumerate(zip(widths, widths[1:])):
        tensors[f"layer{i}.weight"] = rng.standard_normal((n_out, n_in)) / math.sqrt(n_in)
        tensors[f"layer{i}.bias"] = np.zeros(n_out)
    return TinyNetSpec(tuple(widths), activation, TensorMap(tensors))


def _act(z: np.ndarray, tag: str) -> np.ndarray:
    return np.tanh(z) if tag == "tanh" else z


def _act_grad(z: np.ndarray, tag: str) -> np.ndarray:
    if tag == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    return np.ones_like(z)


def forward(net: TinyNetSpec, inputs, weights: TensorMap | None = None) -> np.ndarray:
    """Evaluate the net on a batch of row-vector inputs."""
    w = weights if weights is not None else net.weights
    a = np.asarray(inputs, dtype=np.float64)
    last = net.n_layers - 1
    for i in range(net.n_layers):
        z = a @ w[f"layer{i}.weight"].T + w[f"layer{i}.bias"]
        a = z if i == last else _act(z, net.activation)
    return a


def _perturbed(base: TensorMap, deltas, coeff: float) -> TensorMap:
    out = {}
    for k in base.names():
        acc = base[k].copy()
        for d in deltas:
            if d[k].shape != base[k].shape:
                raise ValueError(f"delta shape mismatch for {k!r}")
            acc = acc + coeff * d[k]
        out[k] = acc
    return TensorMap(out)


def _check_delta_keys(net: TinyNetSpec, d: TensorMap) -> None:
    if set(d.names()) != set(net.weights.names()):
        raise ValueError("delta keys must match the net's weight names")


def random_delta(net: TinyNetSpec, rng: np.random.Generator) -> TensorMap:
    """Standard-normal direction in weight space, matching the net's layout.

    Tensors are drawn in name order (the TensorMap iteration order), so the
    result is a deterministic function of the generator state.
    """
    return TensorMap({k: rng.standard_normal(net.weights[k].shape) for k in net.weights})


def jvp_fd(net: TinyNetSpec, direction: TensorMap, inputs, h: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian-vector product J_W · direction."""
    _check_delta_keys(net, direction)
    plus = forward(net, inputs, _perturbed(net.weights, [direction], h))
    minus = forward(net, inputs, _perturbed(net.weights, [direction], -h))
    return (plus - minus) / (2.0 * h)


def superposition_error(
    net: TinyNetSpec,
    delta1: TensorMap,
    delta2: TensorMap,
    s: float,
    probe_inputs,
    h: float = FD_STEP,
) -> float:
    """Worst-case deviation from additive first-order superposition.

    max over probe inputs of
    ‖f(W + s(D1+D2)) − f(W) − s·J·D1 − s·J·D2‖.
    """
    if s <= 0:
        raise ValueError("s must be positive")
    for d in (delta1, delta2):
        _check_delta_keys(net, d)
    x = np.asarray(probe_inputs, dtype=np.float64)
    base_out = forward(net, x)
    merged = forward(net, x, _perturbed(net.weights, [delta1, delta2], s))
    linear = s * jvp_fd(net, delta1, x, h) + s * jvp_fd(net, delta2, x, h)
    err = merged - base_out - linear
    return float(np.max(np.linalg.norm(err, axis=-1)))


@dataclass(frozen=True)
class CosineStats:
    """Per-input cosines between two output increments, with summaries.

    Inputs where either increment has zero norm are excluded and counted;
    with no usable inputs the summary statistics are NaN.
    """

    cosines: tuple[float, ...]
    median_abs: float
    mean_abs: float
    max_abs: float
    excluded: int

    @classmethod
    def from_cosines(cls, cosines, excluded: int) -> "CosineStats":
        cos = tuple(float(c) for c in cosines)
        if not cos:
            return cls((), math.nan, math.nan, math.nan, excluded)
        abs_cos = np.abs(cos)
        return cls(
            cos,
            float(np.median(abs_cos)),
            float(np.mean(abs_cos)),
            float(np.max(abs_cos)),
            excluded,
        )


def increment_cosine(
    net: TinyNetSpec,
    delta_distill: TensorMap,
    delta_align: TensorMap,
    probe_inputs,
) -> CosineStats:
    """Cosines between the output increments of two weight deltas.

    The increments are f(W+D)(x) − f(W)(x) per probe input; orthogonal
    increments mean the two deltas act on decoupled output directions.
    """
    for d in (delta_distill, delta_align):
        _check_delta_keys(net, d)
    x = np.asarray(probe_inputs, dtype=np.float64)
    base_out = forward(net, x)
    inc_a = forward(net, x, _perturbed(net.weights, [delta_distill], 1.0)) - base_out
    inc_b = forward(net, x, _perturbed(net.weights, [delta_align], 1.0)) - base_out
    cosines = []
    excluded = 0
    for a, b in zip(inc_a, inc_b):
        na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
        if na == 0.0 or nb == 0.0:
            excluded += 1
            continue
        cosines.append(float(np.dot(a, b)) / (na * nb))
    return CosineStats.from_cosines(cosines, excluded)


def train_to_targets(
    net: TinyNetSpec, inputs, targets, steps: int, lr: float
) -> TinyNetSpec:
    """Plain full-batch gradient descent on mean squared error.

    Deterministic given the starting weights; the returned spec shares the
    architecture and carries the trained weights.
    """
    x = np.asarray(inputs, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    tag = net.activation
    ws = [net.weights[f"layer{i}.weight"].copy() for i in range(net.n_layers)]
    bs = [net.weights[f"layer{i}.bias"].copy() for i in range(net.n_layers)]
    last = net.n_layers - 1
    for _ in range(steps):
        pre: list[np.ndarray] = []
        acts = [x]
        a = x
        for i in range(net.n_layers):
            z = a @ ws[i].T + bs[i]
            pre.append(z)
            a = z if i == last else _act(z, tag)
            acts.append(a)
        grad = 2.0 * (a - y) / len(x)
        for i in range(last, -1, -1):
            gw = grad.T @ acts[i]
            gb = grad.sum(axis=0)
            if i > 0:
                grad = (grad @ ws[i]) * _act_grad(pre[i - 1], tag)
            ws[i] = ws[i] - lr * gw
            bs[i] = bs[i] - lr * gb
    tensors = {}
    for i in range(net.n_layers):
        tensors[f"layer{i}.weight"] = ws[i]
        tensors[f"layer{i}.bias"] = bs[i]
    return TinyNetSpec(net.widths, tag, TensorMap(tensors))


def _rotate(points: np.ndarray, center: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    return (points - center) @ rot.T + center


def trained_circle_deltas(
    seed: int = 13,
    widths=(2, 32, 32, 2),
    tube_offset: float = 0.2,
    rotate_angle: float = 0.2,
    base_steps: int = 40000,
    finetune_steps: int = 20000,
    lr: float = 0.2,
    n_train: int = 256,
    n_probe: int = 64,
):
    """The pre-registered decoupling experiment on the unit circle.

    Trains a base net to the identity on a tube around the circle, then
    fine-tunes two copies: one toward the circle projection (a denoising
    pull, normal to the circle) and one toward a small rotation (a motion
    along the circle, tangential). Returns (base_net, delta_distill,
    delta_align, probe_inputs). Deterministic given the arguments.
    """
    rng = np.random.default_rng(seed)
    manifold = ToyManifold(radius=1.0)

    def tube_points(n: int) -> np.ndarray:
        angles = rng.uniform(0.0, 2.0 * math.pi, size=n)
        radii = 1.0 + rng.uniform(-tube_offset, tube_offset, size=n)
        return np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)

    train_x = tube_points(n_train)
    probe_x = tube_points(n_probe)
    base = init_tiny_net(widths, "tanh", rng)
    base = train_to_targets(base, train_x, train_x, base_steps, lr)

    projected = np.stack([project(manifold, p) for p in train_x])
    distill = train_to_targets(base, train_x, projected, finetune_steps, lr)
    rotated = _rotate(train_x, manifold.center_array, rotate_angle)
    align = train_to_targets(base, train_x, rotated, finetune_steps, lr)

    from .merge import delta as _delta  # local import to avoid a cycle

    return (
        base,
        _delta(distill.weights, base.weights),
        _delta(align.weights, base.weights),
        probe_x,
    )


def constructed_circle_deltas(epsilon: float = 0.05, n_probe: int = 64, seed: int = 0):
    """Hand-built radial/tangential deltas on a single identity layer.

    The base map is the identity on the plane. The distill delta ε·I pushes
    every point radially outward; the align delta ε·J (J the 90° rotation
    generator) moves it along the circle. On unit-circle probes the two
    output increments are ε·x and ε·Jx, orthogonal by construction, so any
    measured cosine is pure floating-point residue. Returns
    (base_net, delta_distill, delta_align, probe_inputs).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    eye = np.eye(2)
    gen = np.array([[0.0, -1.0], [1.0, 0.0]])
    zero_bias = np.zeros(2)
    base = TinyNetSpec(
        (2, 2), "identity", TensorMap({"layer0.weight": eye, "layer0.bias": zero_bias})
    )
    delta_distill = TensorMap(
        {"layer0.weight": epsilon * eye, "layer0.bias": zero_bias}
    )
    delta_align = TensorMap({"layer0.weight": epsilon * gen, "layer0.bias": zero_bias})
    angles = np.random.default_rng(seed).uniform(0.0, 2.0 * math.pi, size=n_probe)
    probe_x = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return base, delta_distill, delta_align, probe_x


@dataclass(frozen=True)
class SuperpositionSweep:
    """Superposition error across delta scales, with its log-log slope.

    ``errors`` holds E(s) for the smooth net at each scale; the slope is
    the least-squares fit of ln E against ln s (second-order behavior shows
    up as a slope near 2). ``control_errors`` repeats the sweep on a
    single affine layer, where f is exactly linear in the weights and the
    measured error is the finite-difference noise floor.
    """

    scales: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float
    control_errors: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "scales": list(self.scales),
            "errors": list(self.errors),
            "slope": self.slope,
            "control_errors": list(self.control_errors),
        }


def superposition_sweep(
    seed: int = 5,
    widths=(2, 16, 16, 2),
    n_probe: int = 32,
    scales=tuple(0.1 / 2**k for k in range(8)),
) -> SuperpositionSweep:
    """The pre-registered superposition experiment.

    Draws a tanh net, two Gaussian weight deltas, and a probe batch from
    one seeded generator, then measures the additive-superposition error
    at every scale. The control reruns the same scales on a freshly drawn
    single affine layer. Deterministic given the arguments.
    """
    scales = tuple(float(s) for s in scales)
    if len(scales) < 2:
        raise ValueError("need at least 2 scales for a slope")
    rng = np.random.default_rng(seed)
    net = init_tiny_net(widths, "tanh", rng)
    d1 = random_delta(net, rng)
    d2 = random_delta(net, rng)
    probe_x = rng.standard_normal((n_probe, widths[0]))
    errors = tuple(superposition_error(net, d1, d2, s, probe_x) for s in scales)

    control = init_tiny_net((widths[0], widths[-1]), "identity", rng)
    c1 = random_delta(control, rng)
    c2 = random_delta(control, rng)
    control_errors = tuple(
        superposition_error(control, c1, c2, s, probe_x) for s in scales
    )

    slope, _ = np.polyfit(np.log(scales), np.log(errors), 1)
    return SuperpositionSweep(scales, errors, float(slope), control_errors)
