"""Ground-truth world for learning experiments: labeled-sample sources and a
seeded projective measurement engine.

A source holds the unknowns of one experiment: the label probabilities and the
conditional states, plus an optional post-draw label-flip rate.  Everything a
learner may later be scored against (exact coefficients, the optimal loss) is
derived from the effective signed mixture ``p1' rho1' - p0' rho0'``, which the
source exposes as a dense operator.

Measurements are simulated exactly.  A batch of mutually commuting strings is
measured sequentially with post-measurement collapse, which reproduces the
joint fine-grained outcome law without ever materializing the ``2^m`` joint
effects.  Samples with identical states and labels share collapse work through
:func:`measure_batch_groups`, so large sample budgets stay cheap.

Randomness: one master seed, with independent Philox substreams derived
through `numpy.random.SeedSequence` spawn keys.  Identical seeds give
identical transcripts on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from .operators import (
    as_operator,
    maximally_mixed,
    require_hermitian,
    validate_density,
)
from .pauli import (
    FourierTable,
    DegreeSet,
    PauliString,
    classical_embedding,
    fourier_coefficient,
    parse_truth_table,
    pauli_apply_left,
    pauli_apply_right,
    pauli_expectation,
    pauli_matrix,
    synthesize,
)
from .compatibility import is_clique

RNG_ALGORITHM = "philox4x64 keyed by numpy SeedSequence spawn keys"

# Substream name space used by the learning pipeline.
STREAM_DRAW = 0
STREAM_SHUFFLE = 1
STREAM_MEASURE = 2
STREAM_TEST = 3

SIGN_OPERATOR_TOL = 1e-8
MARGINAL_TOL = 1e-8
PROB_CLAMP_WINDOW = 1e-9
PROB_HARD_FLOOR = -1e-6


@dataclass(frozen=True)
class RandomStreams:
    """A master seed with cheap, independent, order-insensitive substreams.

    ``generator(*key)`` returns a fresh Philox generator for the integer key
    path; distinct keys give statistically independent streams and the same
    (seed, key) always reproduces the same sequence on any platform.
    """

    seed: int
    algorithm = RNG_ALGORITHM

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seeds must be nonnegative integers")

    def generator(self, *key: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.Philox(ss))


def coerce_streams(rng: "RandomStreams | int") -> RandomStreams:
    if isinstance(rng, RandomStreams):
        return rng
    return RandomStreams(int(rng))


def labeling_operator(d: int) -> np.ndarray:
    """The +-1 diagonal joint-system operator whose phase encodes the label.

    Acts on d feature qubits plus one trailing label qubit, sending the basis
    state with label ``y`` to ``-(-1)^y`` times itself.  Label 1 therefore
    lives in the +1 eigenspace.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    return np.kron(np.eye(1 << d, dtype=np.complex128), np.diag([-1.0 + 0j, 1.0 + 0j]))


def _label_sign(label: int) -> float:
    # -(-1)^y: label 1 -> +1, label 0 -> -1
    return 1.0 if label == 1 else -1.0


@dataclass(frozen=True)
class LabeledSample:
    """One training sample: a classical label and the feature-system state."""

    label: int
    state: np.ndarray


@dataclass(frozen=True)
class SampleSource:
    """Distribution over labeled samples.

    ``p0``/``rho0``/``rho1`` describe the draw: the label is 0 with
    probability ``p0`` and the state is the matching conditional state.  With
    ``flip_rate`` > 0 the reported label is flipped after the draw with that
    probability while the state is kept, which realizes label noise without
    touching the feature marginal.
    """

    kind: str
    d: int
    p0: float
    rho0: np.ndarray
    rho1: np.ndarray
    flip_rate: float = 0.0
    maximally_mixed: bool = False
    degenerate: bool = False

    @property
    def p1(self) -> float:
        return 1.0 - self.p0

    @cached_property
    def label_diff(self) -> np.ndarray:
        """Effective signed mixture ``p1' rho1' - p0' rho0'`` after label flips."""
        return (1.0 - 2.0 * self.flip_rate) * (self.p1 * self.rho1 - self.p0 * self.rho0)

    @cached_property
    def labeling_xop(self) -> np.ndarray:
        """Feature-system operator whose expansion gives the exact coefficients.

        Equals ``2^d`` times :attr:`label_diff`; for a source built from a
        +-1 operator this recovers that operator (scaled by ``1 - 2 eta``
        under label noise).
        """
        return (1 << self.d) * self.label_diff

    def exact_coefficient(self, s: PauliString) -> float:
        """Ground-truth coefficient ``tr(sigma^s (p1' rho1' - p0' rho0'))``."""
        return fourier_coefficient(self.labeling_xop, s)

    def exact_table(self, strings) -> FourierTable:
        return FourierTable(self.d, {s: self.exact_coefficient(s) for s in strings})

    def with_flip_rate(self, eta: float) -> "SampleSource":
        """Same draw distribution with the label-flip rate replaced by ``eta``."""
        if not 0.0 <= eta < 0.5:
            raise ValueError(f"flip rate must lie in [0, 0.5), got {eta}")
        kind = self.kind if eta == self.flip_rate else "noisy"
        return replace(self, flip_rate=eta, kind=kind)


def _mixture_is_maximally_mixed(p0: float, rho0: np.ndarray, rho1: np.ndarray, d: int) -> bool:
    mix = p0 * rho0 + (1.0 - p0) * rho1
    return bool(np.abs(mix - maximally_mixed(d)).max() <= MARGINAL_TOL)


def make_realizable_source(f_op, *, tol: float = SIGN_OPERATOR_TOL) -> SampleSource:
    """Source whose label is a deterministic function of a +-1 operator's eigenspace.

    The conditional states are the normalized eigenprojections (label 1 on the
    +1 side), which makes the feature marginal maximally mixed and the optimal
    loss zero.  An operator with an empty eigenspace yields a degenerate
    source with the label probability pinned to 0 or 1.
    """
    f_op = require_hermitian(f_op)
    n = f_op.shape[0]
    d = n.bit_length() - 1
    if 1 << d != n:
        raise ValueError(f"operator dimension {n} is not a power of two")
    defect = float(np.abs(f_op @ f_op - np.eye(n)).max())
    if defect > tol:
        raise ValueError(
            f"not a +-1 operator: max |F^2 - I| = {defect:.3e} > {tol:.1e}"
        )
    w, v = np.linalg.eigh(f_op)
    plus = v[:, w > 0]
    minus = v[:, w <= 0]
    n_plus, n_minus = plus.shape[1], minus.shape[1]
    p1 = n_plus / n
    degenerate = n_plus == 0 or n_minus == 0
    rho1 = plus @ plus.conj().T / n_plus if n_plus else maximally_mixed(d)
    rho0 = minus @ minus.conj().T / n_minus if n_minus else maximally_mixed(d)
    return SampleSource(
        kind="realizable",
        d=d,
        p0=1.0 - p1,
        rho0=rho0,
        rho1=rho1,
        maximally_mixed=_mixture_is_maximally_mixed(1.0 - p1, rho0, rho1, d),
        degenerate=degenerate,
    )


def make_noisy_source(f_op, eta: float, *, tol: float = SIGN_OPERATOR_TOL) -> SampleSource:
    """Realizable source with labels flipped after the draw at rate ``eta``.

    Every exact coefficient shrinks by ``1 - 2 eta`` and the optimal loss over
    all measurements becomes exactly ``eta``.
    """
    if not 0.0 <= eta < 0.5:
        raise ValueError(f"eta must lie in [0, 0.5), got {eta}")
    return make_realizable_source(f_op, tol=tol).with_flip_rate(eta)


def make_classical_source(truth_table) -> SampleSource:
    """Source realizing a classical Boolean labeling of basis states.

    Samples are uniform computational-basis mixtures over the preimages of
    each label; classical PAC learning under the uniform input distribution
    embeds this way.
    """
    if isinstance(truth_table, str):
        truth_table = parse_truth_table(truth_table)
    source = make_realizable_source(classical_embedding(truth_table))
    return replace(source, kind="classical")


def make_custom_source(p0: float, rho0, rho1) -> SampleSource:
    """Fully agnostic source from explicit label probabilities and states."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"p0 must lie in [0, 1], got {p0}")
    rho0 = as_operator(rho0)
    rho1 = as_operator(rho1)
    if rho0.shape != rho1.shape:
        raise ValueError(f"state dimensions differ: {rho0.shape} vs {rho1.shape}")
    n = rho0.shape[0]
    d = n.bit_length() - 1
    if 1 << d != n:
        raise ValueError(f"state dimension {n} is not a power of two")
    for name, rho in (("rho0", rho0), ("rho1", rho1)):
        problems = validate_density(rho)
        if problems:
            raise ValueError(f"{name} is not a valid density operator: "
                             + "; ".join(map(str, problems)))
    return SampleSource(
        kind="custom",
        d=d,
        p0=float(p0),
        rho0=rho0,
        rho1=rho1,
        maximally_mixed=_mixture_is_maximally_mixed(p0, rho0, rho1, d),
        degenerate=p0 in (0.0, 1.0),
    )


def draw_sample(source: SampleSource, rng: np.random.Generator) -> LabeledSample:
    """Draw one labeled sample; the state always matches the pre-flip label."""
    base = 0 if rng.random() < source.p0 else 1
    label = base
    if source.flip_rate > 0.0 and rng.random() < source.flip_rate:
        label = 1 - base
    return LabeledSample(label, source.rho0 if base == 0 else source.rho1)


def draw_samples(source: SampleSource, n: int, rng: np.random.Generator) -> list[LabeledSample]:
    """Draw n samples in bulk: n label uniforms first, then n flip uniforms."""
    if n < 1:
        raise ValueError("n must be >= 1")
    bases = (rng.random(n) >= source.p0).astype(np.int8)
    labels = bases.copy()
    if source.flip_rate > 0.0:
        flips = rng.random(n) < source.flip_rate
        labels = np.where(flips, 1 - bases, bases).astype(np.int8)
    states = (source.rho0, source.rho1)
    return [LabeledSample(int(y), states[b]) for y, b in zip(labels, bases)]


def estimation_observable(s: PauliString) -> tuple[np.ndarray, np.ndarray]:
    """Joint-system projective pair estimating one expansion coefficient.

    Returns the (+1, -1)-outcome effects ``(I -+ sigma^{s||3}) / 2`` on the
    feature system extended by the label qubit; both are projections and the
    outcome mean over the sample distribution equals the coefficient.
    """
    e = pauli_matrix(s.extended(3))
    n = e.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    return (eye - e) / 2.0, (eye + e) / 2.0


def _checked_probability(p: float) -> float:
    if p < PROB_HARD_FLOOR:
        raise ValueError(f"outcome probability {p:.3e} below {PROB_HARD_FLOOR:.1e}; broken POVM upstream")
    return min(max(p, 0.0), 1.0)


def measure(
    state, effects: Sequence[np.ndarray], rng: np.random.Generator
) -> tuple[int, np.ndarray]:
    """Sample one outcome of a projective POVM and return the collapsed state.

    The outcome is the effect index; probabilities observed outside
    ``[-1e-9, 1 + 1e-9]`` are clamped, and anything below the hard floor is an
    error rather than a sample.
    """
    state = as_operator(state)
    probs = [
        _checked_probability(float(np.einsum("ij,ji->", e, state).real))
        for e in effects
    ]
    u = rng.random()
    acc = 0.0
    outcome = len(effects) - 1
    for v, p in enumerate(probs):
        acc += p
        if u < acc:
            outcome = v
            break
    eff = effects[outcome]
    post = eff @ state @ eff
    tr = float(np.trace(post).real)
    if tr <= 0.0:
        raise ValueError("post-measurement state has nonpositive trace")
    return outcome, post / tr


def _require_batch(batch: DegreeSet):
    if len(batch) == 0:
        raise ValueError("batch must contain at least one string")
    if not is_clique(batch):
        raise ValueError("batch strings do not mutually commute; not jointly measurable")


def measure_batch_groups(
    groups: Sequence[tuple[np.ndarray, float, np.ndarray]],
    batch: DegreeSet,
    uniforms: np.ndarray,
) -> np.ndarray:
    """Sequentially measure a commuting batch over groups of identical samples.

    ``groups`` lists ``(state, label_sign, sample_indices)`` triples whose
    indices partition the rows of ``uniforms`` (one row per sample, one column
    per batch string).  Sample ``i`` gets outcome +1 on string ``l`` exactly
    when ``uniforms[i, l]`` falls below the +1 branch probability of its
    group's current collapsed state, so results do not depend on how samples
    are grouped or scheduled.  Returns the +-1 outcome matrix.
    """
    _require_batch(batch)
    n_total, m = uniforms.shape
    if m != len(batch):
        raise ValueError("uniforms must have one column per batch string")
    outcomes = np.empty((n_total, m), dtype=np.int8)

    states = np.stack([g[0] for g in groups]).astype(np.complex128)
    signs = np.array([g[1] for g in groups], dtype=float)
    index_sets = [np.asarray(g[2], dtype=np.intp) for g in groups]

    for col, s in enumerate(batch):
        expect = pauli_expectation(s, states).real
        p_plus = np.array([_checked_probability(0.5 * (1.0 + c * t))
                           for c, t in zip(signs, expect)])
        plus_sets: list[np.ndarray] = []
        minus_sets: list[np.ndarray] = []
        for g, idx in enumerate(index_sets):
            took_plus = uniforms[idx, col] < p_plus[g]
            outcomes[idx, col] = np.where(took_plus, 1, -1)
            plus_sets.append(idx[took_plus])
            minus_sets.append(idx[~took_plus])
        if col == m - 1:
            break
        # collapse: (I + w c sigma)/2 applied on both sides, renormalized
        left = pauli_apply_left(s, states)
        right = pauli_apply_right(s, states)
        both = pauli_apply_left(s, right)
        coef = signs[:, None, None]
        plus_states = 0.25 * (states + coef * (left + right) + both)
        minus_states = 0.25 * (states - coef * (left + right) + both)
        next_states = []
        next_signs = []
        next_indices = []
        for g in range(len(index_sets)):
            for branch_states, idx in ((plus_states, plus_sets[g]), (minus_states, minus_sets[g])):
                if idx.size == 0:
                    continue
                st = branch_states[g]
                tr = float(np.trace(st).real)
                if tr <= 0.0:
                    raise ValueError("collapsed onto a zero-probability branch")
                next_states.append(st / tr)
                next_signs.append(signs[g])
                next_indices.append(idx)
        states = np.stack(next_states)
        signs = np.array(next_signs, dtype=float)
        index_sets = next_indices
    return outcomes


def measure_batch(sample: LabeledSample, batch: DegreeSet, rng: np.random.Generator) -> np.ndarray:
    """Joint +-1 outcomes of a commuting batch on one sample.

    Equivalent in law to measuring the fine-grained product effects; realized
    as sequential measurement with collapse, consuming one uniform per string.
    """
    _require_batch(batch)
    uniforms = rng.random(len(batch))[None, :]
    group = (sample.state, _label_sign(sample.label), np.array([0], dtype=np.intp))
    return measure_batch_groups([group], batch, uniforms)[0]


def group_samples(samples: Sequence[LabeledSample]) -> list[tuple[np.ndarray, float, np.ndarray]]:
    """Group samples sharing the same state object and label for bulk measurement."""
    buckets: dict[tuple[int, int], list[int]] = {}
    states: dict[tuple[int, int], np.ndarray] = {}
    for i, sample in enumerate(samples):
        key = (id(sample.state), sample.label)
        buckets.setdefault(key, []).append(i)
        states[key] = sample.state
    return [
        (states[key], _label_sign(key[1]), np.array(idx, dtype=np.intp))
        for key, idx in buckets.items()
    ]


# ---------------------------------------------------------------------------
# Text formats: matrices and source specification files.
# ---------------------------------------------------------------------------


def matrix_to_text(m: np.ndarray) -> str:
    """Plain-text complex matrix, row-major: one row per line, repr entries."""
    m = as_operator(m)
    return "\n".join(" ".join(repr(complex(v)) for v in row) for row in m) + "\n"


def matrix_from_text(text: str) -> np.ndarray:
    rows = [
        [complex(tok) for tok in ln.split()]
        for ln in text.splitlines()
        if ln.strip()
    ]
    return as_operator(np.array(rows, dtype=np.complex128))


def save_matrix(path, m: np.ndarray) -> None:
    Path(path).write_text(matrix_to_text(m), encoding="utf-8")


def load_matrix(path) -> np.ndarray:
    return matrix_from_text(Path(path).read_text(encoding="utf-8"))


def parse_key_values(text: str) -> dict[str, str]:
    """Parse the line-oriented ``key = value`` format with ``#`` comments."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key = key.strip()
        if key in out:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_source(path) -> SampleSource:
    """Load a source specification file.

    The file is ``key = value`` text with a ``kind`` of ``realizable``,
    ``noisy``, ``classical``, or ``custom``.  Referenced coefficient-table and
    matrix files are resolved relative to the specification file.
    """
    path = Path(path)
    fields = parse_key_values(path.read_text(encoding="utf-8"))
    try:
        kind = fields["kind"]
        d = int(fields["d"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing required field {exc}") from exc
    base = path.parent
    if kind in ("realizable", "noisy"):
        table = FourierTable.load(base / fields["ftab"])
        if table.d != d:
            raise ValueError(f"{path}: table dimension {table.d} != d={d}")
        f_op = synthesize(table)
        if kind == "noisy":
            return make_noisy_source(f_op, float(fields["eta"]))
        return make_realizable_source(f_op)
    if kind == "classical":
        bits = parse_truth_table(fields["truth_table"])
        if len(bits) != 1 << d:
            raise ValueError(f"{path}: truth table length {len(bits)} != 2^{d}")
        return make_classical_source(bits)
    if kind == "custom":
        source = make_custom_source(
            float(fields["p0"]),
            load_matrix(base / fields["rho0"]),
            load_matrix(base / fields["rho1"]),
        )
        if source.d != d:
            raise ValueError(f"{path}: matrix dimension implies d={source.d}, file says {d}")
        if "eta" in fields:
            source = source.with_flip_rate(float(fields["eta"]))
        return source
    raise ValueError(f"{path}: unknown source kind {kind!r}")
