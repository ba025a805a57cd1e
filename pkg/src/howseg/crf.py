"""Open-world label assignment over prototypes via a dense CRF.

Unary potentials come from voting on previous point predictions, calibrated
by clicks; pairwise potentials couple cosine-similar prototypes. Inference is
synchronous mean-field with Potts label compatibility: similar prototypes are
pushed toward agreeing labels, with disagreement penalized proportionally to
the similarity kernel. An exact enumeration oracle over the same Potts energy
backs the tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import AnnotationSet, PrototypeSet, ValidationError
from .prototypes import Correspondence

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-6   # probability floor applied before -log
DEFAULT_LAMBDA = 1.0     # unary/pairwise balance
DEFAULT_DELTA = 1.0      # similarity bandwidth
DEFAULT_ITERS = 10

_ENUMERATION_LIMIT = 1_048_576


@dataclass
class UnaryField:
    """Per-prototype class probabilities with click calibration marks."""

    probs: np.ndarray               # (K, L) rows
    calibrated_mask: np.ndarray     # (K,) bool
    calibrated_labels: np.ndarray   # (K,) int, -1 where uncalibrated
    epsilon_floor: float = DEFAULT_EPSILON
    conflicts: tuple = ()           # prototype indices hit by differing clicks

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.calibrated_mask = np.asarray(self.calibrated_mask, dtype=bool)
        self.calibrated_labels = np.asarray(self.calibrated_labels, dtype=np.int64)
        if self.probs.ndim != 2:
            raise ValidationError("unary probs must be (K, L)")
        rowsum = self.probs.sum(axis=1)
        if np.any(np.abs(rowsum - 1.0) > 1e-6):
            raise ValidationError("unary rows must sum to 1")
        if np.any(self.probs < self.epsilon_floor * (1.0 - 1e-9)):
            raise ValidationError("unary entries below the probability floor")

    @property
    def num_prototypes(self) -> int:
        return self.probs.shape[0]

    @property
    def num_labels(self) -> int:
        return self.probs.shape[1]

    def potentials(self) -> np.ndarray:
        """Negative log probabilities."""
        return -np.log(self.probs)


@dataclass
class PairwiseField:
    """Symmetric similarity-kernel coupling between prototype pairs."""

    weights: np.ndarray   # (K, K), zero diagonal
    delta: float = DEFAULT_DELTA
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        k = self.weights.shape[0]
        if self.weights.shape != (k, k):
            raise ValidationError("pairwise weights must be square")
        if not np.allclose(self.weights, self.weights.T):
            raise ValidationError("pairwise weights must be symmetric")
        if np.any(np.diag(self.weights) != 0):
            raise ValidationError("pairwise diagonal must be zero")
        off = self.weights[~np.eye(k, dtype=bool)]
        if off.size and (np.any(off < 0) or np.any(off > 1)):
            # the similarity kernel itself never reaches 0, but an all-zero
            # field is the legitimate decoupled case
            raise ValidationError("off-diagonal weights must lie in [0, 1]")
        if self.delta <= 0:
            raise ValidationError("delta must be > 0")
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")


@dataclass
class MeanFieldState:
    q: np.ndarray        # (K, L) marginals
    iteration: int

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float64)
        rowsum = self.q.sum(axis=1)
        if np.any(self.q < 0) or np.any(np.abs(rowsum - 1.0) > 1e-6):
            raise ValidationError("marginal rows must be distributions")


def voting_matrix(point_labels: np.ndarray, corr: Correspondence, num_classes: int) -> np.ndarray:
    """Count predicted classes per prototype: V[c, k] = |{i : label_i = c, i -> k}|."""
    point_labels = np.asarray(point_labels, dtype=np.int64)
    if point_labels.shape != corr.assignment.shape:
        raise ValidationError("labels and correspondence cover different frames")
    if np.any(point_labels < 0) or np.any(point_labels >= num_classes):
        raise ValidationError("point label out of range")
    votes = np.zeros((num_classes, corr.num_prototypes), dtype=np.float64)
    np.add.at(votes, (point_labels, corr.assignment), 1.0)
    return votes


def augment_voting(votes: np.ndarray, novel_count: int, unknown_row: int) -> np.ndarray:
    """Extend a voting matrix with rows for novel classes.

    Base and unknown rows (and any novel rows already present) are copied;
    each newly appended novel row equals the unknown row minus one vote
    elementwise, so a prototype dominated by unknown votes splits its mass
    between the unknown class and each novel candidate at a fixed ratio.
    """
    votes = np.asarray(votes, dtype=np.float64)
    if novel_count < 0:
        raise ValidationError("novel_count must be >= 0")
    existing_novel = votes.shape[0] - (unknown_row + 1)
    if existing_novel < 0:
        raise ValidationError("unknown_row outside the voting matrix")
    if novel_count < existing_novel:
        raise ValidationError("novel_count below rows already present")
    to_add = novel_count - existing_novel
    if to_add == 0:
        return votes.copy()
    novel_rows = np.tile(votes[unknown_row] - 1.0, (to_add, 1))
    return np.vstack([votes, novel_rows])


def unary_from_votes(
    votes: np.ndarray,
    annotations: AnnotationSet,
    corr: Correspondence,
    eps: float = DEFAULT_EPSILON,
) -> UnaryField:
    """Column-softmax the voting matrix, then pin click-calibrated rows.

    Each clicked point replaces its prototype's row with the eps-floored
    one-hot of the click label. When clicks with different labels hit one
    prototype the most recent click wins and the conflict is reported (such
    prototypes are disambiguation candidates upstream).
    """
    votes = np.asarray(votes, dtype=np.float64)
    num_labels, k = votes.shape
    if k != corr.num_prototypes:
        raise ValidationError("voting matrix and correspondence disagree on K")

    shifted = votes - votes.max(axis=0, keepdims=True)
    exp = np.exp(shifted)
    probs = (exp / exp.sum(axis=0, keepdims=True)).T  # (K, L)

    # probability floor, applied so rows still sum to 1 within tolerance
    probs = np.clip(probs, eps, None)
    probs /= probs.sum(axis=1, keepdims=True)
    probs = np.clip(probs, eps, None)

    mask = np.zeros(k, dtype=bool)
    pinned = np.full(k, -1, dtype=np.int64)
    conflicts = set()
    for click in annotations:  # oldest applied first; later clicks win
        p = int(corr.assignment[click.point_index])
        if click.label >= num_labels:
            raise ValidationError("click label outside the voting label space")
        if mask[p] and pinned[p] != click.label:
            conflicts.add(p)
            log.warning(
                "conflicting clicks on prototype %d: %d replaces %d",
                p, click.label, pinned[p],
            )
        mask[p] = True
        pinned[p] = click.label
    for p in np.flatnonzero(mask):
        row = np.full(num_labels, eps, dtype=np.float64)
        row[pinned[p]] = 1.0 - eps * (num_labels - 1)
        probs[p] = row

    return UnaryField(
        probs=probs,
        calibrated_mask=mask,
        calibrated_labels=pinned,
        epsilon_floor=eps,
        conflicts=tuple(sorted(conflicts)),
    )


def pairwise_from_prototypes(
    prototypes: PrototypeSet,
    delta: float = DEFAULT_DELTA,
    lam: float = DEFAULT_LAMBDA,
) -> PairwiseField:
    """Gaussian kernel of the cosine-similarity gap between prototype pairs."""
    if delta <= 0:
        raise ValidationError("delta must be > 0")
    cos = prototypes.vectors @ prototypes.vectors.T
    weights = np.exp(-((1.0 - cos) ** 2) / (2.0 * delta * delta))
    weights = (weights + weights.T) / 2.0
    np.fill_diagonal(weights, 0.0)
    return PairwiseField(weights=weights, delta=delta, lam=lam)


def mean_field(
    unary: UnaryField,
    pairwise: PairwiseField,
    iters: int = DEFAULT_ITERS,
    record_history: bool = False,
):
    """Synchronous mean-field updates with Potts label compatibility.

    Marginals initialize proportional to exp(-phi). Each iteration passes
    messages m_i(l) = sum_{j != i} w_ij Q_j(l), then updates
    Q_i(l) <- exp(-phi_i(l) - lam * sum_{l' != l} m_i(l')) with row
    normalization. Runs exactly ``iters`` iterations.

    Returns the final state, or (state, history) when ``record_history``
    is set; the history includes the initialization state.
    """
    if iters < 0:
        raise ValidationError("iters must be >= 0")
    phi = unary.potentials()
    if not np.all(np.isfinite(phi)):
        raise ValidationError("non-finite unary potentials")
    if pairwise.weights.shape[0] != unary.num_prototypes:
        raise ValidationError("unary and pairwise disagree on K")

    q = unary.probs / unary.probs.sum(axis=1, keepdims=True)
    history = [MeanFieldState(q=q.copy(), iteration=0)]
    lam = pairwise.lam
    for it in range(iters):
        messages = pairwise.weights @ q                      # (K, L)
        disagree = messages.sum(axis=1, keepdims=True) - messages
        exponent = -phi - lam * disagree
        exponent -= exponent.max(axis=1, keepdims=True)
        q = np.exp(exponent)
        q /= q.sum(axis=1, keepdims=True)
        if record_history:
            history.append(MeanFieldState(q=q.copy(), iteration=it + 1))
    state = MeanFieldState(q=q, iteration=iters)
    if record_history:
        return state, history
    return state


def decode(state: MeanFieldState, unary: UnaryField) -> np.ndarray:
    """MAP decode of the marginals with the click hard-constraint override.

    Ties break to the lowest label index; calibrated prototypes always emit
    their clicked label so user clicks are never contradicted in the output.
    """
    labels = np.argmax(state.q, axis=1).astype(np.int64)
    pinned = unary.calibrated_mask
    labels[pinned] = unary.calibrated_labels[pinned]
    return labels


def potts_energy(labels: np.ndarray, unary: UnaryField, pairwise: PairwiseField) -> float:
    """Potts energy of one labeling: unary -log terms plus weighted disagreements."""
    labels = np.asarray(labels, dtype=np.int64)
    phi = unary.potentials()
    k = unary.num_prototypes
    energy = float(phi[np.arange(k), labels].sum())
    differ = labels[:, None] != labels[None, :]
    energy += pairwise.lam * float(np.sum(np.triu(differ, 1) * np.triu(pairwise.weights, 1)))
    return energy


def exact_map_oracle(unary: UnaryField, pairwise: PairwiseField):
    """Exhaustive minimizer of the Potts energy, for testing.

    Bounded to K <= 10, L <= 4 (at most ~1e6 labelings). Returns
    (labels, energy); ties resolve to the lexicographically smallest labeling.
    """
    k = unary.num_prototypes
    num_labels = unary.num_labels
    if k > 10 or num_labels > 4 or num_labels**k > _ENUMERATION_LIMIT:
        raise ValidationError("instance above the enumeration bound")
    phi = unary.potentials()

    grids = np.meshgrid(*([np.arange(num_labels)] * k), indexing="ij")
    labelings = np.stack([g.ravel() for g in grids], axis=1)  # (L^K, K)

    energies = phi[np.arange(k), labelings].sum(axis=1)
    iu, ju = np.triu_indices(k, 1)
    if iu.size:
        differ = labelings[:, iu] != labelings[:, ju]
        energies = energies + pairwise.lam * (differ * pairwise.weights[iu, ju]).sum(axis=1)

    best = int(np.argmin(energies))  # first minimum = lexicographically smallest
    return labelings[best].astype(np.int64), float(energies[best])
