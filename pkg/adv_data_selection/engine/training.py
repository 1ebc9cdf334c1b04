"""
Adversarial training loop with loss-ranked data selection.

Every mini-batch is composed from clean rows and their PGD counterparts
against the current parameters, scored by per-sample cross-entropy, and only
the selected rows are back-propagated.

Random streams are derived from the run seed:

    [seed, epoch, 0]         shuffling of the training set
    [seed, epoch, 1]         random starts of the training attack
    [policy.seed, epoch, 2]  random selection
    [seed, 3]                model initialization
    [seed, 4]                probe subset
"""

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from adv_data_selection.config import get_settings
from adv_data_selection.data.dataset import Dataset
from adv_data_selection.engine.attacks import pgd
from adv_data_selection.engine.diagnostics import (
    MinEpsReport,
    choose_probe,
    min_eps_probe,
    selection_composition,
)
from adv_data_selection.engine.numerics import (
    Model,
    forward,
    init_model,
    param_grad,
    per_sample_loss,
    predict,
    sgd_step,
)
from adv_data_selection.engine.selection import (
    ORIGIN_ADVERSARIAL,
    ORIGIN_CLEAN,
    SelectionResult,
    error_signal,
    select_all,
    select_random,
    select_top,
    update_pup,
)
from adv_data_selection.errors import InputError
from adv_data_selection.schema.records import EpochMetrics
from adv_data_selection.schema.run_config import (
    AccuracySource,
    AttackConfig,
    PupSchedule,
    SelectionKind,
    TrainConfig,
    TrainingMode,
)

EpochCallback = Callable[[EpochMetrics, Model], None]


@dataclass(frozen=True)
class BatchComposition:
    """
    Rows of one training step.

    In the mixed modes rows 0..b'-1 are the adversarial counterparts of rows
    b'..2b'-1, and ``source_indices`` repeats the clean indices twice.
    """

    inputs: np.ndarray
    labels: np.ndarray
    origins: np.ndarray
    source_indices: np.ndarray

    @property
    def size(self) -> int:
        return int(self.labels.shape[0])

    @property
    def adversarial_count(self) -> int:
        return int(np.count_nonzero(self.origins == ORIGIN_ADVERSARIAL))


def compose_batch(
    model: Model,
    dataset: Dataset,
    indices: Sequence[int],
    attack: AttackConfig,
    mode: TrainingMode,
    rng: Optional[np.random.Generator] = None,
) -> BatchComposition:
    """
    Build the training rows for the clean samples at ``indices``.

    standard: the clean rows. robust: their PGD counterparts only. ds_robust and
    random_robust: adversarial counterparts followed by the clean rows.

    Raises:
        InputError: If an index is out of range or none is given
    """
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size == 0:
        raise InputError("a batch needs at least one index")
    if idx.min() < 0 or idx.max() >= len(dataset):
        raise InputError(f"batch indices must lie in 0..{len(dataset) - 1}")
    clean = dataset.features[idx]
    labels = dataset.labels[idx]
    mode = TrainingMode(mode)
    if mode == TrainingMode.STANDARD:
        return BatchComposition(
            inputs=clean.copy(),
            labels=labels.copy(),
            origins=np.full(idx.size, ORIGIN_CLEAN),
            source_indices=idx,
        )
    adversarial = pgd(model, clean, labels, attack, rng)
    if mode == TrainingMode.ROBUST:
        return BatchComposition(
            inputs=adversarial,
            labels=labels.copy(),
            origins=np.full(idx.size, ORIGIN_ADVERSARIAL),
            source_indices=idx,
        )
    return BatchComposition(
        inputs=np.vstack([adversarial, clean]),
        labels=np.concatenate([labels, labels]),
        origins=np.concatenate([np.full(idx.size, ORIGIN_ADVERSARIAL), np.full(idx.size, ORIGIN_CLEAN)]),
        source_indices=np.concatenate([idx, idx]),
    )


def _chunks(count: int, chunk_size: int) -> List[Tuple[int, int]]:
    return [(start, min(start + chunk_size, count)) for start in range(0, count, chunk_size)]


def evaluate(
    model: Model,
    dataset: Dataset,
    attack: Optional[AttackConfig] = None,
    rng: Optional[np.random.Generator] = None,
    chunk_size: Optional[int] = None,
) -> float:
    """
    Fraction of rows whose argmax prediction equals the label.

    With ``attack`` the rows are PGD-attacked first (robust accuracy). Without a
    generator the attack runs without a random start.
    """
    if len(dataset) == 0:
        logger.warning("Evaluating on an empty dataset; reporting accuracy 0")
        return 0.0
    if attack is not None and attack.random_start and rng is None:
        attack = attack.model_copy(update={"random_start": False})
    chunk_size = chunk_size or get_settings().eval_chunk_size
    correct = 0
    for start, stop in _chunks(len(dataset), chunk_size):
        x = dataset.features[start:stop]
        y = dataset.labels[start:stop]
        if attack is not None:
            x = pgd(model, x, y, attack, rng)
        correct += int(np.count_nonzero(predict(model, x) == y))
    return correct / len(dataset)


def clean_statistics(model: Model, dataset: Dataset, chunk_size: Optional[int] = None) -> Tuple[float, float]:
    """(accuracy, mean cross-entropy) on unperturbed rows."""
    if len(dataset) == 0:
        return 0.0, 0.0
    chunk_size = chunk_size or get_settings().eval_chunk_size
    correct, loss_sum = 0, 0.0
    for start, stop in _chunks(len(dataset), chunk_size):
        x = dataset.features[start:stop]
        y = dataset.labels[start:stop]
        correct += int(np.count_nonzero(predict(model, x) == y))
        loss_sum += float(per_sample_loss(model, x, y).sum())
    return correct / len(dataset), loss_sum / len(dataset)


@dataclass
class EpochState:
    """Inputs of one epoch besides the model and the config."""

    epoch: int
    pup: float
    eval_dataset: Optional[Dataset] = None
    probe: Optional[Dataset] = None


def _select(
    kind: SelectionKind,
    batch: BatchComposition,
    model: Model,
    pup: float,
    rng: np.random.Generator,
    literal: bool,
) -> SelectionResult:
    if kind == SelectionKind.ALL:
        return select_all(batch.size)
    if kind == SelectionKind.RANDOM:
        return select_random(batch.size, pup, rng)
    scores = error_signal(forward(model, batch.inputs), batch.labels, literal=literal)
    return select_top(scores, pup)


def train_epoch(model: Model, dataset: Dataset, cfg: TrainConfig, state: EpochState) -> Tuple[Model, EpochMetrics]:
    """
    One pass over a freshly shuffled training set.

    Per batch: compose, score, select, back-propagate the selected rows only,
    and take an SGD step. Metrics are measured with the final parameters of
    the epoch on ``state.eval_dataset`` (the training set when absent).

    Args:
        model: Parameters at the start of the epoch
        dataset: Training set
        cfg: Training configuration
        state: Epoch index, selected fraction, eval and probe sets

    Returns:
        Updated model and the epoch's metrics
    """
    if len(dataset) == 0:
        raise InputError("training set is empty")
    started = time.perf_counter()
    shuffle_rng = np.random.default_rng([cfg.seed, state.epoch, 0])
    attack_rng = np.random.default_rng([cfg.seed, state.epoch, 1])
    select_rng = np.random.default_rng([cfg.policy.seed, state.epoch, 2])
    kind = cfg.selection_kind()
    pup = 1.0 if kind == SelectionKind.ALL else state.pup
    order = shuffle_rng.permutation(len(dataset))
    per_batch = cfg.indices_per_batch()

    clean_total = adversarial_total = rows = batches = 0
    for start in range(0, len(dataset), per_batch):
        batch = compose_batch(model, dataset, order[start : start + per_batch], cfg.attack, cfg.mode, attack_rng)
        selection = _select(kind, batch, model, pup, select_rng, cfg.policy.literal_error_signal)
        clean_count, adversarial_count = selection_composition(selection, batch)
        grads = param_grad(model, batch.inputs, batch.labels, selection.mask())
        model = sgd_step(model, grads, cfg.learning_rate)
        clean_total += clean_count
        adversarial_total += adversarial_count
        rows += batch.size
        batches += 1
        logger.debug(
            f"epoch {state.epoch} batch {batches}: {selection.size}/{batch.size} selected "
            f"({adversarial_count} adversarial)"
        )

    eval_set = state.eval_dataset if state.eval_dataset is not None else dataset
    standard_accuracy = evaluate(model, eval_set)
    robust_accuracy = evaluate(model, eval_set, cfg.eval_attack)
    train_accuracy, train_loss = clean_statistics(model, dataset)
    probe_report = (
        min_eps_probe(model, state.probe, cfg.probe_grid, cfg.eval_attack)
        if state.probe is not None and len(state.probe)
        else None
    )
    metrics = EpochMetrics(
        epoch=state.epoch,
        standard_accuracy=standard_accuracy,
        robust_accuracy=robust_accuracy,
        train_accuracy=train_accuracy,
        train_loss=train_loss,
        effective_pup=pup,
        selected_clean_count=clean_total,
        selected_adversarial_count=adversarial_total,
        mean_selected_clean=clean_total / batches,
        mean_selected_adversarial=adversarial_total / batches,
        backward_pass_count=clean_total + adversarial_total,
        rows_processed=rows,
        batch_count=batches,
        mean_min_eps=probe_report.mean if probe_report else None,
        min_eps_flipped=probe_report.flipped if probe_report else None,
        wall_time=time.perf_counter() - started,
    )
    logger.info(
        f"Epoch {state.epoch}: std acc {standard_accuracy:.4f}, robust acc {robust_accuracy:.4f}, "
        f"train loss {train_loss:.4f}, pup {pup:.4f}, backward {metrics.backward_pass_count}/{rows}"
    )
    return model, metrics


@dataclass
class TrainingResult:
    """Outcome of a full training run."""

    model: Model
    history: List[EpochMetrics] = field(default_factory=list)
    initial_probe: Optional[MinEpsReport] = None
    stopped_early: bool = False

    @property
    def final(self) -> Optional[EpochMetrics]:
        return self.history[-1] if self.history else None

    @property
    def backward_pass_total(self) -> int:
        return sum(m.backward_pass_count for m in self.history)


class AdversarialTrainer:
    """
    Runs the epoch loop of one configuration.

    Carries the selected fraction between epochs (fixed or adaptive), the
    probe subset, and the early-stopping state.
    """

    def __init__(
        self,
        cfg: TrainConfig,
        train_set: Dataset,
        eval_set: Optional[Dataset] = None,
        on_epoch: Optional[EpochCallback] = None,
    ):
        """
        Args:
            cfg: Training configuration
            train_set: Rows to train on
            eval_set: Rows for standard/robust accuracy; defaults to train_set
            on_epoch: Called with every epoch's metrics and model
        """
        if len(train_set) == 0:
            raise InputError("training set is empty")
        if train_set.classes_present() < 2:
            logger.warning("Training set holds fewer than two classes")
        self.cfg = cfg
        self.train_set = train_set
        self.eval_set = eval_set if eval_set is not None and len(eval_set) else train_set
        self.on_epoch = on_epoch
        self.probe = choose_probe(self.eval_set, cfg.probe_size, cfg.seed) if cfg.probe_size else None

    def initial_model(self) -> Model:
        """Fresh model sized for the training set."""
        dims = [self.train_set.input_dim, *self.cfg.hidden_dims, self.train_set.class_count]
        return init_model(dims, np.random.default_rng([self.cfg.seed, 3]))

    def _next_pup(self, pup: float, metrics: EpochMetrics) -> float:
        policy = self.cfg.policy
        if policy.schedule != PupSchedule.ADAPTIVE or self.cfg.selection_kind() == SelectionKind.ALL:
            return pup
        accuracy = {
            AccuracySource.STANDARD: metrics.standard_accuracy,
            AccuracySource.ROBUST: metrics.robust_accuracy,
            AccuracySource.TRAIN: metrics.train_accuracy,
        }[policy.accuracy_source]
        return update_pup(pup, accuracy, policy.floor, batch_size=self.cfg.rows_per_step())

    def _probe_due(self, epoch: int) -> bool:
        return epoch % self.cfg.probe_every == 0 or epoch == self.cfg.epochs

    def fit(self, model: Optional[Model] = None) -> TrainingResult:
        """
        Train for ``cfg.epochs`` epochs or until early stopping.

        Args:
            model: Starting parameters; a fresh model when omitted

        Returns:
            Final model, per-epoch history and the probe taken before training
        """
        cfg = self.cfg
        model = model if model is not None else self.initial_model()
        result = TrainingResult(model=model)
        if self.probe is not None:
            result.initial_probe = min_eps_probe(model, self.probe, cfg.probe_grid, cfg.eval_attack)
            logger.info(f"Probe before training: mean min eps {result.initial_probe.mean}")

        pup = cfg.policy.initial_pup()
        best_robust, stale = -1.0, 0
        logger.info(
            f"Training {cfg.mode.value} for {cfg.epochs} epochs on {len(self.train_set)} rows "
            f"(b'={cfg.batch_clean_size}, selection {cfg.selection_kind().value})"
        )
        for epoch in range(1, cfg.epochs + 1):
            state = EpochState(
                epoch=epoch,
                pup=pup,
                eval_dataset=self.eval_set,
                probe=self.probe if self.probe is not None and self._probe_due(epoch) else None,
            )
            model, metrics = train_epoch(model, self.train_set, cfg, state)
            result.model = model
            result.history.append(metrics)
            if self.on_epoch is not None:
                self.on_epoch(metrics, model)
            pup = self._next_pup(pup, metrics)

            if cfg.early_stop_patience is not None:
                if metrics.robust_accuracy > best_robust:
                    best_robust, stale = metrics.robust_accuracy, 0
                else:
                    stale += 1
                if stale >= cfg.early_stop_patience:
                    logger.warning(f"Early stop after epoch {epoch}: no robust gain for {stale} epochs")
                    result.stopped_early = True
                    break
        return result
