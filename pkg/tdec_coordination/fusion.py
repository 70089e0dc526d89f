# tdec_coordination/fusion.py
"""
Stacked generalization over per-modality SVMs.

Level 0: one RBF SVM per modality. Level 1: logistic regression over
the base decision values. The level-1 training inputs are out-of-fold
decision values from an inner leave-one-subject-out pass, so no
meta-feature comes from a base model that saw that instance's subject.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .classify import (DEFAULT_CLASSES, SvmParams, build_report, check_training_split, decision_values,
                       encode_labels, metrics, model_from_dict, model_to_dict, split_by_subject,
                       train_on_instances, FoldResult)
from .errors import AlignmentError
from .workers import map_ordered

META_LEARNING_RATE = 0.1
META_ITERATIONS = 5000
META_GRAD_TOL = 1e-8


@dataclass(frozen=True)
class StackingModel:
    base_models: dict  # modality -> SvmModel
    weights: dict  # modality -> meta weight
    intercept: float
    classes: tuple = DEFAULT_CLASSES

    def __post_init__(self):
        if len(self.base_models) < 2:
            raise ValueError("stacking needs at least two base models")
        if set(self.weights) != set(self.base_models):
            raise ValueError("meta weights and base models cover different modalities")
        if not all(np.isfinite(w) for w in self.weights.values()) or not np.isfinite(self.intercept):
            raise ValueError("meta weights must be finite")

    @property
    def modalities(self):
        return sorted(self.base_models)


def _params_for(params, modality):
    if params is None:
        return SvmParams()
    if isinstance(params, SvmParams):
        return params
    return params.get(modality, SvmParams())


def align_modalities(datasets):
    """Instances of every modality ordered by the shared (subject, segment) keys."""
    if len(datasets) < 2:
        raise ValueError("fusion needs at least two modalities")
    by_key = {}
    for modality, instances in datasets.items():
        keyed = {}
        for inst in instances:
            if inst.key in keyed:
                raise ValueError(f"duplicate instance {inst.subject_id}/{inst.segment_id} in {modality}")
            keyed[inst.key] = inst
        by_key[modality] = keyed
    all_keys = set().union(*(set(k) for k in by_key.values()))
    missing = {m: sorted(all_keys - set(keyed)) for m, keyed in by_key.items()}
    missing = {m: keys for m, keys in missing.items() if keys}
    if missing:
        raise AlignmentError(missing)

    keys = sorted(all_keys)
    for key in keys:
        labels = {by_key[m][key].label for m in by_key}
        if len(labels) > 1:
            raise ValueError(f"instance {key[0]}/{key[1]} carries different labels across modalities: {sorted(labels)}")
    return keys, {m: [by_key[m][k] for k in keys] for m in sorted(by_key)}


def fit_logistic(X, y, lr=META_LEARNING_RATE, iterations=META_ITERATIONS, tol=META_GRAD_TOL):
    """Batch gradient descent on the mean log-loss; y in {0, 1}. Returns (weights, intercept)."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.zeros(X.shape[1])
    b = 0.0
    n = X.shape[0]
    for _ in range(iterations):
        residual = expit(X @ w + b) - y
        grad_w = X.T @ residual / n
        grad_b = float(np.sum(residual)) / n
        if np.sqrt(grad_w @ grad_w + grad_b * grad_b) < tol:
            break
        w -= lr * grad_w
        b -= lr * grad_b
    return w, b


def _inner_meta_features(aligned, keys, params, classes):
    """Out-of-fold base decision values, one column per modality."""
    modalities = sorted(aligned)
    subjects = sorted({k[0] for k in keys})
    meta = np.zeros((len(keys), len(modalities)))
    for subject in subjects:
        rows = [n for n, k in enumerate(keys) if k[0] == subject]
        for col, modality in enumerate(modalities):
            train = [inst for inst in aligned[modality] if inst.subject_id != subject]
            check_training_split(train, subject, classes)
            model = train_on_instances(train, _params_for(params, modality), classes, warn=False)
            test = np.vstack([aligned[modality][n].features for n in rows])
            meta[rows, col] = decision_values(model, test)
    return meta


def stack_train(datasets, params=None, classes=DEFAULT_CLASSES):
    keys, aligned = align_modalities(datasets)
    labels = [aligned[next(iter(aligned))][n].label for n in range(len(keys))]
    y = encode_labels(labels, classes)
    if np.all(y == y[0]):
        raise ValueError("training data holds a single class")
    split_by_subject(aligned[next(iter(aligned))])

    meta = _inner_meta_features(aligned, keys, params, classes)
    weights, intercept = fit_logistic(meta, (y > 0).astype(np.float64))
    base_models = {m: train_on_instances(aligned[m], _params_for(params, m), classes, warn=False)
                   for m in sorted(aligned)}
    return StackingModel(base_models, {m: float(w) for m, w in zip(sorted(aligned), weights)},
                         float(intercept), tuple(classes))


def stack_predict(model, features):
    """(label, fused score in [0, 1]); score >= 0.5 predicts the positive class."""
    missing = sorted(set(model.base_models) - set(features))
    if missing:
        raise ValueError(f"missing features for modalities {missing}")
    z = model.intercept
    for modality in model.modalities:
        x = np.asarray(features[modality], dtype=np.float64)
        z += model.weights[modality] * float(decision_values(model.base_models[modality], x)[0])
    score = float(expit(z))
    return (model.classes[0] if score >= 0.5 else model.classes[1]), score


def fused_loso_cv(datasets, params=None, classes=DEFAULT_CLASSES, workers=1):
    keys, aligned = align_modalities(datasets)
    reference = aligned[sorted(aligned)[0]]
    encode_labels([i.label for i in reference], classes)
    subjects = split_by_subject(reference)

    def run_fold(subject):
        train = {m: [i for i in insts if i.subject_id != subject] for m, insts in aligned.items()}
        check_training_split(train[sorted(train)[0]], subject, classes)
        model = stack_train(train, params, classes)
        rows = [n for n, k in enumerate(keys) if k[0] == subject]
        predictions, scores = [], []
        for n in rows:
            label, score = stack_predict(model, {m: aligned[m][n].features for m in aligned})
            predictions.append(label)
            scores.append(score)
        labels = [reference[n].label for n in rows]
        accuracy, _ = metrics(predictions, labels, classes)
        converged = all(m.converged for m in model.base_models.values())
        return FoldResult(subject, tuple(keys[n][1] for n in rows), tuple(labels), tuple(predictions),
                          tuple(scores), accuracy, converged, model)

    return build_report(map_ordered(run_fold, subjects, workers), classes)


def stacking_to_dict(model):
    return {
        "base_models": {m: model_to_dict(model.base_models[m]) for m in model.modalities},
        "meta": {
            "weights": {m: model.weights[m] for m in model.modalities},
            "intercept": model.intercept,
        },
        "classes": list(model.classes),
    }


def stacking_from_dict(data):
    base = {m: model_from_dict(d) for m, d in data["base_models"].items()}
    meta = data["meta"]
    return StackingModel(base, {m: float(w) for m, w in meta["weights"].items()}, float(meta["intercept"]),
                         tuple(data.get("classes", DEFAULT_CLASSES)))
