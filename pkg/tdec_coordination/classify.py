# tdec_coordination/classify.py
"""
Feature standardization, soft-margin RBF SVM trained with sequential
minimal optimization, and leave-one-subject-out cross-validation.

Decision function: f(x) = sum_i coef_i * exp(-gamma * |sv_i - x|^2) + bias,
coef_i = alpha_i * y_i, y = +1 for the positive class.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConvergenceWarning, DegenerateFeatureError, FoldError
from .workers import map_ordered

DEFAULT_CLASSES = ("SZ", "HC")
_ALPHA_EPS = 1e-12
_STEP_EPS = 1e-10


@dataclass(frozen=True)
class SvmParams:
    c: float = 1.0
    gamma: object = "auto"  # positive float or "auto"
    kkt_tol: float = 1e-3
    max_passes: int = 200

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if isinstance(self.gamma, str):
            if self.gamma.lower() != "auto":
                raise ValueError(f"gamma must be positive or 'auto', got '{self.gamma}'")
            object.__setattr__(self, "gamma", "auto")
        elif not self.gamma > 0:
            raise ValueError(f"gamma must be positive or 'auto', got {self.gamma}")
        if not self.kkt_tol > 0:
            raise ValueError(f"kkt_tol must be positive, got {self.kkt_tol}")
        if int(self.max_passes) != self.max_passes or self.max_passes < 1:
            raise ValueError(f"max_passes must be a positive integer, got {self.max_passes}")

    def resolve_gamma(self, X):
        if self.gamma != "auto":
            return float(self.gamma)
        variance = float(np.mean(np.var(X, axis=0)))
        return 1.0 / (X.shape[1] * variance) if variance > 0 else 1.0

    def to_dict(self):
        return {"c": self.c, "gamma": self.gamma, "kkt_tol": self.kkt_tol, "max_passes": self.max_passes}


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.size:
            raise ValueError(f"expected {self.mean.size} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std


def _feature_matrix(instances):
    if not instances:
        raise ValueError("no instances")
    widths = {len(i.features) for i in instances}
    if len(widths) > 1:
        raise ValueError(f"instances have mixed feature lengths {sorted(widths)}")
    return np.vstack([i.features for i in instances])


def _fit_standardizer(X):
    if X.shape[0] < 2:
        raise ValueError("standardization needs at least 2 instances")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    for k, s in enumerate(std):
        if not s > 1e-12 * max(abs(mean[k]), 1.0):
            raise DegenerateFeatureError(f"f{k}")
    return Standardizer(mean, std)


def standardize_fit(instances):
    return _fit_standardizer(_feature_matrix(instances))


def rbf_kernel(A, B, gamma):
    return np.exp(-gamma * cdist(np.atleast_2d(A), np.atleast_2d(B), "sqeuclidean"))


class _SmoSolver:
    """Dual solver state: multipliers, bias and the error cache E_i = f(x_i) - y_i."""

    def __init__(self, K, y, c, tol):
        self.K = K
        self.y = y
        self.c = c
        self.tol = tol
        self.alpha = np.zeros(len(y))
        self.bias = 0.0
        self.errors = -y.astype(np.float64)

    def fit_bias(self):
        """Bias from the free multipliers, else the middle of the KKT-feasible interval.

        With g = K (alpha * y), a point needs y (g + b) = 1 when free, >= 1 at
        alpha = 0 and <= 1 at alpha = c, so each bound multiplier limits b from
        one side at y - g.
        """
        g = self.K @ (self.alpha * self.y)
        target = self.y - g
        at_zero = self.alpha <= _ALPHA_EPS
        at_c = self.alpha >= self.c - _ALPHA_EPS
        free = ~at_zero & ~at_c
        if np.any(free):
            bias = float(np.mean(target[free]))
        else:
            positive = self.y > 0
            lower = target[(positive & at_zero) | (~positive & at_c)]
            upper = target[(positive & at_c) | (~positive & at_zero)]
            if lower.size and upper.size:
                bias = 0.5 * (float(lower.max()) + float(upper.min()))
            elif lower.size:
                bias = float(lower.max())
            else:
                bias = float(upper.min())
        self.bias = bias
        self.errors = g + bias - self.y

    def violations(self):
        r = self.y * self.errors
        below = (self.alpha < self.c - _ALPHA_EPS) & (r < -self.tol)
        above = (self.alpha > _ALPHA_EPS) & (r > self.tol)
        return np.where(below, -r, 0.0) + np.where(above, r, 0.0)

    def _violates(self, i):
        r = self.y[i] * self.errors[i]
        return (self.alpha[i] < self.c - _ALPHA_EPS and r < -self.tol) or \
               (self.alpha[i] > _ALPHA_EPS and r > self.tol)

    def _snap(self, a):
        if a < _ALPHA_EPS:
            return 0.0
        if a > self.c - _ALPHA_EPS:
            return self.c
        return a

    def take_step(self, i1, i2):
        if i1 == i2:
            return False
        K, y, c = self.K, self.y, self.c
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if y1 != y2:
            lo, hi = max(0.0, a2 - a1), min(c, c + a2 - a1)
        else:
            lo, hi = max(0.0, a2 + a1 - c), min(c, a2 + a1)
        if hi - lo < _ALPHA_EPS:
            return False

        k11, k12, k22 = K[i1, i1], K[i1, i2], K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2_new = min(max(a2 + y2 * (e1 - e2) / eta, lo), hi)
        else:
            b = self.bias
            f1 = y1 * (e1 - b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 - b) - s * a1 * k12 - a2 * k22
            lo1 = a1 + s * (a2 - lo)
            hi1 = a1 + s * (a2 - hi)
            obj_lo = lo1 * f1 + lo * f2 + 0.5 * lo1 ** 2 * k11 + 0.5 * lo ** 2 * k22 + s * lo * lo1 * k12
            obj_hi = hi1 * f1 + hi * f2 + 0.5 * hi1 ** 2 * k11 + 0.5 * hi ** 2 * k22 + s * hi * hi1 * k12
            if obj_lo < obj_hi - _STEP_EPS:
                a2_new = lo
            elif obj_lo > obj_hi + _STEP_EPS:
                a2_new = hi
            else:
                a2_new = a2
        a2_new = self._snap(a2_new)
        if abs(a2_new - a2) < _STEP_EPS * (a2_new + a2 + _STEP_EPS):
            return False
        a1_new = self._snap(min(max(a1 + s * (a2 - a2_new), 0.0), c))

        d1 = y1 * (a1_new - a1)
        d2 = y2 * (a2_new - a2)
        b1 = self.bias - e1 - d1 * k11 - d2 * k12
        b2 = self.bias - e2 - d1 * k12 - d2 * k22
        if 0.0 < a1_new < c:
            bias = b1
        elif 0.0 < a2_new < c:
            bias = b2
        else:
            bias = (b1 + b2) / 2.0

        self.errors += d1 * K[i1] + d2 * K[i2] + (bias - self.bias)
        self.alpha[i1] = a1_new
        self.alpha[i2] = a2_new
        self.bias = bias
        return True

    def run(self, max_passes):
        """Epochs over violators, worst first; partner by largest |E1 - E2|.

        Returns True when every KKT condition holds within tol.
        """
        for _ in range(max_passes):
            self.fit_bias()
            viol = self.violations()
            if not np.any(viol > 0):
                return True
            order = np.argsort(-viol, kind="stable")
            changed = 0
            for i1 in order[viol[order] > 0]:
                if not self._violates(i1):
                    continue
                gaps = np.abs(self.errors[i1] - self.errors)
                gaps[i1] = -1.0
                for i2 in np.argsort(-gaps, kind="stable")[:-1]:
                    if self.take_step(i1, i2):
                        changed += 1
                        break
            if changed == 0:
                break
        self.fit_bias()
        return not np.any(self.violations() > 0)

    def dual_objective(self):
        ay = self.alpha * self.y
        return float(np.sum(self.alpha) - 0.5 * ay @ self.K @ ay)


@dataclass(frozen=True)
class SvmModel:
    support_vectors: np.ndarray
    dual_coefficients: np.ndarray
    bias: float
    gamma: float
    standardizer: Standardizer = None
    params: SvmParams = field(default_factory=SvmParams)
    converged: bool = True
    classes: tuple = DEFAULT_CLASSES
    dual_objective: float = float("nan")

    @property
    def num_features(self):
        return self.support_vectors.shape[1]


def encode_labels(labels, classes=DEFAULT_CLASSES):
    positive, negative = classes
    unknown = sorted({l for l in labels if l not in classes})
    if unknown:
        raise ValueError(f"labels {unknown} are outside the binary task {positive} vs {negative}")
    return np.array([1.0 if l == positive else -1.0 for l in labels])


def svm_train(X, y, params=None, standardizer=None, classes=DEFAULT_CLASSES, warn=True):
    """Fit the dual with SMO on already-standardized features X and labels y in {+1, -1}.

    The standardizer, when given, is attached so svm_decision accepts raw features.
    """
    params = params or SvmParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"feature matrix {X.shape} does not match {y.size} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or Inf")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise ValueError("labels must be +1 or -1")
    if np.all(y == y[0]):
        raise ValueError("training data holds a single class")

    gamma = params.resolve_gamma(X)
    solver = _SmoSolver(rbf_kernel(X, X, gamma), y, float(params.c), float(params.kkt_tol))
    converged = solver.run(int(params.max_passes))
    if not converged and warn:
        warnings.warn(f"SMO stopped after {params.max_passes} passes with KKT violations left",
                      ConvergenceWarning, stacklevel=2)

    sv = np.flatnonzero(solver.alpha > 0.0)
    return SvmModel(
        support_vectors=X[sv].copy(),
        dual_coefficients=(solver.alpha * y)[sv],
        bias=float(solver.bias),
        gamma=gamma,
        standardizer=standardizer,
        params=params,
        converged=converged,
        classes=tuple(classes),
        dual_objective=solver.dual_objective(),
    )


def train_on_instances(instances, params=None, classes=DEFAULT_CLASSES, standardizer=None, warn=True):
    """Fit (or reuse) a standardizer on the instances, then the SVM."""
    X = _feature_matrix(instances)
    y = encode_labels([i.label for i in instances], classes)
    if np.all(y == y[0]):
        raise ValueError("training data holds a single class")
    standardizer = standardizer or _fit_standardizer(X)
    return svm_train(standardizer.transform(X), y, params, standardizer, classes, warn)


def decision_values(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.num_features:
        raise ValueError(f"expected {model.num_features} features, got {X.shape[1]}")
    if model.standardizer is not None:
        X = model.standardizer.transform(X)
    return rbf_kernel(X, model.support_vectors, model.gamma) @ model.dual_coefficients + model.bias


def svm_decision(model, x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("svm_decision takes a single feature vector")
    return float(decision_values(model, x)[0])


def predict_labels(model, X):
    positive, negative = model.classes
    return [positive if d >= 0.0 else negative for d in decision_values(model, X)]


def metrics(predictions, labels, classes=DEFAULT_CLASSES):
    """Accuracy and per-class F1 (each class taken in turn as positive)."""
    predictions = list(predictions)
    labels = list(labels)
    if len(predictions) != len(labels):
        raise ValueError(f"{len(predictions)} predictions for {len(labels)} labels")
    if not labels:
        raise ValueError("metrics need at least one prediction")
    accuracy = sum(p == l for p, l in zip(predictions, labels)) / len(labels)
    f1 = {}
    for cls in classes:
        tp = sum(p == cls and l == cls for p, l in zip(predictions, labels))
        predicted = sum(p == cls for p in predictions)
        actual = sum(l == cls for l in labels)
        precision = tp / predicted if predicted else 0.0
        recall = tp / actual if actual else 0.0
        f1[cls] = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return accuracy, f1


@dataclass(frozen=True)
class FoldResult:
    subject: str
    segment_ids: tuple
    labels: tuple
    predictions: tuple
    decisions: tuple
    accuracy: float
    converged: bool = True
    model: object = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class CvReport:
    folds: tuple
    mean_accuracy: float
    f1_per_class: dict
    classes: tuple = DEFAULT_CLASSES

    @property
    def unconverged_folds(self):
        return [f.subject for f in self.folds if not f.converged]


def build_report(folds, classes=DEFAULT_CLASSES):
    folds = tuple(folds)
    predictions = [p for f in folds for p in f.predictions]
    labels = [l for f in folds for l in f.labels]
    _, f1 = metrics(predictions, labels, classes)
    mean_accuracy = float(np.mean([f.accuracy for f in folds]))
    return CvReport(folds, mean_accuracy, f1, tuple(classes))


def split_by_subject(instances):
    subjects = sorted({i.subject_id for i in instances})
    if len(subjects) < 2:
        raise ValueError(f"leave-one-subject-out needs at least 2 subjects, got {len(subjects)}")
    return subjects


def check_training_split(train, subject, classes):
    present = {i.label for i in train}
    if not set(classes) <= present:
        raise FoldError(subject)


def loso_cv(instances, params=None, classes=DEFAULT_CLASSES, standardize="fold", workers=1):
    """One fold per subject; standardizer and SVM fit without the held-out subject.

    standardize="global" reproduces fitting the standardizer on every
    instance (held-out ones included) for comparison.
    """
    instances = list(instances)
    params = params or SvmParams()
    encode_labels([i.label for i in instances], classes)
    subjects = split_by_subject(instances)
    if standardize not in ("fold", "global"):
        raise ValueError(f"standardize must be 'fold' or 'global', got '{standardize}'")
    shared = standardize_fit(instances) if standardize == "global" else None

    def run_fold(subject):
        train = [i for i in instances if i.subject_id != subject]
        test = [i for i in instances if i.subject_id == subject]
        check_training_split(train, subject, classes)
        model = train_on_instances(train, params, classes, shared, warn=False)
        decisions = decision_values(model, _feature_matrix(test))
        predictions = [classes[0] if d >= 0.0 else classes[1] for d in decisions]
        labels = [i.label for i in test]
        accuracy, _ = metrics(predictions, labels, classes)
        return FoldResult(subject, tuple(i.segment_id for i in test), tuple(labels), tuple(predictions),
                          tuple(float(d) for d in decisions), accuracy, model.converged, model)

    return build_report(map_ordered(run_fold, subjects, workers), classes)


def standardizer_to_list(standardizer):
    if standardizer is None:
        return None
    return [[float(m), float(s)] for m, s in zip(standardizer.mean, standardizer.std)]


def model_to_dict(model):
    return {
        "gamma": model.gamma,
        "bias": model.bias,
        "standardizer": standardizer_to_list(model.standardizer),
        "support_vectors": model.support_vectors,
        "dual_coefficients": model.dual_coefficients,
        "params": model.params.to_dict(),
        "convergence_flag": model.converged,
        "classes": list(model.classes),
    }


def model_from_dict(data):
    standardizer = None
    if data.get("standardizer") is not None:
        pairs = np.array(data["standardizer"], dtype=np.float64)
        standardizer = Standardizer(pairs[:, 0], pairs[:, 1])
    return SvmModel(
        support_vectors=np.array(data["support_vectors"], dtype=np.float64),
        dual_coefficients=np.array(data["dual_coefficients"], dtype=np.float64),
        bias=float(data["bias"]),
        gamma=float(data["gamma"]),
        standardizer=standardizer,
        params=SvmParams(**data.get("params", {})),
        converged=bool(data.get("convergence_flag", True)),
        classes=tuple(data.get("classes", DEFAULT_CLASSES)),
    )


def report_to_dict(report):
    return {
        "folds": [
            {
                "subject": f.subject,
                "segment_ids": list(f.segment_ids),
                "labels": list(f.labels),
                "predictions": list(f.predictions),
                "decision_values": list(f.decisions),
                "accuracy": f.accuracy,
                "converged": f.converged,
            }
            for f in report.folds
        ],
        "mean_accuracy": report.mean_accuracy,
        "f1_per_class": {cls: report.f1_per_class[cls] for cls in report.classes},
        "classes": list(report.classes),
        "unconverged_folds": report.unconverged_folds,
    }


def format_summary(rows, classes=DEFAULT_CLASSES):
    """Plain-text results table; rows are (method, index_range, CvReport)."""
    pos, neg = classes
    header = ("Method", "Index range", "Accuracy", f"F1({pos[0]})/F1({neg[0]})")
    body = []
    for method, index_range, report in rows:
        body.append((method, index_range or "-", f"{report.mean_accuracy * 100:.2f}%",
                     f"{report.f1_per_class[pos] * 100:.2f}/{report.f1_per_class[neg] * 100:.2f}"))
    widths = [max(len(r[k]) for r in [header] + body) for k in range(4)]
    line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    out = [line, "| " + " | ".join(h.ljust(w) for h, w in zip(header, widths)) + " |", line]
    for r in body:
        out.append("| " + " | ".join(v.ljust(w) for v, w in zip(r, widths)) + " |")
    out.append(line)
    return "\n".join(out)
