"""Per-category binary risk classifiers over normalized paragraph vectors.

Each risk category gets its own binary model: a linear or RBF-kernel support
vector machine trained by seeded subgradient descent on the primal hinge
objective, or a Gaussian/Bernoulli naive Bayes model with closed-form fits.
Naive Bayes predicts exact posteriors; SVM margins are mapped to
probabilities by a sigmoid calibrator fit on out-of-fold scores.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

CLASSIFIER_KINDS = ("svm_linear", "svm_rbf", "nb_gaussian", "nb_bernoulli")
CLASSIFIER_FORMAT_VERSION = 1

GAUSSIAN_VARIANCE_FLOOR = 1e-9
BERNOULLI_ALPHA = 1.0
SVM_OBJECTIVE_TOL = 1e-6
SVM_SGD_EPOCHS = 200
SVM_POLISH_STEPS = 500
SVM_RBF_STEPS = 1000


def normalize(raw) -> np.ndarray:
    """Scale a vector to unit Euclidean norm; zero vectors are rejected."""
    raw = np.asarray(raw, dtype=np.float64)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return raw / norm


@dataclass(frozen=True)
class SigmoidCalibrator:
    """Monotone map from raw score to probability: p = sigma(a*s + b)."""

    a: float
    b: float

    def probability(self, score: float) -> float:
        z = self.a * score + self.b
        if z >= 0:
            return float(1.0 / (1.0 + math.exp(-z)))
        e = math.exp(z)
        return float(e / (1.0 + e))

    @classmethod
    def fit(cls, scores: np.ndarray, labels: np.ndarray, max_iter: int = 100) -> "SigmoidCalibrator":
        """Platt-style sigmoid regression via damped Newton iterations.

        Targets are smoothed to (n_pos+1)/(n_pos+2) and 1/(n_neg+2) so a
        perfectly separated score set cannot drive the fit to infinity.
        """
        scores = np.asarray(scores, dtype=np.float64)
        labels = np.asarray(labels)
        n_pos = int((labels == 1).sum())
        n_neg = len(labels) - n_pos
        hi = (n_pos + 1.0) / (n_pos + 2.0)
        lo = 1.0 / (n_neg + 2.0)
        t = np.where(labels == 1, hi, lo)

        a, b = 1.0, 0.0
        prev = np.inf
        for _ in range(max_iter):
            z = a * scores + b
            p = 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))
            grad_a = float(((p - t) * scores).sum())
            grad_b = float((p - t).sum())
            w = p * (1.0 - p) + 1e-12
            h_aa = float((w * scores * scores).sum()) + 1e-12
            h_ab = float((w * scores).sum())
            h_bb = float(w.sum()) + 1e-12
            det = h_aa * h_bb - h_ab * h_ab
            if abs(det) < 1e-30:
                break
            da = (h_bb * grad_a - h_ab * grad_b) / det
            db = (h_aa * grad_b - h_ab * grad_a) / det
            a -= da
            b -= db
            loss = float(-(t * np.log(p + 1e-300) + (1 - t) * np.log(1 - p + 1e-300)).sum())
            if abs(prev - loss) < 1e-12:
                break
            prev = loss
        return cls(float(a), float(b))


@dataclass
class CategoryClassifier:
    """A trained binary classifier for one risk category.

    ``params`` holds kind-specific fitted state; degenerate classifiers
    (single-class training data) carry the constant class they predict and
    are flagged so callers can surface the condition.
    """

    category: str
    kind: str
    params: dict[str, Any]
    calibrator: SigmoidCalibrator | None = None
    threshold: float = 0.5
    degenerate: bool = False
    n_pos: int = 0
    n_neg: int = 0

    @property
    def dim(self) -> int:
        return int(self.params["dim"])

    def raw_score(self, x: np.ndarray) -> float:
        """Uncalibrated decision score (SVM margin or NB log-posterior gap)."""
        x = self._check(x)
        if self.degenerate:
            return math.inf if self.params["constant_class"] == 1 else -math.inf
        if self.kind == "svm_linear":
            return float(np.dot(self.params["weights"], x) + self.params["bias"])
        if self.kind == "svm_rbf":
            k = _rbf_kernel(self.params["support"], x[None, :], self.params["gamma"])[:, 0]
            return float(np.dot(self.params["coef"], k) + self.params["bias"])
        log_miss, log_hit = self._nb_log_joint(x)
        return log_hit - log_miss

    def predict_proba(self, x: np.ndarray) -> float:
        """Probability the paragraph belongs to this risk category."""
        x = self._check(x)
        if self.degenerate:
            return 1.0 if self.params["constant_class"] == 1 else 0.0
        if self.kind in ("nb_gaussian", "nb_bernoulli"):
            log_miss, log_hit = self._nb_log_joint(x)
            m = max(log_miss, log_hit)
            e_miss = math.exp(log_miss - m)
            e_hit = math.exp(log_hit - m)
            return e_hit / (e_hit + e_miss)
        return self.calibrator.probability(self.raw_score(x))

    def decide(self, x: np.ndarray, threshold: float | None = None) -> bool:
        cutoff = self.threshold if threshold is None else threshold
        if not (0.0 <= cutoff <= 1.0):
            raise ValueError("threshold must lie in [0, 1]")
        return self.predict_proba(x) >= cutoff

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError(f"feature dimension mismatch: expected {self.dim}, got {x.shape}")
        return x

    def _nb_log_joint(self, x: np.ndarray) -> tuple[float, float]:
        p = self.params
        priors = p["priors"]
        out = []
        for c in (0, 1):
            if self.kind == "nb_gaussian":
                mu, var = p["means"][c], p["variances"][c]
                ll = -0.5 * np.sum(np.log(2.0 * np.pi * var) + (x - mu) ** 2 / var)
            else:
                xb = (x > 0).astype(np.float64)
                theta = p["rates"][c]
                ll = np.sum(xb * np.log(theta) + (1.0 - xb) * np.log(1.0 - theta))
            out.append(math.log(priors[c]) + float(ll))
        return out[0], out[1]


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    aa = (a * a).sum(axis=1)[:, None]
    bb = (b * b).sum(axis=1)[None, :]
    sq = aa + bb - 2.0 * (a @ b.T)
    return np.exp(-gamma * np.maximum(sq, 0.0))


def hinge_loss(weights: np.ndarray, bias: float, x: np.ndarray, y_signed: np.ndarray) -> float:
    """Total hinge loss sum_i max(0, 1 - y_i (w.x_i + b))."""
    margins = y_signed * (x @ weights + bias)
    return float(np.maximum(0.0, 1.0 - margins).sum())


def _svm_objective(weights, bias, x, y_signed, c):
    return 0.5 * float(weights @ weights) + c * hinge_loss(weights, bias, x, y_signed)


def _line_search(w, b, dw, db, x, y_signed, c):
    """Exact minimizer of J((w, b) + s (dw, db)) over s >= 0.

    Along a ray the primal objective is piecewise quadratic with kinks where
    a margin crosses 1; scanning the kinks in order yields the exact
    segment-wise vertex.
    """
    m = y_signed * (x @ w + b)
    dm = y_signed * (x @ dw + db)
    dd = float(dw @ dw)
    wd = float(w @ dw)
    crossings = []
    for i in range(len(m)):
        if dm[i] != 0.0:
            s_i = (1.0 - m[i]) / dm[i]
            if s_i > 0.0:
                crossings.append(s_i)
    crossings = sorted(set(crossings))
    lo = 0.0
    for hi in crossings + [np.inf]:
        probe = 0.5 * (lo + hi) if np.isfinite(hi) else lo + 1.0
        active = m + probe * dm < 1.0
        slope_const = wd - c * float(dm[active].sum())
        if dd * lo + slope_const >= 0.0:
            # Objective is non-decreasing from the segment start; the
            # previous kink is the ray minimum.
            return lo
        if dd > 0.0:
            vertex = -slope_const / dd
            if vertex <= hi:
                return float(vertex)
        lo = hi
    return lo


def _fit_svm_linear(x: np.ndarray, y_signed: np.ndarray, c: float, seed: int):
    """Subgradient descent on the primal hinge objective, then a polish phase.

    Phase one is seeded per-sample descent on the 1/(lambda t) schedule with
    lambda = 1/(n C). Phase two runs batch subgradient steps with exact line
    search until the objective changes by less than SVM_OBJECTIVE_TOL. When
    the final iterate separates the data, it is rescaled onto the margin
    boundary whenever that does not worsen the objective beyond tolerance,
    so separable problems report an exactly zero hinge loss.
    """
    n, dim = x.shape
    lam = 1.0 / (n * c)
    w = np.zeros(dim)
    b = 0.0
    rng = np.random.default_rng([seed, 71])
    t = n  # softened start so the first steps are not enormous
    prev_obj = np.inf
    for _ in range(SVM_SGD_EPOCHS):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            margin = y_signed[i] * (float(x[i] @ w) + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                scale = eta / n
                w += scale * y_signed[i] * x[i]
                b += scale * y_signed[i]
        obj = _svm_objective(w, b, x, y_signed, c)
        if abs(prev_obj - obj) < SVM_OBJECTIVE_TOL:
            break
        prev_obj = obj

    best = (_svm_objective(w, b, x, y_signed, c), w.copy(), b)
    prev_obj = best[0]
    for _ in range(SVM_POLISH_STEPS):
        violated = y_signed * (x @ w + b) < 1.0
        dw = -(w - c * (x[violated].T @ y_signed[violated]))
        db = c * float(y_signed[violated].sum())
        step = _line_search(w, b, dw, db, x, y_signed, c)
        if step <= 0.0:
            break
        w += step * dw
        b += step * db
        obj = _svm_objective(w, b, x, y_signed, c)
        if obj < best[0]:
            best = (obj, w.copy(), b)
        if abs(prev_obj - obj) < SVM_OBJECTIVE_TOL * 1e-3:
            break
        prev_obj = obj
    _, w, b = best

    margins = y_signed * (x @ w + b)
    min_margin = float(margins.min())
    if min_margin > 0.0:
        scale = 1.0 / min_margin
        snapped = _svm_objective(w * scale, b * scale, x, y_signed, c)
        if snapped <= best[0] + SVM_OBJECTIVE_TOL:
            w, b = w * scale, b * scale
    return w, b


def _fit_svm_rbf(x: np.ndarray, y_signed: np.ndarray, c: float, gamma: float, seed: int):
    """Batch subgradient descent on the kernelized primal.

    The decision function is f(z) = sum_j coef_j K(x_j, z) + b with the
    regularizer 0.5 coef^T K coef.
    """
    n = x.shape[0]
    kernel = _rbf_kernel(x, x, gamma)
    coef = np.zeros(n)
    b = 0.0
    best = (np.inf, coef.copy(), b)
    prev_obj = np.inf
    for it in range(SVM_RBF_STEPS):
        scores = kernel @ coef + b
        violated = y_signed * scores < 1.0
        grad_coef = kernel @ coef - c * (kernel[:, violated] @ y_signed[violated])
        grad_b = -c * float(y_signed[violated].sum())
        eta = 1.0 / (1.0 + it) / n
        coef -= eta * grad_coef
        b -= eta * grad_b
        obj = 0.5 * float(coef @ kernel @ coef) + c * float(
            np.maximum(0.0, 1.0 - y_signed * (kernel @ coef + b)).sum()
        )
        if obj < best[0]:
            best = (obj, coef.copy(), b)
        if abs(prev_obj - obj) < SVM_OBJECTIVE_TOL:
            break
        prev_obj = obj
    _, coef, b = best
    return coef, b


def _out_of_fold_scores(x, y, fit_and_score, seed: int, folds: int = 3) -> np.ndarray | None:
    """Stratified out-of-fold decision scores for calibration.

    Returns None when the data is too small to give every fold's training
    part both classes; callers then calibrate on in-sample scores.
    """
    n = len(y)
    pos = np.flatnonzero(y == 1)
    neg = np.flatnonzero(y == 0)
    if len(pos) < folds or len(neg) < folds:
        return None
    rng = np.random.default_rng([seed, 13])
    assign = np.empty(n, dtype=np.int64)
    for idx in (pos, neg):
        shuffled = idx[rng.permutation(len(idx))]
        assign[shuffled] = np.arange(len(idx)) % folds
    scores = np.empty(n)
    for f in range(folds):
        hold = assign == f
        scores[hold] = fit_and_score(x[~hold], y[~hold], x[hold])
    return scores


def train_classifier(
    kind: str,
    x,
    y,
    params: dict[str, Any] | None = None,
    category: str = "",
    seed: int = 0,
) -> CategoryClassifier:
    """Fit one binary classifier of the requested kind.

    ``params`` accepts ``c`` (SVM regularization, default 1.0), ``gamma``
    (RBF width, default 1/dim) and ``threshold``. Single-class labels yield
    a constant classifier flagged as degenerate rather than an error, since
    sparse categories are an expected corpus condition.
    """
    if kind not in CLASSIFIER_KINDS:
        raise ValueError(f"kind must be one of {CLASSIFIER_KINDS}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("x must be a non-empty 2-D array")
    if len(x) != len(y):
        raise ValueError("x and y length mismatch")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be binary")
    params = dict(params or {})
    threshold = float(params.pop("threshold", 0.5))
    n, dim = x.shape
    n_pos = int((y == 1).sum())
    n_neg = n - n_pos

    if n_pos == 0 or n_neg == 0:
        constant = 1 if n_pos else 0
        return CategoryClassifier(
            category=category,
            kind=kind,
            params={"dim": dim, "constant_class": constant},
            threshold=threshold,
            degenerate=True,
            n_pos=n_pos,
            n_neg=n_neg,
        )

    c = float(params.pop("c", 1.0))
    gamma = float(params.pop("gamma", 1.0 / dim))
    if params:
        raise ValueError(f"unknown classifier params: {sorted(params)}")
    y_signed = np.where(y == 1, 1.0, -1.0)

    if kind == "svm_linear":
        w, b = _fit_svm_linear(x, y_signed, c, seed)
        fitted = {"dim": dim, "weights": w, "bias": b, "c": c}

        def fit_and_score(xt, yt, xh):
            ys = np.where(yt == 1, 1.0, -1.0)
            wt, bt = _fit_svm_linear(xt, ys, c, seed)
            return xh @ wt + bt

        scores = _out_of_fold_scores(x, y, fit_and_score, seed)
        if scores is None:
            scores = x @ w + b
        calibrator = SigmoidCalibrator.fit(scores, y)
    elif kind == "svm_rbf":
        coef, b = _fit_svm_rbf(x, y_signed, c, gamma, seed)
        fitted = {
            "dim": dim,
            "coef": coef,
            "bias": b,
            "support": x.copy(),
            "support_labels": y_signed.copy(),
            "c": c,
            "gamma": gamma,
        }

        def fit_and_score(xt, yt, xh):
            ys = np.where(yt == 1, 1.0, -1.0)
            ct, bt = _fit_svm_rbf(xt, ys, c, gamma, seed)
            return _rbf_kernel(xt, xh, gamma).T @ ct + bt

        scores = _out_of_fold_scores(x, y, fit_and_score, seed)
        if scores is None:
            scores = _rbf_kernel(x, x, gamma) @ coef + b
        calibrator = SigmoidCalibrator.fit(scores, y)
    elif kind == "nb_gaussian":
        priors = np.array([n_neg / n, n_pos / n])
        means = np.stack([x[y == cl].mean(axis=0) for cl in (0, 1)])
        variances = np.stack(
            [np.maximum(x[y == cl].var(axis=0), GAUSSIAN_VARIANCE_FLOOR) for cl in (0, 1)]
        )
        fitted = {"dim": dim, "priors": priors, "means": means, "variances": variances}
        calibrator = None
    else:
        xb = (x > 0).astype(np.float64)
        priors = np.array([n_neg / n, n_pos / n])
        rates = np.stack(
            [
                (xb[y == cl].sum(axis=0) + BERNOULLI_ALPHA) / ((y == cl).sum() + 2.0 * BERNOULLI_ALPHA)
                for cl in (0, 1)
            ]
        )
        fitted = {"dim": dim, "priors": priors, "rates": rates, "alpha": BERNOULLI_ALPHA}
        calibrator = None

    return CategoryClassifier(
        category=category,
        kind=kind,
        params=fitted,
        calibrator=calibrator,
        threshold=threshold,
        degenerate=False,
        n_pos=n_pos,
        n_neg=n_neg,
    )


def predict_proba(classifier: CategoryClassifier, x) -> float:
    return classifier.predict_proba(np.asarray(x, dtype=np.float64))


def decide(classifier: CategoryClassifier, x, threshold: float | None = None) -> bool:
    return classifier.decide(np.asarray(x, dtype=np.float64), threshold)


def _encode_value(v):
    if isinstance(v, np.ndarray):
        arr = np.ascontiguousarray(v, dtype="<f8")
        return {
            "__nd__": True,
            "shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        }
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    return v


def _decode_value(v):
    if isinstance(v, dict) and v.get("__nd__"):
        raw = base64.b64decode(v["data"])
        return np.frombuffer(raw, dtype="<f8").reshape(v["shape"]).astype(np.float64)
    return v


def classifier_to_bytes(clf: CategoryClassifier) -> bytes:
    """Canonical JSON container; load + re-save is byte-identical."""
    doc = {
        "format": "risk-classifier",
        "format_version": CLASSIFIER_FORMAT_VERSION,
        "category": clf.category,
        "kind": clf.kind,
        "params": {k: _encode_value(v) for k, v in clf.params.items()},
        "calibrator": None if clf.calibrator is None else {"a": clf.calibrator.a, "b": clf.calibrator.b},
        "threshold": clf.threshold,
        "degenerate": clf.degenerate,
        "n_pos": clf.n_pos,
        "n_neg": clf.n_neg,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


def classifier_from_bytes(data: bytes) -> CategoryClassifier:
    doc = json.loads(data.decode("utf-8"))
    if doc.get("format") != "risk-classifier":
        raise ValueError("not a classifier file")
    if doc["format_version"] != CLASSIFIER_FORMAT_VERSION:
        raise ValueError(f"unsupported classifier format version {doc['format_version']}")
    cal = doc["calibrator"]
    return CategoryClassifier(
        category=doc["category"],
        kind=doc["kind"],
        params={k: _decode_value(v) for k, v in doc["params"].items()},
        calibrator=None if cal is None else SigmoidCalibrator(cal["a"], cal["b"]),
        threshold=doc["threshold"],
        degenerate=doc["degenerate"],
        n_pos=doc["n_pos"],
        n_neg=doc["n_neg"],
    )


def save_classifier(clf: CategoryClassifier, path) -> None:
    with open(path, "wb") as fh:
        fh.write(classifier_to_bytes(clf))


def load_classifier(path) -> CategoryClassifier:
    with open(path, "rb") as fh:
        return classifier_from_bytes(fh.read())
