"""Model mathematics shared by the secure pipeline and its plaintext oracles.

Every supported objective has the form g(w.x); the secure protocol only ever
needs the per-sample residual weights u, after which the gradient is the
u-weighted feature sum. Kinds running on the label-folding (linear) path
carry an affine residual transform (c1, c0): the active party submits
c1*(w.x) - y + c0 so the aggregated value is already u.
"""

import numpy as np

LINEAR = "linear_regression"
LOGISTIC = "logistic"
LOGISTIC_TAYLOR = "logistic_taylor"
SVM = "linear_svm"

KINDS = (LINEAR, LOGISTIC, LOGISTIC_TAYLOR, SVM)

# kinds whose residual is affine in w.x train without disclosing labels
_FOLDED = {
    LINEAR: (1.0, 0.0),
    LOGISTIC_TAYLOR: (0.25, 0.5),
}


class TrainingDivergedError(RuntimeError):
    pass


def check_kind(kind):
    if kind not in KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    return kind


def protocol_mode(kind):
    return "linear" if check_kind(kind) in _FOLDED else "nonlinear"


def residual_transform(kind):
    """(c1, c0) with u = c1*z - y + c0, for label-folding kinds."""
    return _FOLDED[check_kind(kind)]


def map_labels(kind, y01):
    """0/1 ingestion labels to the model's convention."""
    y01 = np.asarray(y01, dtype=np.float64)
    if not np.isin(y01, (0.0, 1.0)).all():
        raise ValueError("ingestion labels must be 0/1")
    if check_kind(kind) == SVM:
        return 2.0 * y01 - 1.0
    return y01


def _check_labels(kind, y):
    y = np.asarray(y, dtype=np.float64)
    allowed = (-1.0, 1.0) if kind == SVM else (0.0, 1.0)
    if not np.isin(y, allowed).all():
        raise ValueError(f"labels for {kind} must be in {allowed}")
    return y


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def compute_u(kind, z, y):
    """Per-sample residual weights from feature-dimension sums z."""
    check_kind(kind)
    z = np.asarray(z, dtype=np.float64)
    y = _check_labels(kind, y)
    if kind == LINEAR:
        return z - y
    if kind == LOGISTIC:
        return sigmoid(z) - y
    if kind == LOGISTIC_TAYLOR:
        return 0.25 * z - y + 0.5
    return -2.0 * y * np.maximum(0.0, 1.0 - y * z)


def predict(kind, z):
    """Decision in the model's label convention from scores z = w.x."""
    check_kind(kind)
    z = np.asarray(z, dtype=np.float64)
    if kind == SVM:
        return np.where(z >= 0.0, 1.0, -1.0)
    if kind == LINEAR:
        return (z >= 0.5).astype(np.float64)
    return (z >= 0.0).astype(np.float64)


def oracle_gradient(kind, X, y, w, lam=0.0):
    """Exact centralized batch gradient, including the L2 term lam*w."""
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.shape[1] != w.shape[0]:
        raise ValueError("feature/weight shape mismatch")
    u = compute_u(kind, X @ w, y)
    return X.T @ u / X.shape[0] + lam * w


def oracle_loss(kind, X, y, w, lam=0.0):
    check_kind(kind)
    X = np.asarray(X, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if X.shape[1] != w.shape[0]:
        raise ValueError("feature/weight shape mismatch")
    y = _check_labels(kind, y)
    z = X @ w
    reg = 0.5 * lam * float(w @ w)
    if kind == LINEAR:
        return 0.5 * float(np.mean((z - y) ** 2)) + reg
    if kind == LOGISTIC:
        return float(np.mean(np.logaddexp(0.0, z) - y * z)) + reg
    if kind == LOGISTIC_TAYLOR:
        return float(np.mean(np.log(2.0) + (0.5 - y) * z + z * z / 8.0)) + reg
    return float(np.mean(np.maximum(0.0, 1.0 - y * z) ** 2)) + reg


def folded_loss(kind, u, w, lam=0.0):
    """Batch loss from folded residuals alone (no labels needed).

    linear: u = z - y gives the squared loss directly; for the quadratic
    logistic approximation, 2u**2 + log 2 - 1/2 recovers the per-sample
    loss because y in {0,1} makes y**2 = y.
    """
    u = np.asarray(u, dtype=np.float64)
    reg = 0.5 * lam * float(np.dot(w, w))
    if kind == LINEAR:
        return 0.5 * float(np.mean(u * u)) + reg
    if kind == LOGISTIC_TAYLOR:
        return float(np.mean(2.0 * u * u) + np.log(2.0) - 0.5) + reg
    raise ValueError(f"{kind} does not run on the folded path")


def scored_loss(kind, z, y, w, lam=0.0):
    """Batch loss from plaintext scores plus disclosed labels."""
    z = np.asarray(z, dtype=np.float64)
    y = _check_labels(kind, y)
    reg = 0.5 * lam * float(np.dot(w, w))
    if kind == LOGISTIC:
        return float(np.mean(np.logaddexp(0.0, z) - y * z)) + reg
    if kind == SVM:
        return float(np.mean(np.maximum(0.0, 1.0 - y * z) ** 2)) + reg
    raise ValueError(f"{kind} runs on the folded path")


def centralized_train(
    kind,
    X,
    y,
    *,
    alpha,
    lam=0.0,
    epochs=1,
    batch_fn=None,
    batch_size=None,
    batches_per_epoch=None,
    w0=None,
    per_batch_update=True,
    seed=0,
):
    """Plaintext mini-batch SGD baseline.

    batch_fn(epoch, b_idx, batch_size, n_rows) supplies row indices so the
    secure pipeline's batch stream can be replayed exactly; when omitted a
    seeded uniform sampler is used.
    """
    X = np.asarray(X, dtype=np.float64)
    y = _check_labels(kind, y)
    n, d = X.shape
    w = np.zeros(d) if w0 is None else np.asarray(w0, dtype=np.float64).copy()
    if batch_size is None:
        batch_size = n
    if batches_per_epoch is None:
        batches_per_epoch = max(1, n // batch_size)
    if batch_fn is None:
        rng = np.random.default_rng(seed)

        def batch_fn(epoch, b_idx, s, n_rows):
            return rng.choice(n_rows, size=s, replace=False)

    history = []
    for epoch in range(epochs):
        grads = []
        for b_idx in range(batches_per_epoch):
            rows = np.asarray(batch_fn(epoch, b_idx, batch_size, n))
            g = oracle_gradient(kind, X[rows], y[rows], w, lam)
            if per_batch_update:
                w = w - alpha * g
            else:
                grads.append(g)
        if grads:
            w = w - alpha * np.mean(grads, axis=0)
        loss = oracle_loss(kind, X, y, w, lam)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"loss diverged at epoch {epoch}")
        history.append(loss)
    return w, history
