"""2-D PCA feature extraction and fused nearest-neighbor classification.

Training computes the eta x eta column covariance H = (1/I) sum (X - Xbar)^T
(X - Xbar) per image stream (micro-Doppler and range map), keeps the top-d
eigenvectors, and stores every training image's fused feature vector: the
column-major vectorizations of Y_MD = X Phi_MD and Y_RM = X Phi_RM
concatenated MD-first.  Classification finds the Euclidean-nearest stored
vector among an allowed class subset.  Because 2-D PCA components are
nested, a classifier that wants fewer components just slices the stored
vectors; nothing is retrained.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

ETA_DEFAULT = 128
D_MD_DEFAULT = 14
D_RM_DEFAULT = 4


@dataclass
class Snippet:
    """One classification window: square micro-Doppler and range-map images."""

    md: np.ndarray
    rm: np.ndarray
    label: str = ""
    center_shifted: bool = False

    def __post_init__(self):
        self.md = np.asarray(self.md, dtype=float)
        self.rm = np.asarray(self.rm, dtype=float)
        for name, img in (("md", self.md), ("rm", self.rm)):
            if img.ndim != 2 or img.shape[0] != img.shape[1]:
                raise ValueError(f"{name} image must be square")
        if self.md.shape != self.rm.shape:
            raise ValueError("md and rm must share the same eta")

    @property
    def eta(self) -> int:
        return self.md.shape[0]


def pca2d_train(images: list[np.ndarray], d: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Train 2-D PCA on a stack of eta x eta images.

    Returns (mean image, Phi with the top-d eigenvectors as columns, all
    eigenvalues in descending order).  Eigenvector signs are fixed by making
    each column's largest-magnitude entry positive, so retraining on the
    same data is bit-reproducible.
    """
    if not images:
        raise ValueError("need at least one training image")
    stack = np.stack([np.asarray(x, dtype=float) for x in images])
    eta = stack.shape[1]
    if stack.shape[1] != stack.shape[2]:
        raise ValueError("images must be square")
    if not 1 <= d <= eta:
        raise ValueError(f"d must be in [1, {eta}]")
    mean = stack.mean(axis=0)
    centered = stack - mean
    h = np.einsum("ikj,ikl->jl", centered, centered) / stack.shape[0]
    h = (h + h.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(h)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    flip = eigvecs[np.argmax(np.abs(eigvecs), axis=0), np.arange(eta)] < 0
    eigvecs[:, flip] *= -1.0
    return mean, eigvecs[:, :d].copy(), eigvals


def project(x: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Principal component matrix Y = X Phi."""
    x = np.asarray(x, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if x.ndim != 2 or phi.ndim != 2 or x.shape[1] != phi.shape[0]:
        raise ValueError(f"shape mismatch: {x.shape} @ {phi.shape}")
    return x @ phi


def reconstruct(y: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """X_hat = Y (Phi^T Phi)^-1 Phi^T (pseudo-inverse reconstruction)."""
    y = np.asarray(y, dtype=float)
    phi = np.asarray(phi, dtype=float)
    gram = phi.T @ phi
    try:
        inv = np.linalg.inv(gram)
    except np.linalg.LinAlgError as exc:
        raise ValueError("rank-deficient projection matrix") from exc
    if np.linalg.cond(gram) > 1e12:
        raise ValueError("rank-deficient projection matrix")
    return y @ inv @ phi.T


def fuse(y_md: np.ndarray, y_rm: np.ndarray) -> np.ndarray:
    """Column-major vectorization of both component matrices, MD first."""
    return np.concatenate([np.asarray(y_md).flatten(order="F"),
                           np.asarray(y_rm).flatten(order="F")])


def unfuse(vec: np.ndarray, eta: int, d_md: int, d_rm: int) -> tuple[np.ndarray, np.ndarray]:
    vec = np.asarray(vec)
    if vec.size != eta * (d_md + d_rm):
        raise ValueError("fused vector length mismatch")
    y_md = vec[:eta * d_md].reshape(eta, d_md, order="F")
    y_rm = vec[eta * d_md:].reshape(eta, d_rm, order="F")
    return y_md, y_rm


@dataclass
class FeatureModel:
    """Trained projection matrices plus the labeled training vectors."""

    eta: int
    mean_md: np.ndarray
    mean_rm: np.ndarray
    phi_md: np.ndarray            # eta x d_md
    phi_rm: np.ndarray            # eta x d_rm
    eigvals_md: np.ndarray
    eigvals_rm: np.ndarray
    train_vectors: np.ndarray     # n x eta*(d_md+d_rm)
    train_labels: list[str] = field(default_factory=list)

    @property
    def d_md(self) -> int:
        return self.phi_md.shape[1]

    @property
    def d_rm(self) -> int:
        return self.phi_rm.shape[1]

    def feature_vector(self, snippet: Snippet,
                       d_md: int | None = None, d_rm: int | None = None) -> np.ndarray:
        d_md = self.d_md if d_md is None else d_md
        d_rm = self.d_rm if d_rm is None else d_rm
        return fuse(project(snippet.md, self.phi_md[:, :d_md]),
                    project(snippet.rm, self.phi_rm[:, :d_rm]))

    def sliced_train_vectors(self, d_md: int, d_rm: int) -> np.ndarray:
        """Stored fused vectors restricted to the leading components.

        Column-major vectorization makes the first eta*d entries of each part
        exactly the projection onto the first d eigenvectors.
        """
        if d_md > self.d_md or d_rm > self.d_rm:
            raise ValueError(f"model trained with ({self.d_md}, {self.d_rm}) "
                             f"components, cannot slice ({d_md}, {d_rm})")
        md_part = self.train_vectors[:, :self.eta * d_md]
        rm_part = self.train_vectors[:, self.eta * self.d_md:
                                     self.eta * self.d_md + self.eta * d_rm]
        return np.hstack([md_part, rm_part])


def train_model(snippets: list[Snippet], d_md: int = D_MD_DEFAULT,
                d_rm: int = D_RM_DEFAULT) -> FeatureModel:
    if not snippets:
        raise ValueError("no training snippets")
    eta = snippets[0].eta
    mean_md, phi_md, ev_md = pca2d_train([s.md for s in snippets], d_md)
    mean_rm, phi_rm, ev_rm = pca2d_train([s.rm for s in snippets], d_rm)
    vectors = np.stack([fuse(project(s.md, phi_md), project(s.rm, phi_rm))
                        for s in snippets])
    return FeatureModel(eta=eta, mean_md=mean_md, mean_rm=mean_rm,
                        phi_md=phi_md, phi_rm=phi_rm,
                        eigvals_md=ev_md, eigvals_rm=ev_rm,
                        train_vectors=vectors,
                        train_labels=[s.label for s in snippets])


def nn_classify(query: np.ndarray, model: FeatureModel, class_set,
                k: int = 1, d_md: int | None = None,
                d_rm: int | None = None) -> tuple[str, float]:
    """Nearest-neighbor label among training vectors whose labels lie in
    ``class_set``; margin is (d2 - d1)/d2 over the two nearest distinct
    classes (1.0 when only one class is eligible).
    """
    class_set = set(class_set)
    if not class_set:
        raise ValueError("empty class set")
    labels = np.asarray(model.train_labels)
    eligible = np.isin(labels, sorted(class_set))
    if not eligible.any():
        raise ValueError("no training vectors for the requested classes")
    if d_md is None and d_rm is None:
        vectors = model.train_vectors[eligible]
    else:
        d_md = model.d_md if d_md is None else d_md
        d_rm = model.d_rm if d_rm is None else d_rm
        vectors = model.sliced_train_vectors(d_md, d_rm)[eligible]
    labels = labels[eligible]
    query = np.asarray(query, dtype=float)
    if query.size != vectors.shape[1]:
        raise ValueError(f"query length {query.size} != feature length {vectors.shape[1]}")
    dist = np.sqrt(((vectors - query[np.newaxis, :]) ** 2).sum(axis=1))
    order = np.argsort(dist, kind="stable")
    if k == 1:
        best = labels[order[0]]
    else:
        top = labels[order[:k]]
        uniq, counts = np.unique(top, return_counts=True)
        best = uniq[np.argmax(counts)]
    d1 = dist[labels == best].min()
    others = dist[labels != best]
    if others.size == 0:
        return str(best), 1.0
    d2 = others.min()
    if d2 == 0.0:
        return str(best), 0.0
    return str(best), float((d2 - d1) / d2)


@dataclass
class ConfusionMatrix:
    classes: list[str]
    counts: np.ndarray            # square, rows = true class
    rates: np.ndarray             # row-normalized percentages

    @property
    def accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else 0.0

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            fh.write("true\\pred," + ",".join(self.classes) + "\n")
            for i, cls in enumerate(self.classes):
                row = ",".join(f"{v:.1f}" for v in self.rates[i])
                fh.write(f"{cls},{row}\n")


def evaluate(model: FeatureModel, test_set: list[Snippet], class_set,
             k: int = 1, d_md: int | None = None, d_rm: int | None = None,
             classify=None) -> ConfusionMatrix:
    """Confusion matrix over exactly ``class_set`` (ordered), rows row-normalized
    to percentages.  ``classify`` may override the model-based classifier, e.g.
    with a stub."""
    classes = list(class_set)
    index = {c: i for i, c in enumerate(classes)}
    for s in test_set:
        if s.label not in index:
            raise ValueError(f"test label {s.label!r} outside the class set")
    counts = np.zeros((len(classes), len(classes)), dtype=int)
    for s in test_set:
        if classify is not None:
            pred, _ = classify(s, classes)
        else:
            vec = model.feature_vector(s, d_md=d_md, d_rm=d_rm)
            pred, _ = nn_classify(vec, model, classes, k=k, d_md=d_md, d_rm=d_rm)
        counts[index[s.label], index[pred]] += 1
    rates = np.zeros_like(counts, dtype=float)
    row_sums = counts.sum(axis=1)
    nz = row_sums > 0
    rates[nz] = counts[nz] / row_sums[nz, np.newaxis] * 100.0
    return ConfusionMatrix(classes=classes, counts=counts, rates=rates)


# ---------------------------------------------------------------------------
# PCA2 model file
# ---------------------------------------------------------------------------

_PCA_MAGIC = b"PCA2"
_PCA_HEADER = struct.Struct("<4sIIII")


def _write_f32(fh, arr) -> None:
    fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def _read_f32(fh, shape) -> np.ndarray:
    n = int(np.prod(shape))
    buf = fh.read(4 * n)
    if len(buf) != 4 * n:
        raise ValueError("truncated model file")
    return np.frombuffer(buf, dtype="<f4").reshape(shape).astype(float)


def save_model(model: FeatureModel, path) -> None:
    """PCA2 format: magic, eta, d_md, d_rm, n_train, then means, Phi matrices,
    eigenvalues, a label table, and the fused training vectors (all f32 LE)."""
    labels = sorted(set(model.train_labels))
    label_idx = {l: i for i, l in enumerate(labels)}
    with open(path, "wb") as fh:
        fh.write(_PCA_HEADER.pack(_PCA_MAGIC, model.eta, model.d_md, model.d_rm,
                                  len(model.train_labels)))
        _write_f32(fh, model.mean_md)
        _write_f32(fh, model.mean_rm)
        _write_f32(fh, model.phi_md)
        _write_f32(fh, model.phi_rm)
        _write_f32(fh, model.eigvals_md)
        _write_f32(fh, model.eigvals_rm)
        fh.write(struct.pack("<H", len(labels)))
        for l in labels:
            raw = l.encode("utf-8")
            fh.write(struct.pack("<B", len(raw)))
            fh.write(raw)
        for lbl, vec in zip(model.train_labels, model.train_vectors):
            fh.write(struct.pack("<H", label_idx[lbl]))
            _write_f32(fh, vec)


def load_model(path) -> FeatureModel:
    with open(path, "rb") as fh:
        raw = fh.read(_PCA_HEADER.size)
        if len(raw) != _PCA_HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, eta, d_md, d_rm, n_train = _PCA_HEADER.unpack(raw)
        if magic != _PCA_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        mean_md = _read_f32(fh, (eta, eta))
        mean_rm = _read_f32(fh, (eta, eta))
        phi_md = _read_f32(fh, (eta, d_md))
        phi_rm = _read_f32(fh, (eta, d_rm))
        ev_md = _read_f32(fh, (eta,))
        ev_rm = _read_f32(fh, (eta,))
        (n_labels,) = struct.unpack("<H", fh.read(2))
        labels = []
        for _ in range(n_labels):
            (ln,) = struct.unpack("<B", fh.read(1))
            labels.append(fh.read(ln).decode("utf-8"))
        vec_len = eta * (d_md + d_rm)
        train_labels, vectors = [], []
        for _ in range(n_train):
            (li,) = struct.unpack("<H", fh.read(2))
            train_labels.append(labels[li])
            vectors.append(_read_f32(fh, (vec_len,)))
    return FeatureModel(eta=eta, mean_md=mean_md, mean_rm=mean_rm,
                        phi_md=phi_md, phi_rm=phi_rm,
                        eigvals_md=ev_md, eigvals_rm=ev_rm,
                        train_vectors=np.stack(vectors) if vectors else np.zeros((0, vec_len)),
                        train_labels=train_labels)
