"""Dataset ingestion, SNP encoding, PCA and synthetic 2-D patterns."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .energy import DataError, Dataset

DEFAULT_MISSING_CODES = frozenset({"", "--", "00", "NN", "??", "NA"})


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


# ---------------------------------------------------------------- CSV I/O

def _resolve_column(spec, header, width, what):
    if spec is None:
        return None
    if isinstance(spec, int) or (isinstance(spec, str) and spec.lstrip("-").isdigit()):
        col = int(spec)
        if not -width <= col < width:
            raise DataError(f"{what} column {col} out of range for {width} columns")
        return col % width
    if header is None:
        raise DataError(f"{what} column {spec!r} given by name but the file has no header")
    try:
        return header.index(spec)
    except ValueError:
        raise DataError(f"{what} column {spec!r} not found in header {header}") from None


def read_csv(
    source,
    delimiter: str = ",",
    has_header: bool = True,
    weight_column=None,
    label_column=None,
) -> Dataset:
    """Read a numeric table into a :class:`Dataset`.

    ``source`` is a path or a text stream. Weight and label columns may be
    given by header name or by 0-based index; without a weight column every
    point has unit weight. All other columns must be numeric.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh, delimiter=delimiter))
    else:
        rows = list(csv.reader(source, delimiter=delimiter))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    header = None
    first_line = 1
    if has_header:
        if not rows:
            raise DataError("empty file")
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    if not rows:
        raise DataError("file contains no data rows")
    width = len(header) if header is not None else len(rows[0])
    wcol = _resolve_column(weight_column, header, width, "weight")
    lcol = _resolve_column(label_column, header, width, "label")
    coords = [c for c in range(width) if c not in (wcol, lcol)]
    if not coords:
        raise DataError("no coordinate columns")
    pts = np.empty((len(rows), len(coords)))
    weights = np.ones(len(rows))
    labels = [] if lcol is not None else None
    for i, row in enumerate(rows):
        line = first_line + i
        if len(row) != width:
            raise DataError(f"row {line}: expected {width} fields, found {len(row)}")
        for j, c in enumerate(coords):
            try:
                pts[i, j] = float(row[c])
            except ValueError:
                name = header[c] if header else str(c)
                raise DataError(f"row {line}, column {name!r}: non-numeric value {row[c]!r}") from None
        if wcol is not None:
            try:
                weights[i] = float(row[wcol])
            except ValueError:
                raise DataError(f"row {line}: non-numeric weight {row[wcol]!r}") from None
        if labels is not None:
            labels.append(row[lcol].strip())
    if not np.all(np.isfinite(pts)):
        i, j = np.argwhere(~np.isfinite(pts))[0]
        raise DataError(f"row {first_line + i}, column {j}: non-finite value")
    return Dataset(pts, weights, None if labels is None else tuple(labels))


load_csv = read_csv


def dataset_to_csv(dataset: Dataset, include_weights: bool | None = None, delimiter: str = ",") -> str:
    """Serialize with 17 significant digits so the round trip is exact."""
    if include_weights is None:
        include_weights = not np.all(dataset.weights == 1.0)
    buf = io.StringIO()
    w = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    header = [f"x{j}" for j in range(dataset.dim)]
    if include_weights:
        header.append("weight")
    if dataset.labels is not None:
        header.append("label")
    w.writerow(header)
    for i in range(dataset.n):
        row = [_fmt(v) for v in dataset.points[i]]
        if include_weights:
            row.append(_fmt(dataset.weights[i]))
        if dataset.labels is not None:
            row.append(dataset.labels[i])
        w.writerow(row)
    return buf.getvalue()


def write_csv(dataset: Dataset, path, **kw) -> None:
    Path(path).write_text(dataset_to_csv(dataset, **kw), encoding="utf-8")


# ---------------------------------------------------------------- SNP tables

def _is_homozygous(code: str) -> bool:
    return len(code) >= 1 and len(set(code)) == 1


@dataclass
class SnpEncoding:
    dataset: Dataset
    kept: list[str]
    dropped: list[str]


def snp_encode(
    table: Sequence[Sequence[str]],
    columns: Sequence[str] | None = None,
    labels: Sequence[str] | None = None,
    missing_codes=DEFAULT_MISSING_CODES,
) -> SnpEncoding:
    """Encode a genotype matrix (rows = individuals, columns = SNPs).

    Homozygous codes map to 0. The (at most two) heterozygous codes of a
    column map to -1 and +1 in lexicographic order. Columns holding any
    missing code are dropped.
    """
    arr = np.asarray(table, dtype=object)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise DataError("genotype table must be a non-empty 2-D table")
    n, m = arr.shape
    names = list(columns) if columns is not None else [str(j) for j in range(m)]
    if len(names) != m:
        raise DataError(f"{len(names)} column names for {m} columns")
    out, kept, dropped = [], [], []
    for j in range(m):
        col = [str(v).strip() for v in arr[:, j]]
        if any(c in missing_codes for c in col):
            dropped.append(names[j])
            continue
        statuses = sorted(set(col))
        if len(statuses) > 3:
            raise DataError(f"SNP column {names[j]!r} has {len(statuses)} distinct statuses: {statuses}")
        het = [s for s in statuses if not _is_homozygous(s)]
        if len(het) > 2:
            raise DataError(f"SNP column {names[j]!r} has more than two heterozygous codes: {het}")
        code = {s: 0.0 for s in statuses if _is_homozygous(s)}
        code.update(zip(het, (-1.0, 1.0)))
        out.append([code[c] for c in col])
        kept.append(names[j])
    if not out:
        raise DataError("every SNP column was dropped as unreliable")
    pts = np.array(out, dtype=float).T
    return SnpEncoding(Dataset.from_points(pts, labels=labels), kept, dropped)


def read_snp_table(path, label_column: str | None = None, missing_codes=DEFAULT_MISSING_CODES) -> SnpEncoding:
    """Read a tab-separated genotype table with a header row of SNP ids."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh, delimiter="\t") if r]
    if len(rows) < 2:
        raise DataError("SNP table needs a header row and at least one individual")
    header = [c.strip() for c in rows[0]]
    body = rows[1:]
    for i, r in enumerate(body, 2):
        if len(r) != len(header):
            raise DataError(f"row {i}: expected {len(header)} fields, found {len(r)}")
    labels = None
    if label_column is not None:
        lc = _resolve_column(label_column, header, len(header), "label")
        labels = [r[lc].strip() for r in body]
        header = header[:lc] + header[lc + 1:]
        body = [r[:lc] + r[lc + 1:] for r in body]
    return snp_encode(body, header, labels, missing_codes)


# ---------------------------------------------------------------- PCA

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (c, m), rows orthonormal
    explained_variance: np.ndarray

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "components": [[float(v) for v in row] for row in self.components],
            "explained_variance": [float(v) for v in self.explained_variance],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PcaModel":
        return cls(np.asarray(doc["mean"], float), np.atleast_2d(np.asarray(doc["components"], float)),
                   np.asarray(doc["explained_variance"], float))


def pca_fit(dataset: Dataset, c: int) -> PcaModel:
    """Top-``c`` principal directions of the weighted, centered data, via SVD.

    Variances are weighted population variances (normalized by the total
    weight). Each component's sign is fixed so that its largest-magnitude
    entry is positive.
    """
    if not 1 <= c <= min(dataset.n, dataset.dim):
        raise DataError(f"component count {c} outside [1, {min(dataset.n, dataset.dim)}]")
    w = dataset.weights / dataset.weights.sum()
    mean = w @ dataset.points
    scaled = np.sqrt(w)[:, None] * (dataset.points - mean)
    _, s, vt = np.linalg.svd(scaled, full_matrices=False)
    comps = vt[:c].copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean, comps, s[:c] ** 2)


def pca_project(model: PcaModel, dataset: Dataset) -> Dataset:
    if dataset.dim != model.mean.shape[0]:
        raise DataError(f"data dimension {dataset.dim} != model dimension {model.mean.shape[0]}")
    return Dataset((dataset.points - model.mean) @ model.components.T, dataset.weights, dataset.labels)


def pca_reconstruct(model: PcaModel, projected: np.ndarray) -> np.ndarray:
    return np.asarray(projected) @ model.components + model.mean


# ---------------------------------------------------------------- patterns

SPIRAL_THETA = (0.5 * math.pi, 3.5 * math.pi)
_SPIRAL_A = 1.0 / SPIRAL_THETA[1]


@dataclass(frozen=True)
class PatternSpec:
    kind: str = "spiral"
    n_points: int = 1000
    noise_fraction: float = 0.0
    jitter: float = 0.02
    bbox: tuple[float, float, float, float] = (-1.2, -1.2, 1.2, 1.2)  # xmin, ymin, xmax, ymax
    seed: int = 0

    def __post_init__(self):
        if self.kind not in PATTERNS:
            raise DataError(f"unknown pattern {self.kind!r}; choose from {sorted(PATTERNS)}")
        if self.n_points < 1:
            raise DataError("n_points must be positive")
        if not 0 <= self.noise_fraction < 1:
            raise DataError("noise_fraction must lie in [0, 1)")
        if self.jitter < 0:
            raise DataError("jitter must be non-negative")
        x0, y0, x1, y1 = self.bbox
        if not (x1 > x0 and y1 > y0):
            raise DataError(f"degenerate bounding box {self.bbox}")


def _spiral(t: np.ndarray) -> np.ndarray:
    theta = SPIRAL_THETA[0] + t * (SPIRAL_THETA[1] - SPIRAL_THETA[0])
    r = _SPIRAL_A * theta
    return np.column_stack([r * np.cos(theta), r * np.sin(theta)])


def _segments(*segs):
    segs = [(np.asarray(a, float), np.asarray(b, float)) for a, b in segs]

    def curve(t: np.ndarray) -> list[np.ndarray]:
        return [a + t[:, None] * (b - a) for a, b in segs]

    return curve, [float(np.linalg.norm(b - a)) for a, b in segs]


def _y_branch():
    ends = [(math.cos(a), math.sin(a)) for a in np.deg2rad([90.0, 210.0, 330.0])]
    return _segments(*[((0.0, 0.0), e) for e in ends])


def _kappa():
    # stem plus two arms leaving its midpoint
    return _segments(((-0.4, -1.0), (-0.4, 1.0)), ((-0.4, 0.0), (0.6, 1.0)), ((-0.4, 0.0), (0.6, -1.0)))


PATTERNS = {"spiral", "kappa", "y_branch", "segment"}


def _stroke_sampler(kind: str):
    """(list of stroke functions t in [0,1] -> points, list of stroke lengths)."""
    if kind == "spiral":
        tt = np.linspace(0.0, 1.0, 20001)
        p = _spiral(tt)
        seg = np.linalg.norm(np.diff(p, axis=0), axis=1)
        cum = np.concatenate([[0.0], np.cumsum(seg)])

        def arc(u):
            # uniform in arc length, evaluated exactly on the curve
            return _spiral(np.interp(u * cum[-1], cum, tt))

        return [arc], [float(cum[-1])]
    if kind == "segment":
        curve, lengths = _segments(((-1.0, 0.0), (1.0, 0.0)))
    elif kind == "y_branch":
        curve, lengths = _y_branch()
    else:
        curve, lengths = _kappa()
    strokes = [(lambda u, i=i: curve(u)[i]) for i in range(len(lengths))]
    return strokes, lengths


def pattern_curve(kind: str, n: int = 20000) -> np.ndarray:
    """Dense noise-free samples of the pattern (for distance measurements)."""
    strokes, lengths = _stroke_sampler(kind)
    total = sum(lengths)
    parts = []
    for f, L in zip(strokes, lengths):
        k = max(2, int(round(n * L / total)))
        parts.append(f(np.linspace(0.0, 1.0, k)))
    return np.vstack(parts)


def distance_to_pattern(points: np.ndarray, kind: str, n: int = 20000) -> np.ndarray:
    curve = pattern_curve(kind, n)
    pts = np.atleast_2d(points)
    out = np.empty(pts.shape[0])
    for i, p in enumerate(pts):
        d = curve - p
        out[i] = math.sqrt(float(np.min(np.einsum("ij,ij->i", d, d))))
    return out


def generate_pattern(spec: PatternSpec) -> Dataset:
    """Points along the pattern with Gaussian jitter, plus uniform background
    noise in ``spec.bbox``. Labels are ``"pattern"`` or ``"noise"``."""
    rng = np.random.default_rng(spec.seed)
    n_noise = int(round(spec.n_points * spec.noise_fraction))
    n_pat = spec.n_points - n_noise
    strokes, lengths = _stroke_sampler(spec.kind)
    probs = np.asarray(lengths) / sum(lengths)
    which = rng.choice(len(strokes), size=n_pat, p=probs)
    u = rng.random(n_pat)
    pat = np.empty((n_pat, 2))
    for i, f in enumerate(strokes):
        sel = which == i
        if sel.any():
            pat[sel] = f(u[sel])
    if spec.jitter > 0:
        pat = pat + rng.normal(scale=spec.jitter, size=pat.shape)
    x0, y0, x1, y1 = spec.bbox
    noise = np.column_stack([rng.uniform(x0, x1, n_noise), rng.uniform(y0, y1, n_noise)])
    labels = ("pattern",) * n_pat + ("noise",) * n_noise
    return Dataset(np.vstack([pat, noise]), np.ones(spec.n_points), labels)


# ---------------------------------------------------------------- SNP-like surrogate

@dataclass(frozen=True)
class BranchingSnpSpec:
    """Synthetic genotype matrix whose individuals lie along branches of a
    latent star-shaped tree. Branch ``b`` is the label of its individuals."""

    n_branches: int = 4
    per_branch: int = 60
    n_snps: int = 50
    gap: float = 2.0
    length: float = 3.0
    spread: float = 0.08
    flip: float = 0.02
    seed: int = 0
    alleles: tuple[str, str, str] = field(default=("AA", "AG", "GA"))


def branching_snp_table(spec: BranchingSnpSpec) -> tuple[list[list[str]], list[str], list[str]]:
    """Return ``(table, snp_ids, labels)`` with codes drawn from ``spec.alleles``.

    Latent coordinates live in R^3: branch ``b`` runs from ``gap * u_b`` to
    ``(gap + length) * u_b`` for unit directions ``u_b`` spread on the
    sphere. A random linear map sends latent points to 50 continuous
    scores that are thresholded into -1/0/+1, then into genotype codes.
    """
    rng = np.random.default_rng(spec.seed)
    dirs = _sphere_directions(spec.n_branches)
    latent, labels = [], []
    for b, u in enumerate(dirs):
        t = rng.uniform(spec.gap, spec.gap + spec.length, spec.per_branch)
        pts = t[:, None] * u + rng.normal(scale=spec.spread, size=(spec.per_branch, 3))
        latent.append(pts)
        labels += [f"branch{b}"] * spec.per_branch
    Z = np.vstack(latent)
    loadings = rng.normal(size=(3, spec.n_snps))
    scores = Z @ loadings / (spec.gap + spec.length)
    values = np.where(scores > 0.5, 1, np.where(scores < -0.5, -1, 0))
    flips = rng.random(values.shape) < spec.flip
    values = np.where(flips, rng.integers(-1, 2, size=values.shape), values)
    hom, het_lo, het_hi = spec.alleles
    code = {0: hom, -1: het_lo, 1: het_hi}
    table = [[code[int(v)] for v in row] for row in values]
    return table, [f"snp{j}" for j in range(spec.n_snps)], labels


def _sphere_directions(k: int) -> np.ndarray:
    if k == 4:
        d = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
        return d / np.linalg.norm(d, axis=1, keepdims=True)
    # Fibonacci sphere
    i = np.arange(k) + 0.5
    phi = np.arccos(1 - 2 * i / k)
    theta = math.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])
