"""Saliency evaluation metrics (AUC-Judd, NSS, CC, SIM, KLD) and batch
evaluation over prediction / ground-truth directories.

All metrics accept 2-D numpy grids. Optional cos-latitude weighting
compensates the equirectangular oversampling of the poles for NSS, CC,
SIM, and KLD; AUC-Judd is always computed on the raw grid.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import losses
from .errors import DegenerateMapError
from .geometry import solid_angle_weights
from .imageio import load_grid

METRIC_NAMES = ("auc_j", "nss", "cc", "sim", "kld")


def _flat(x):
    return np.asarray(x, dtype=np.float64).ravel()


def auc_judd(sal, fix):
    """ROC area with thresholds at fixation-pixel saliency values (plus 0
    and 1); a pixel counts as 'above' a threshold when sal >= threshold."""
    s = _flat(sal)
    f = _flat(fix) > 0
    n_fix = int(f.sum())
    if n_fix == 0 or n_fix == f.size:
        raise ValueError("auc_judd needs both fixation and non-fixation pixels")
    thresholds = np.unique(np.concatenate([s[f], [0.0, 1.0]]))[::-1]
    sal_fix = s[f]
    sal_rest = s[~f]
    tpr = [(sal_fix >= t).mean() for t in thresholds]
    fpr = [(sal_rest >= t).mean() for t in thresholds]
    trapezoid = getattr(np, "trapezoid", np.trapz)
    return float(trapezoid(tpr, fpr))


def nss_metric(sal, fix, weights=None):
    """Mean standardized saliency at fixation pixels (positive-signed)."""
    s = _flat(sal)
    f = (_flat(fix) > 0).astype(np.float64)
    n_fix = f.sum()
    if n_fix < 1:
        raise DegenerateMapError("nss requires at least one fixation")
    if weights is None:
        mu, sigma = s.mean(), s.std()
        m_fix = (s * f).sum() / n_fix
    else:
        w = _flat(weights)
        w = w / w.sum()
        mu = (w * s).sum()
        sigma = np.sqrt((w * (s - mu) ** 2).sum())
        wf = w * f
        m_fix = (wf * s).sum() / wf.sum()
    if sigma == 0:
        raise DegenerateMapError("nss undefined for a constant saliency map")
    return float((m_fix - mu) / sigma)


def cc(sal, gt, weights=None):
    """Pearson correlation of the two maps as flat vectors."""
    a = _flat(sal)
    b = _flat(gt)
    if weights is None:
        w = np.full(a.size, 1.0 / a.size)
    else:
        w = _flat(weights)
        w = w / w.sum()
    am = a - (w * a).sum()
    bm = b - (w * b).sum()
    va = (w * am * am).sum()
    vb = (w * bm * bm).sum()
    if va == 0 or vb == 0:
        raise DegenerateMapError("cc undefined for a constant map")
    return float((w * am * bm).sum() / np.sqrt(va * vb))


def sim(sal, gt, weights=None):
    """Histogram intersection of the sum-normalized distributions."""
    a = _flat(sal)
    b = _flat(gt)
    if (a < 0).any() or (b < 0).any():
        raise ValueError("sim: inputs must be nonnegative")
    if weights is not None:
        w = _flat(weights)
        a = a * w
        b = b * w
    sa, sb = a.sum(), b.sum()
    if sa == 0 or sb == 0:
        raise ValueError("sim: zero-sum map")
    return float(np.minimum(a / sa, b / sb).sum())


def kld_metric(sal, gt, eps=losses.DEFAULT_EPS, weights=None):
    """KL divergence of gt from prediction, same kernel as the KL loss."""
    p = _flat(sal)
    q = _flat(gt)
    if (p < 0).any() or (q < 0).any():
        raise ValueError("kld: inputs must be nonnegative")
    if weights is not None:
        w = _flat(weights)
        p = p * w
        q = q * w
    sp, sq = p.sum(), q.sum()
    if sp == 0 or sq == 0:
        raise ValueError("kld: zero-sum map")
    p = p / sp
    q = q / sq
    return float((q * np.log(eps + q / (eps + p))).sum())


@dataclass
class MetricReport:
    """Per-frame metric rows plus aggregate means over valid frames."""

    video_id: str = ""
    frames: list = field(default_factory=list)  # (name, {metric: value|None})
    skipped: dict = field(default_factory=lambda: {m: 0 for m in METRIC_NAMES})
    unreadable: int = 0

    @property
    def frame_count(self):
        return len(self.frames)

    def aggregate(self):
        means = {}
        for m in METRIC_NAMES:
            vals = [row[m] for _, row in self.frames if row.get(m) is not None]
            means[m] = float(np.mean(vals)) if vals else float("nan")
        return means

    def to_csv(self):
        lines = ["frame," + ",".join(METRIC_NAMES)]
        for name, row in self.frames:
            cells = [
                f"{row[m]:.6f}" if row.get(m) is not None else ""
                for m in METRIC_NAMES
            ]
            lines.append(name + "," + ",".join(cells))
        agg = self.aggregate()
        lines.append("MEAN," + ",".join(f"{agg[m]:.6f}" for m in METRIC_NAMES))
        return "\n".join(lines) + "\n"


def _frame_metrics(sal, gt_sal, gt_fix, weights, eps):
    row = {}
    skipped = []
    for name, fn in (
        ("auc_j", lambda: auc_judd(sal, gt_fix)),
        ("nss", lambda: nss_metric(sal, gt_fix, weights)),
        ("cc", lambda: cc(sal, gt_sal, weights)),
        ("sim", lambda: sim(sal, gt_sal, weights)),
        ("kld", lambda: kld_metric(sal, gt_sal, eps, weights)),
    ):
        try:
            row[name] = fn()
        except (ValueError, DegenerateMapError):
            row[name] = None
            skipped.append(name)
    return row, skipped


def _worker_count():
    cap = os.environ.get("ODV_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return n


def evaluate_run(pred_dir, gt_sal_dir, gt_fix_dir, spherical=False,
                 eps=losses.DEFAULT_EPS, video_id=""):
    """Evaluate matching frame files across the three directories.

    Frames are matched by filename; per-metric degenerate frames are skipped
    and counted. Raises ValueError when no filenames match.
    """
    names = sorted(
        set(os.listdir(pred_dir))
        & set(os.listdir(gt_sal_dir))
        & set(os.listdir(gt_fix_dir))
    )
    names = [n for n in names if n.endswith((".pgm", ".f32"))]
    if not names:
        raise ValueError("no matching frame filenames across directories")
    report = MetricReport(video_id=video_id)
    weights_cache = {}

    def one(name):
        try:
            sal = load_grid(os.path.join(pred_dir, name))
            gt_sal = load_grid(os.path.join(gt_sal_dir, name))
            gt_fix = load_grid(os.path.join(gt_fix_dir, name))
        except Exception:
            return name, None, []
        w = None
        if spherical:
            key = sal.shape
            if key not in weights_cache:
                weights_cache[key] = solid_angle_weights(*key)
            w = weights_cache[key]
        row, skipped = _frame_metrics(sal, gt_sal, gt_fix, w, eps)
        return name, row, skipped

    with ThreadPoolExecutor(max_workers=_worker_count()) as pool:
        results = list(pool.map(one, names))
    for name, row, skipped in results:
        if row is None:
            report.unreadable += 1
            continue
        report.frames.append((name, row))
        for m in skipped:
            report.skipped[m] += 1
    return report
