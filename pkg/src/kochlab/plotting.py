"""SVG figures for reports: Z histograms, QQ plots, decay fits and cover strips."""
from __future__ import annotations

import json
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from scipy import stats  # noqa: E402

from .birkhoff import loglog_slope  # noqa: E402
from .errors import DomainError, MalformedInputError  # noqa: E402
from .report import read_csv  # noqa: E402

KINDS = ("histogram", "qq", "decay", "cover")

plt.rcParams["svg.hashsalt"] = "kochlab"
plt.rcParams["svg.fonttype"] = "path"


def _save(fig, out) -> Path:
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return out


def _floats(col, name):
    try:
        return np.array([float(x) for x in col], dtype=np.float64)
    except ValueError as exc:
        raise MalformedInputError(f"column {name!r} is not numeric") from exc


def _load_samples(path: Path) -> list[tuple[float, np.ndarray, float | None]]:
    """(T, Z, sigma2) groups from a Z-sample CSV or a CLT result JSON."""
    if path.suffix == ".json":
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise MalformedInputError(f"cannot parse {path}: {exc}") from exc
        results = doc.get("results") if isinstance(doc, dict) else doc
        if not isinstance(results, list):
            raise MalformedInputError("JSON has no 'results' list")
        out = []
        for r in results:
            if "Z" not in r or "T" not in r:
                raise MalformedInputError("CLT result without Z samples")
            out.append((float(r["T"]), np.asarray(r["Z"], dtype=np.float64), r.get("sigma2")))
    else:
        header, rows = read_csv(path)
        if not rows or "Z" not in header or "T" not in header:
            raise MalformedInputError("Z-sample CSV needs columns T and Z and at least one row")
        T = _floats([r[header.index("T")] for r in rows], "T")
        Z = _floats([r[header.index("Z")] for r in rows], "Z")
        out = [(float(t), Z[T == t], None) for t in sorted(set(T.tolist()))]
    if not out or any(z.size == 0 for _, z, _ in out):
        raise MalformedInputError("empty Z sample")
    return out


def plot_histogram(path, out) -> Path:
    groups = _load_samples(Path(path))
    fig, ax = plt.subplots(figsize=(6, 4))
    for T, Z, _ in groups:
        ax.hist(Z, bins=60, density=True, histtype="step", label=f"T = {T:g}")
    T, Z, s2 = groups[-1]
    s = math.sqrt(s2) if s2 else float(np.std(Z, ddof=1))
    if s > 0:
        xs = np.linspace(Z.min(), Z.max(), 400)
        ax.plot(xs, stats.norm.pdf(xs, 0.0, s), "k--", lw=1, label="normal fit")
    ax.set_xlabel("Z")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    return _save(fig, out)


def plot_qq(path, out) -> Path:
    groups = _load_samples(Path(path))
    T, Z, s2 = groups[-1]
    s = math.sqrt(s2) if s2 else float(np.std(Z, ddof=1))
    n = Z.size
    theo = stats.norm.ppf((np.arange(1, n + 1) - 0.5) / n, 0.0, s if s > 0 else 1.0)
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(theo, np.sort(Z), ".", ms=2)
    lim = [min(theo.min(), Z.min()), max(theo.max(), Z.max())]
    ax.plot(lim, lim, "k--", lw=1)
    ax.set_xlabel(f"N(0, {s * s:.3g}) quantiles")
    ax.set_ylabel(f"Z quantiles, T = {T:g}")
    return _save(fig, out)


def plot_decay(path, out) -> Path:
    header, rows = read_csv(Path(path))
    if len(header) < 2 or not rows:
        raise MalformedInputError("decay CSV needs two columns and at least one row")
    x = _floats([r[0] for r in rows], header[0])
    y = _floats([r[1] for r in rows], header[1])
    keep = (x > 0) & (y > 0)
    if not np.any(x > 0):
        raise MalformedInputError("decay plot needs a positive abscissa")
    fig, ax = plt.subplots(figsize=(6, 4))
    if keep.sum() >= 2:
        ax.loglog(x[keep], y[keep], "o-")
        ax.set_title(f"fitted log-log slope {loglog_slope(x[keep], y[keep]):.3f}")
    else:
        # zeros cannot sit on a log axis; show them on a symlog scale instead
        ax.plot(x, y, "o-")
        ax.set_xscale("log")
        ax.set_yscale("symlog", linthresh=1e-6)
        ax.set_title("fitted log-log slope n/a (fewer than two positive points)")
    ax.set_xlabel(header[0])
    ax.set_ylabel(header[1])
    return _save(fig, out)


def plot_cover(path, out) -> Path:
    header, rows = read_csv(Path(path))
    if not rows or "lo" not in header or "hi" not in header:
        raise MalformedInputError("cover CSV needs columns lo and hi")
    lo = _floats([r[header.index("lo")] for r in rows], "lo")
    hi = _floats([r[header.index("hi")] for r in rows], "hi")
    level = (_floats([r[header.index("N")] for r in rows], "N") if "N" in header
             else np.zeros(lo.size))
    levels = sorted(set(level.tolist()))
    fig, ax = plt.subplots(figsize=(7, 1 + 0.5 * len(levels)))
    for i, lv in enumerate(levels):
        m = level == lv
        ax.broken_barh(list(zip(lo[m], hi[m] - lo[m])), (i - 0.4, 0.8))
    ax.set_yticks(range(len(levels)), [f"N = {lv:g}" for lv in levels])
    ax.set_xlim(0, 1)
    ax.set_xlabel("theta")
    return _save(fig, out)


def plot(path, kind: str, out) -> Path:
    if kind not in KINDS:
        raise DomainError(f"unknown plot kind {kind!r}; choose from {KINDS}")
    return {"histogram": plot_histogram, "qq": plot_qq, "decay": plot_decay,
            "cover": plot_cover}[kind](path, out)
