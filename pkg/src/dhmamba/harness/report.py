"""Run reports and file outputs: CSV tables, plain PGM images and optional PNG plots.

CSV column orders are fixed:

* loss log: ``step, lr, loss, grad_norm``
* evaluation: ``image, seed, model_nmse, model_psnr, model_ssim, zf_nmse, zf_psnr, zf_ssim``
* cost: ``layer, kind, params, macs``

PNG output needs matplotlib, which is imported lazily and only when asked for.
"""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..tensor.serialize import atomic_write_bytes, atomic_write_text

LOSS_COLUMNS = ("step", "lr", "loss", "grad_norm")
METRICS = ("nmse", "psnr", "ssim")


@dataclass
class ImageRow:
    image: int
    seed: int
    model_nmse: float
    model_psnr: float
    model_ssim: float
    zf_nmse: float
    zf_psnr: float
    zf_ssim: float


IMAGE_COLUMNS = tuple(f.name for f in fields(ImageRow))


@dataclass
class RunReport:
    losses: list[dict] = field(default_factory=list)  # one dict per step, keys LOSS_COLUMNS
    rows: list[ImageRow] = field(default_factory=list)
    seconds: float = 0.0

    def loss_values(self) -> np.ndarray:
        return np.array([r["loss"] for r in self.losses])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def aggregate(self) -> dict[str, tuple[float, float]]:
        """(mean, population std) per metric column."""
        out = {}
        for col in IMAGE_COLUMNS[2:]:
            v = self.column(col)
            out[col] = (float(v.mean()), float(v.std())) if v.size else (float("nan"), float("nan"))
        return out

    def summary(self) -> str:
        """Mean ± std table for model vs zero-filled."""
        agg = self.aggregate()
        lines = [f"{'':10s} {'PSNR (dB)':>16s} {'SSIM':>16s} {'NMSE':>16s}"]
        for who, label in (("zf", "zero-fill"), ("model", "model")):
            cells = []
            for m, fmt in (("psnr", "{:.2f} ± {:.2f}"), ("ssim", "{:.4f} ± {:.4f}"), ("nmse", "{:.4f} ± {:.4f}")):
                mean, std = agg[f"{who}_{m}"]
                cells.append(f"{fmt.format(mean, std):>16s}")
            lines.append(f"{label:10s} " + " ".join(cells))
        lines.append(f"images: {len(self.rows)}")
        return "\n".join(lines)

    def loss_csv(self) -> str:
        rows = [[r["step"], repr(float(r["lr"])), repr(float(r["loss"])), repr(float(r["grad_norm"]))]
                for r in self.losses]
        return to_csv(LOSS_COLUMNS, rows)

    def metrics_csv(self) -> str:
        rows = []
        for r in self.rows:
            d = asdict(r)
            rows.append([d["image"], d["seed"]] + [repr(float(d[c])) for c in IMAGE_COLUMNS[2:]])
        return to_csv(IMAGE_COLUMNS, rows)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------------------- PGM
def to_gray(img, lo: float | None = None, hi: float | None = None, maxval: int = 255) -> np.ndarray:
    """Linearly map a real image to integers 0..maxval (constant images map to 0)."""
    img = np.asarray(img, dtype=np.float64)
    lo = float(img.min()) if lo is None else lo
    hi = float(img.max()) if hi is None else hi
    if hi <= lo:
        return np.zeros(img.shape, dtype=np.int64)
    return np.clip(np.rint((img - lo) / (hi - lo) * maxval), 0, maxval).astype(np.int64)


def pgm_bytes(img, maxval: int = 255, **scale) -> bytes:
    """Plain (P2) PGM of a 2D array."""
    g = to_gray(img, maxval=maxval, **scale)
    h, w = g.shape
    body = "\n".join(" ".join(str(v) for v in row) for row in g)
    return f"P2\n{w} {h}\n{maxval}\n{body}\n".encode("ascii")


def write_pgm(path, img, maxval: int = 255, **scale) -> None:
    atomic_write_bytes(path, pgm_bytes(img, maxval, **scale))


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens += line.split("#", 1)[0].split()
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not a plain PGM")
    w, h, _ = int(tokens[1]), int(tokens[2]), int(tokens[3])
    return np.array([int(t) for t in tokens[4 : 4 + w * h]], dtype=np.int64).reshape(h, w)


def grid_csv(img) -> str:
    """i, j, value rows for a 2D array."""
    img = np.asarray(img)
    rows = [[i, j, repr(float(img[i, j]))] for i in range(img.shape[0]) for j in range(img.shape[1])]
    return to_csv(("i", "j", "value"), rows)


def write_text(path, text: str) -> None:
    atomic_write_text(path, text)


# ------------------------------------------------------------------- plots
def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the environment
        raise RuntimeError("PNG plots need matplotlib (install the 'plot' extra)") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path) -> None:
    buf = io.BytesIO()
    fig.savefig(buf, format="png", dpi=120, bbox_inches="tight")
    atomic_write_bytes(path, buf.getvalue())


def plot_image(path, img, title: str = "", cmap: str = "gray") -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(4, 4))
    im = ax.imshow(np.asarray(img), cmap=cmap)
    ax.set_title(title)
    ax.axis("off")
    fig.colorbar(im, ax=ax, fraction=0.046)
    _save(fig, path)
    plt.close(fig)


def plot_losses(path, report: RunReport) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([r["step"] for r in report.losses], report.loss_values(), lw=1)
    ax.set_xlabel("step")
    ax.set_ylabel("L1 loss")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    _save(fig, path)
    plt.close(fig)


def plot_metrics(path, report: RunReport) -> None:
    plt = _pyplot()
    fig, axes = plt.subplots(1, 3, figsize=(10, 3.2))
    for ax, m in zip(axes, METRICS):
        ax.bar(["zero-fill", "model"], [report.column(f"zf_{m}").mean(), report.column(f"model_{m}").mean()],
               yerr=[report.column(f"zf_{m}").std(), report.column(f"model_{m}").std()], capsize=4)
        ax.set_title(m.upper())
    _save(fig, path)
    plt.close(fig)


def plot_cost(path, names, macs) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.bar([str(n) for n in names], np.asarray(macs) / 1e6)
    ax.set_xlabel("low-resolution paths")
    ax.set_ylabel("MMACs")
    _save(fig, path)
    plt.close(fig)
