"""Figure renderers.

Pure functions of the input files: every number drawn or annotated is read
from the study artifacts (the displayed fit line uses the slope recorded in
summary.json, anchored through the data's log-centroid; the dashed guide
carries the predicted exponent, anchored at the largest size).  PNG output
embeds the slopes as text metadata so downstream tooling can check the
annotations without parsing pixels.
"""
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .readers import (
    SchemaError,
    read_field_csv,
    read_field_dump,
    read_rates,
    read_replicas,
    read_summary,
)


def _save(fig, out_path, metadata=None):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fmt = out_path.suffix.lstrip(".").lower() or "png"
    if fmt not in ("png", "svg", "pdf"):
        raise SchemaError(f"unsupported output format {fmt!r} (png, svg, pdf)")
    kwargs = {}
    if metadata and fmt == "png":
        kwargs["metadata"] = {k: repr(v) for k, v in metadata.items()}
    fig.savefig(out_path, dpi=150, **kwargs)
    plt.close(fig)
    return out_path


def render_rate_plot(in_dir, out_path):
    """Log-log error-vs-size plot with CI whiskers, fit line, and guide."""
    in_dir = Path(in_dir)
    rates = read_rates(in_dir / "rates.csv")
    summary = read_summary(in_dir / "summary.json")
    n = rates["N"].astype(float)
    est = rates["estimate"]
    slope = float(summary["slope"])
    kappa = float(summary["kappa_predicted"])

    fig, ax = plt.subplots(figsize=(6, 4.5))
    yerr = np.vstack([est - rates["ci_lo"], rates["ci_hi"] - est])
    ax.errorbar(n, est, yerr=np.maximum(yerr, 0.0), fmt="o", capsize=3,
                color="tab:blue", label="measured error")
    ax.plot(n, rates["init_term"], "s", ms=4, color="tab:gray", alpha=0.7,
            label="initial-condition term")
    # fit line through the log-centroid with the recorded slope
    log_n = np.log(n)
    anchor = np.exp(np.mean(np.log(est)) + slope * (log_n - np.mean(log_n)))
    ax.plot(n, anchor, "-", color="tab:blue", alpha=0.8,
            label=f"fit slope {slope:.3f}")
    # predicted-exponent guide anchored at the largest size
    guide = est[-1] * (n / n[-1]) ** (-kappa)
    ax.plot(n, guide, "--", color="tab:red",
            label=f"guide slope {-kappa:.3f}")
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("ensemble size N")
    ax.set_ylabel(f"moment (m={rates['m']:g}) of sup-in-time error")
    gamma = summary.get("gamma")
    gamma_txt = "-" if gamma is None else f"{gamma:g}"
    ax.set_title(
        f"beta={summary['beta']:g}, gamma={gamma_txt}, d={summary['d']}, "
        f"q={summary['q']:g}, m={rates['m']:g}"
    )
    ax.legend(fontsize=8)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, out_path,
                 metadata={"fitted_slope": slope, "guide_slope": -kappa})


def render_replica_spread(in_dir, out_path):
    """Per-replica spaghetti of the sup-in-time errors across sizes."""
    in_dir = Path(in_dir)
    rep = read_replicas(in_dir / "replicas.csv")
    fig, ax = plt.subplots(figsize=(6, 4.5))
    for seed in np.unique(rep["seed"]):
        mask = rep["seed"] == seed
        order = np.argsort(rep["N"][mask])
        ax.plot(rep["N"][mask][order], rep["sup_lq"][mask][order],
                "-o", ms=2.5, lw=0.8, alpha=0.55)
    fired = ~rep["cutoff_ok"]
    if np.any(fired):
        ax.plot(rep["N"][fired], rep["sup_lq"][fired], "x", color="red",
                ms=7, label="saturation event")
        ax.legend(fontsize=8)
    ax.set_xscale("log", base=2)
    ax.set_yscale("log")
    ax.set_xlabel("ensemble size N")
    ax.set_ylabel("sup-in-time error, one line per replica")
    ax.set_title(f"{int(np.unique(rep['seed']).size)} replicas")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    return _save(fig, out_path)


def _load_field(in_dir, field_file=None):
    in_dir = Path(in_dir)
    if field_file is not None:
        path = in_dir / field_file
        candidates = [path]
    else:
        candidates = sorted(in_dir.glob("fields_rho.bin")) or sorted(
            in_dir.glob("*.bin")
        ) or sorted(in_dir.glob("fields_*.csv"))
    if not candidates:
        raise SchemaError(f"no field dump found in {in_dir}")
    path = candidates[0]
    if path.suffix == ".csv":
        return path, read_field_csv(path)
    return path, read_field_dump(path)


def render_field_snapshot(in_dir, out_path, t=None, field_file=None):
    """Line plot (d=1) or heatmap (d=2) of the frame closest to t.

    Returns the output path and an info dict (time, mass, extrema) so
    callers can check what was drawn without parsing pixels.
    """
    path, (d, M, times, frames) = _load_field(in_dir, field_file)
    idx = int(np.argmin(np.abs(times - t))) if t is not None else len(times) - 1
    frame = frames[idx]
    mass = float(np.sum(frame) / M**d)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if d == 1:
        x = -0.5 + np.arange(M) / M
        ax.plot(x, frame, lw=1.2)
        ax.set_xlabel("x")
        ax.set_ylabel("density")
    elif d == 2:
        im = ax.imshow(
            frame.reshape(M, M).T,
            origin="lower",
            extent=(-0.5, 0.5, -0.5, 0.5),
            cmap="RdBu_r",
            vmin=frame.min(),
            vmax=frame.max(),
        )
        fig.colorbar(im, ax=ax, shrink=0.85)
        ax.set_xlabel("x1")
        ax.set_ylabel("x2")
    else:
        raise SchemaError(f"cannot render d={d} snapshots")
    ax.set_title(f"{path.name} at t={times[idx]:.4f}")
    ax.text(0.02, 0.02, f"mass {mass:.3f}", transform=ax.transAxes,
            fontsize=9, color="black",
            bbox=dict(facecolor="white", alpha=0.7, edgecolor="none"))
    fig.tight_layout()
    info = {
        "time": float(times[idx]),
        "mass": mass,
        "min": float(frame.min()),
        "max": float(frame.max()),
        "d": d,
        "M": M,
    }
    return _save(fig, out_path, metadata={"mass": mass}), info
