"""Deterministic SVG figures: phase portrait, time series, bifurcation scatter.

Axis limits always span the plotted data extent plus a 5% margin on each
side; nullclines and guard lines are drawn across that window without
widening it.
"""

from __future__ import annotations

import os

import numpy as np

MARGIN = 0.05
COLORS = {"trajectory": "#d62728", "M_nullcline": "green", "Ib_nullcline": "blue", "guard": "0.3"}


def axis_limits(values, margin=MARGIN):
    """(lo, hi) = data extent widened by ``margin`` of the span on both sides."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    lo, hi = float(v.min()), float(v.max())
    span = hi - lo
    if span == 0.0:
        span = abs(lo) if lo != 0.0 else 1.0
    return lo - margin * span, hi + margin * span


def _figure():
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "wnv-impulse"
    matplotlib.rcParams["svg.fonttype"] = "none"
    from matplotlib.figure import Figure

    return Figure(figsize=(6.4, 4.8))


def _save(fig, path):
    from matplotlib.backends.backend_svg import FigureCanvasSVG

    FigureCanvasSVG(fig)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})


def dense_samples(traj, per_step=12):
    """Per-segment (t, y) sampled from the dense interpolant, ``per_step`` points per step."""
    out = []
    for seg in traj.segments:
        if len(seg.t) < 2:
            out.append((seg.t, seg.y))
            continue
        u = np.linspace(0.0, 1.0, per_step, endpoint=False)
        ts = np.concatenate([lo + u * (hi - lo) for lo, hi, _ in seg.steps()] + [seg.t[-1:]])
        ys = seg(ts)
        ys[-1] = seg.y[-1]
        out.append((ts, ys))
    return out


def _phase(ax, traj, params, policy):
    from .model import equilibria, ib_nullcline

    pieces = dense_samples(traj)
    M = np.concatenate([y[:, 0] for _, y in pieces])
    I = np.concatenate([y[:, -1] for _, y in pieces])
    xlim, ylim = axis_limits(M), axis_limits(I)
    eq = equilibria(params)
    if eq.endemic is not None:
        ax.axvline(eq.endemic.M, color=COLORS["M_nullcline"], lw=1, label="dM/dt = 0", gid="M_nullcline")
    ms = np.linspace(max(xlim[0], 0.0), xlim[1], 400)
    ax.plot(ms, ib_nullcline(ms, params), color=COLORS["Ib_nullcline"], lw=1, label="dI_b/dt = 0",
            gid="Ib_nullcline")
    if policy is not None:
        ax.axhline(policy.H_b, color=COLORS["guard"], ls="--", lw=1, label="I_b = H_b", gid="guard")
        ax.axhline(policy.phase_level, color=COLORS["guard"], ls=":", lw=1, label="I_b = (1-q) H_b",
                   gid="phase_set")
    for k, (_, y) in enumerate(pieces):
        ax.plot(y[:, 0], y[:, -1], color=COLORS["trajectory"], lw=1, gid=f"trajectory_{k}")
    for e in traj.events:
        ax.plot([e.pre[0], e.post[0]], [e.pre[-1], e.post[-1]], color=COLORS["trajectory"], lw=0.5,
                ls=":", gid=f"jump_{e.index}")
    ax.set_xlim(*xlim)
    ax.set_ylim(*ylim)
    ax.set_xlabel("M (mosquitoes)")
    ax.set_ylabel("I_b (infected birds)")
    ax.legend(loc="best", fontsize="small")


def _timeseries(fig, traj):
    pieces = dense_samples(traj)
    t = np.concatenate([p[0] for p in pieces])
    y = np.concatenate([p[1] for p in pieces])
    ax1 = fig.add_subplot(2, 1, 1)
    ax1.plot(t, y[:, -1], color="tab:blue", lw=1, gid="I_b")
    ax1.set_xlim(*axis_limits(t))
    ax1.set_ylim(*axis_limits(y[:, -1]))
    ax1.set_ylabel("I_b")
    ax2 = fig.add_subplot(2, 1, 2)
    ax2.plot(t, y[:, 0], color="tab:red", lw=1, gid="M")
    ax2.set_xlim(*axis_limits(t))
    ax2.set_ylim(*axis_limits(y[:, 0]))
    ax2.set_ylabel("M")
    ax2.set_xlabel("t (days)")


def _bifurcation(ax, scan):
    xs, ys = [], []
    for cell in scan.cells:
        xs.extend([cell.value] * len(cell.tail))
        ys.extend(cell.tail)
    if not xs:
        raise ValueError("scan has no recorded tail values to plot")
    ax.plot(xs, ys, ls="none", marker=".", ms=2, color="k", gid="tail")
    ax.set_xlim(*axis_limits(xs))
    ax.set_ylim(*axis_limits(ys))
    ax.set_xlabel(scan.swept_key)
    ax.set_ylabel("post-impulse M")


def emit_svg(data, kind: str, path, params=None, policy=None):
    """Render ``data`` (a Trajectory, or a ScanResult for ``bifurcation``) to ``path``."""
    if kind not in ("phase", "timeseries", "bifurcation"):
        raise ValueError(f"unknown plot kind {kind!r}")
    if kind == "bifurcation":
        if not getattr(data, "cells", None):
            raise ValueError("empty scan")
    else:
        if data is None or not data.segments or sum(len(s.t) for s in data.segments) == 0:
            raise ValueError("empty trajectory")
    fig = _figure()
    if kind == "phase":
        _phase(fig.add_subplot(1, 1, 1), data, params or data.params, policy or data.policy)
    elif kind == "timeseries":
        _timeseries(fig, data)
    else:
        _bifurcation(fig.add_subplot(1, 1, 1), data)
    fig.tight_layout()
    _save(fig, path)
    return path
