"""Deterministic SVG rendering of ground traces, responses, gains and metric bars.

Plain string assembly keeps the output byte-stable across runs and
platforms; no plotting backend is involved.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")
WIDTH, HEIGHT = 640, 400
MARGIN = 50
MAX_POINTS = 2000


class PlotError(ValueError):
    pass


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def _decimate(*cols):
    n = len(cols[0])
    if n <= MAX_POINTS:
        return cols
    idx = np.linspace(0, n - 1, MAX_POINTS).round().astype(int)
    return tuple(np.asarray(c)[idx] for c in cols)


class _Axes:
    def __init__(self, xs, ys, equal: bool = False, box=(MARGIN, MARGIN, WIDTH - MARGIN,
                                                            HEIGHT - MARGIN)):
        xs = np.concatenate([np.asarray(x, dtype=float).ravel() for x in xs])
        ys = np.concatenate([np.asarray(y, dtype=float).ravel() for y in ys])
        xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
        if xs.size == 0 or ys.size == 0:
            raise PlotError("nothing to plot")
        self.x0, self.x1 = float(xs.min()), float(xs.max())
        self.y0, self.y1 = float(ys.min()), float(ys.max())
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1, self.x1 + 1
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1, self.y1 + 1
        self.box = box
        if equal:
            bw, bh = box[2] - box[0], box[3] - box[1]
            s = max((self.x1 - self.x0) / bw, (self.y1 - self.y0) / bh)
            cx, cy = (self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2
            self.x0, self.x1 = cx - s * bw / 2, cx + s * bw / 2
            self.y0, self.y1 = cy - s * bh / 2, cy + s * bh / 2

    def px(self, x):
        l, _, r, _ = self.box
        return l + (np.asarray(x, dtype=float) - self.x0) / (self.x1 - self.x0) * (r - l)

    def py(self, y):
        _, t, _, b = self.box
        return b - (np.asarray(y, dtype=float) - self.y0) / (self.y1 - self.y0) * (b - t)

    def polyline(self, x, y, color, dashed=False, width=1.5) -> str:
        x, y = _decimate(np.asarray(x), np.asarray(y))
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(self.px(x), self.py(y))
                       if math.isfinite(a) and math.isfinite(b))
        dash = ' stroke-dasharray="6,4"' if dashed else ""
        return (f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{dash} '
                f'points="{pts}"/>')

    def frame(self, xlabel: str, ylabel: str, title: str) -> list[str]:
        l, t, r, b = self.box
        out = [f'<rect x="{l}" y="{t}" width="{r - l}" height="{b - t}" fill="none" '
               f'stroke="#000"/>',
               f'<text x="{(l + r) / 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>',
               f'<text x="14" y="{(t + b) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {(t + b) / 2})">{ylabel}</text>',
               f'<text x="{(l + r) / 2}" y="{t - 16}" text-anchor="middle">{title}</text>']
        for v, pos in ((self.x0, l), (self.x1, r)):
            out.append(f'<text x="{_fmt(pos)}" y="{b + 16}" text-anchor="middle">{v:.3g}</text>')
        for v, pos in ((self.y0, b), (self.y1, t)):
            out.append(f'<text x="{l - 4}" y="{_fmt(pos + 4)}" text-anchor="end">{v:.3g}</text>')
        return out


def _svg(body: Sequence[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">')
    return "\n".join([head, *body, "</svg>"]) + "\n"


def _legend(labels, colors, dashed=None) -> list[str]:
    out = []
    for i, (lab, col) in enumerate(zip(labels, colors)):
        y = MARGIN + 14 * i + 8
        dash = ' stroke-dasharray="6,4"' if dashed and dashed[i] else ""
        out.append(f'<line x1="{WIDTH - MARGIN - 110}" y1="{y}" x2="{WIDTH - MARGIN - 90}" '
                   f'y2="{y}" stroke="{col}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{WIDTH - MARGIN - 86}" y="{y + 4}">{lab}</text>')
    return out


def _check(telemetry):
    if telemetry is None or len(telemetry.get("t", ())) == 0:
        raise PlotError("empty telemetry")


def ground_trace_svg(runs: dict) -> str:
    """One polyline per run (east on the horizontal axis, north vertical)."""
    if not runs:
        raise PlotError("no runs to plot")
    for tel in runs.values():
        _check(tel)
    ax = _Axes([t["r_e"] for t in runs.values()], [t["r_n"] for t in runs.values()], equal=True)
    body = ax.frame("east [m]", "north [m]", "ground trace")
    colors = [PALETTE[i % len(PALETTE)] for i in range(len(runs))]
    for (name, tel), col in zip(runs.items(), colors):
        body.append(ax.polyline(tel["r_e"], tel["r_n"], col))
    body += _legend(list(runs), colors)
    return _svg(body)


def response_svg(telemetry: dict, signal: str) -> str:
    """Measured angle (solid) against its setpoint (black dashes), in degrees."""
    _check(telemetry)
    t = telemetry["t"]
    m = np.degrees(np.asarray(telemetry[f"{signal}_m"], dtype=float))
    s = np.degrees(np.asarray(telemetry[f"{signal}_s"], dtype=float))
    ax = _Axes([t], [m, s])
    label = {"phi": "bank", "theta": "elevation"}.get(signal, signal)
    body = ax.frame("t [s]", f"{label} [deg]", f"{label} response")
    body.append(ax.polyline(t, m, PALETTE[0]))
    body.append(ax.polyline(t, s, "#000", dashed=True))
    body += _legend(["measured", "setpoint"], [PALETTE[0], "#000"], [False, True])
    return _svg(body)


def gains_svg(telemetry: dict, fixed: dict) -> str:
    """Adaptive angle-loop gains (solid) with the degraded fixed gains dashed.

    ``fixed`` maps ``"theta"``/``"phi"`` to the scaled fixed gain value.
    """
    _check(telemetry)
    t = telemetry["t"]
    series = [("gain_theta", "theta"), ("gain_phi", "phi")]
    ys = [telemetry[c] for c, _ in series] + [np.array([fixed[k] for _, k in series])]
    ax = _Axes([t], ys)
    body = ax.frame("t [s]", "gain [1/s]", "adaptive gains")
    labels, colors, dashed = [], [], []
    for i, (col, key) in enumerate(series):
        c = PALETTE[i]
        body.append(ax.polyline(t, telemetry[col], c))
        body.append(ax.polyline([t[0], t[-1]], [fixed[key], fixed[key]], c, dashed=True))
        labels += [f"RCAC {key}", f"fixed {key}"]
        colors += [c, c]
        dashed += [False, True]
    body += _legend(labels, colors, dashed)
    return _svg(body)


def metrics_bar_svg(names: Sequence[str], normalized: Sequence[dict]) -> str:
    """Grouped bars of normalized J_Phi, J_Theta and J_traj per run."""
    if not names:
        raise PlotError("no runs to plot")
    keys = ("J_Phi", "J_Theta", "J_traj")
    vals = np.array([[n.get(k, math.nan) if n else math.nan for k in keys] for n in normalized])
    finite = vals[np.isfinite(vals)]
    top = max(1.0, float(finite.max()) if finite.size else 1.0)
    l, t, r, b = MARGIN, MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN - 40
    body = [f'<rect x="{l}" y="{t}" width="{r - l}" height="{b - t}" fill="none" stroke="#000"/>',
            f'<text x="{(l + r) / 2}" y="{t - 16}" text-anchor="middle">normalized error '
            f'metrics</text>']
    y1 = b - (b - t) / top
    body.append(f'<line x1="{l}" y1="{_fmt(y1)}" x2="{r}" y2="{_fmt(y1)}" stroke="#777" '
                f'stroke-dasharray="4,3"/>')
    group = (r - l) / len(names)
    bw = group / (len(keys) + 1)
    for i, name in enumerate(names):
        gx = l + i * group
        for j, k in enumerate(keys):
            v = vals[i, j]
            if not math.isfinite(v):
                continue
            h = (b - t) * v / top
            body.append(f'<rect x="{_fmt(gx + (j + 0.5) * bw)}" y="{_fmt(b - h)}" '
                        f'width="{_fmt(bw)}" height="{_fmt(h)}" fill="{PALETTE[j]}"/>')
        body.append(f'<text x="{_fmt(gx + group / 2)}" y="{b + 14}" text-anchor="middle" '
                    f'font-size="9">{name}</text>')
    body += _legend(list(keys), PALETTE[:3])
    return _svg(body)


def emit_plots(telemetry: dict, summary, out_dir, name: str = "run",
               fixed_gains: dict | None = None) -> list[Path]:
    """Ground trace, bank/elevation responses and, if present, adaptive gains."""
    _check(telemetry)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        f"{name}_ground.svg": ground_trace_svg({name: telemetry}),
        f"{name}_bank.svg": response_svg(telemetry, "phi"),
        f"{name}_elevation.svg": response_svg(telemetry, "theta"),
    }
    if fixed_gains is not None and np.any(np.asarray(telemetry["gain_phi"]) != 0):
        files[f"{name}_gains.svg"] = gains_svg(telemetry, fixed_gains)
    if summary is not None and summary.normalized:
        files[f"{name}_metrics.svg"] = metrics_bar_svg([name], [summary.normalized])
    paths = []
    for fname, text in files.items():
        p = out / fname
        p.write_text(text)
        paths.append(p)
    return paths


def write_sweep_plots(rows, out_dir) -> list[Path]:
    out = Path(out_dir)
    paths = []
    ok = [r for r in rows if len(r.result.telemetry["t"])]
    if ok:
        p = out / "ground_traces.svg"
        p.write_text(ground_trace_svg({r.name: r.result.telemetry for r in ok}))
        paths.append(p)
    p = out / "metrics.svg"
    p.write_text(metrics_bar_svg([r.name for r in rows],
                                 [r.result.summary.normalized if r.result.summary else {}
                                  for r in rows]))
    paths.append(p)
    for r in ok:
        p = out / f"{r.name}_ground.svg"
        p.write_text(ground_trace_svg({r.name: r.result.telemetry}))
        paths.append(p)
    return paths
