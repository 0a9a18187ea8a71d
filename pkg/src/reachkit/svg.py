"""Minimal deterministic SVG emission for traces and masks.

No plotting dependency: fixed-format floats keep output bytes stable for
identical inputs.
"""


def _fmt(x):
    return f"{float(x):.3f}"


class SvgCanvas:
    def __init__(self, bounds, size=640, pad=20):
        (self.x0, self.x1), (self.y0, self.y1) = bounds
        self.size = size
        self.pad = pad
        span = max(self.x1 - self.x0, self.y1 - self.y0)
        self.scale = (size - 2 * pad) / span
        self.parts = []

    def px(self, x, y):
        return (self.pad + (x - self.x0) * self.scale,
                self.size - self.pad - (y - self.y0) * self.scale)

    def circle(self, center, radius, fill="none", stroke="#444", width=1.0,
               dash=None):
        cx, cy = self.px(*center)
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
            f'r="{_fmt(radius * self.scale)}" fill="{fill}" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}"{dash_attr}/>')

    def polyline(self, points, stroke="#c22", width=1.5):
        pts = " ".join(f"{_fmt(px)},{_fmt(py)}"
                       for px, py in (self.px(x, y) for x, y in points))
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
            f'stroke-width="{_fmt(width)}"/>')

    def marker(self, center, label, color="#06c"):
        cx, cy = self.px(*center)
        self.parts.append(
            f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="4" fill="{color}"/>'
            f'<text x="{_fmt(cx + 6)}" y="{_fmt(cy - 6)}" '
            f'font-size="11" font-family="monospace">{label}</text>')

    def to_svg(self):
        return (f'<svg xmlns="http://www.w3.org/2000/svg" '
                f'width="{self.size}" height="{self.size}" '
                f'viewBox="0 0 {self.size} {self.size}">\n'
                '<rect width="100%" height="100%" fill="#fff"/>\n'
                + "\n".join(self.parts) + "\n</svg>\n")


def trace_svg(trace, scenario=None):
    """Trajectory plot: path colored by branch, plus world geometry."""
    xs = [float(r[1]) for r in trace]
    ys = [float(r[2]) for r in trace]
    if scenario is not None:
        bounds = scenario.domain
    else:
        m = 1.0
        bounds = ((min(xs) - m, max(xs) + m), (min(ys) - m, max(ys) + m))
    canvas = SvgCanvas(bounds)
    if scenario is not None:
        for s in scenario.safe_sets:
            canvas.circle(s.center, s.radius, stroke="#2a2", width=1.5,
                          dash="4 3")
        for o in scenario.obstacles:
            stroke = "#444" if o.known else "#c44"
            canvas.circle(o.center, o.radius, fill="#ddd", stroke=stroke,
                          dash=None if o.known else "5 3")
        for k, goal in enumerate(scenario.goals):
            canvas.marker(goal, f"G{k}")
    colors = {"nominal": "#c22", "learned": "#06c", "fallback": "#f80",
              "end": "#c22"}
    run = []
    branch = trace[0][10] if trace else "nominal"
    for row in trace:
        if row[10] != branch and run:
            canvas.polyline(run, stroke=colors.get(branch, "#c22"))
            run = run[-1:]
            branch = row[10]
        run.append((float(row[1]), float(row[2])))
    if len(run) > 1:
        canvas.polyline(run, stroke=colors.get(branch, "#c22"))
    return canvas.to_svg()


def mask_svg(mask2, bounds):
    """Raster mask as one SVG rect per run of set cells (row-major runs)."""
    import numpy as np

    canvas = SvgCanvas(bounds)
    arr = np.asarray(mask2, dtype=bool)
    nx, ny = arr.shape
    hx = (bounds[0][1] - bounds[0][0]) / (nx - 1)
    hy = (bounds[1][1] - bounds[1][0]) / (ny - 1)
    for i in range(nx):
        j = 0
        while j < ny:
            if arr[i, j]:
                j0 = j
                while j < ny and arr[i, j]:
                    j += 1
                x = bounds[0][0] + i * hx
                y_lo = bounds[1][0] + j0 * hy
                y_hi = bounds[1][0] + (j - 1) * hy
                px0, py0 = canvas.px(x - hx / 2, y_hi + hy / 2)
                px1, py1 = canvas.px(x + hx / 2, y_lo - hy / 2)
                canvas.parts.append(
                    f'<rect x="{_fmt(px0)}" y="{_fmt(py0)}" '
                    f'width="{_fmt(px1 - px0)}" height="{_fmt(py1 - py0)}" '
                    f'fill="#9cf" stroke="none"/>')
            else:
                j += 1
    return canvas.to_svg()
