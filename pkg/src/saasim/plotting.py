"""Deterministic SVG rendering of a mission: world map with the flown
trajectory, and a sector occupancy heat strip over time.

The writer emits plain SVG with fixed-precision coordinates and no
timestamps, so the same trace always produces byte-identical output.
"""

from __future__ import annotations

from .world import Box, Circle, Scenario

_MAP_WIDTH = 900.0
_PAD = 40.0
_STRIP_ROW = 10.0
_STRIP_GAP = 30.0


def _f(value: float) -> str:
    return f"{value:.2f}"


def _heat(value: float) -> str:
    """White (free) to red (occupied)."""
    v = min(max(value, 0.0), 1.0)
    other = int(round(255.0 * (1.0 - v)))
    return f"rgb(255,{other},{other})"


def write_plot_svg(path, scenario: Scenario, trace) -> None:
    """Render a trace over its scenario map into an SVG file.

    Shows bounds, obstacles, the straight start-goal reference line, the
    flown path, start and goal markers, and a per-tick heat strip of the
    fused sector occupancy (sector 1 on top).
    """
    if not trace:
        raise ValueError("cannot plot an empty trace")
    (min_x, min_y), (max_x, max_y) = (scenario.bounds.min_corner,
                                      scenario.bounds.max_corner)
    scale = _MAP_WIDTH / (max_x - min_x)
    map_h = (max_y - min_y) * scale
    sectors = len(trace[0].pom)
    strip_h = sectors * _STRIP_ROW
    width = _MAP_WIDTH + 2 * _PAD
    height = map_h + strip_h + _STRIP_GAP + 2 * _PAD

    def toimg(x: float, y: float) -> tuple[float, float]:
        return (_PAD + (x - min_x) * scale, _PAD + (max_y - y) * scale)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" '
        f'height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">',
        f'<rect x="0" y="0" width="{_f(width)}" height="{_f(height)}" fill="white"/>',
        f'<rect x="{_f(_PAD)}" y="{_f(_PAD)}" width="{_f(_MAP_WIDTH)}" '
        f'height="{_f(map_h)}" fill="none" stroke="black" stroke-width="1"/>',
    ]
    for ob in scenario.obstacles:
        if isinstance(ob, Circle):
            cx, cy = toimg(*ob.center)
            parts.append(f'<circle cx="{_f(cx)}" cy="{_f(cy)}" '
                         f'r="{_f(ob.radius * scale)}" fill="dimgray"/>')
        elif isinstance(ob, Box):
            x0, y0 = toimg(ob.min_corner[0], ob.max_corner[1])
            parts.append(f'<rect x="{_f(x0)}" y="{_f(y0)}" '
                         f'width="{_f((ob.max_corner[0] - ob.min_corner[0]) * scale)}" '
                         f'height="{_f((ob.max_corner[1] - ob.min_corner[1]) * scale)}" '
                         f'fill="dimgray"/>')
    sx, sy = toimg(*scenario.start)
    gx, gy = toimg(*scenario.goal)
    parts.append(f'<line x1="{_f(sx)}" y1="{_f(sy)}" x2="{_f(gx)}" y2="{_f(gy)}" '
                 f'stroke="silver" stroke-width="1" stroke-dasharray="6,4"/>')
    points = " ".join(f"{_f(px)},{_f(py)}"
                      for px, py in (toimg(r.x, r.y) for r in trace))
    parts.append(f'<polyline points="{points}" fill="none" stroke="royalblue" '
                 f'stroke-width="1.5"/>')
    parts.append(f'<circle cx="{_f(sx)}" cy="{_f(sy)}" r="5" fill="seagreen"/>')
    parts.append(f'<circle cx="{_f(gx)}" cy="{_f(gy)}" r="5" fill="crimson"/>')

    strip_top = map_h + _STRIP_GAP + _PAD
    cell_w = _MAP_WIDTH / len(trace)
    for i, row in enumerate(trace):
        x0 = _PAD + i * cell_w
        for s in range(sectors):
            parts.append(f'<rect x="{_f(x0)}" y="{_f(strip_top + s * _STRIP_ROW)}" '
                         f'width="{_f(cell_w + 0.25)}" height="{_f(_STRIP_ROW)}" '
                         f'fill="{_heat(row.pom[s])}"/>')
    parts.append(f'<text x="{_f(_PAD)}" y="{_f(strip_top - 6)}" '
                 f'font-family="monospace" font-size="11">sector occupancy '
                 f'(top: sector 1) over ticks</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
