"""Tiny deterministic SVG writer for report plots.

Output is plain text assembled with fixed number formatting, so identical
inputs always produce byte-identical files.
"""

WIDTH, HEIGHT = 640, 420
MARGIN = 60


def _fmt(v):
    return f"{float(v):.3f}".rstrip("0").rstrip(".")


def _header(title):
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" font-family="sans-serif" font-size="16" '
        f'text-anchor="middle">{title}</text>',
    ]


def _axes(lines):
    x0, y0 = MARGIN, HEIGHT - MARGIN
    x1, y1 = WIDTH - MARGIN // 2, MARGIN // 2
    lines.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    lines.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    return x0, y0, x1, y1


def placeholder(title, message="no data"):
    lines = _header(title)
    lines.append(
        f'<text x="{WIDTH // 2}" y="{HEIGHT // 2}" font-family="sans-serif" font-size="14" '
        f'fill="#888" text-anchor="middle">{message}</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def bar_chart(labels, values, title, highlight=None):
    """Vertical bars; `highlight` labels are drawn in red."""
    if not labels:
        return placeholder(title)
    lines = _header(title)
    x0, y0, x1, y1 = _axes(lines)
    vmax = max(max(values), 1e-12)
    n = len(labels)
    span = x1 - x0
    bar_w = span / n * 0.8
    gap = span / n * 0.2
    for i, (label, value) in enumerate(zip(labels, values)):
        h = (y0 - y1) * (value / vmax)
        x = x0 + gap / 2 + i * (bar_w + gap)
        color = "#c22" if highlight and label in highlight else "#468"
        lines.append(
            f'<rect x="{_fmt(x)}" y="{_fmt(y0 - h)}" width="{_fmt(bar_w)}" '
            f'height="{_fmt(h)}" fill="{color}"/>'
        )
        lines.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{y0 + 16}" font-family="sans-serif" '
            f'font-size="10" text-anchor="middle">{label}</text>'
        )
        lines.append(
            f'<text x="{_fmt(x + bar_w / 2)}" y="{_fmt(y0 - h - 4)}" font-family="sans-serif" '
            f'font-size="9" text-anchor="middle">{_fmt(value)}</text>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def scatter(series, title):
    """series: {name: (xs, ys)}; first series blue, second red, rest gray."""
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys)]
    if not pts:
        return placeholder(title)
    lines = _header(title)
    x0, y0, x1, y1 = _axes(lines)
    xs_all = [p[0] for p in pts]
    ys_all = [p[1] for p in pts]
    xmin, xmax = min(xs_all), max(xs_all)
    ymin, ymax = min(ys_all), max(ys_all)
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0
    colors = ["#46a", "#c44", "#888", "#4a6"]
    legend_y = y1 + 10
    for idx, (name, (xs, ys)) in enumerate(series.items()):
        color = colors[idx % len(colors)]
        for x, y in zip(xs, ys):
            px = x0 + (x - xmin) / xspan * (x1 - x0)
            py = y0 - (y - ymin) / yspan * (y0 - y1)
            lines.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="2.5" fill="{color}" fill-opacity="0.55"/>')
        lines.append(
            f'<text x="{x1 - 120}" y="{legend_y + idx * 14}" font-family="sans-serif" '
            f'font-size="11" fill="{color}">{name}</text>'
        )
    lines.append(
        f'<text x="{(x0 + x1) // 2}" y="{HEIGHT - 16}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle">component 1</text>'
    )
    lines.append(
        f'<text x="16" y="{(y0 + y1) // 2}" font-family="sans-serif" font-size="11" '
        f'transform="rotate(-90 16 {(y0 + y1) // 2})" text-anchor="middle">component 2</text>'
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
