"""Dataset distribution diagnostics.

Aggregates every sample's 3 s future into: a waypoint scatter, a histogram
of final-waypoint headings, a histogram of turn angles pooled over interior
waypoints, and the fraction of each that falls in the straight-driving bands
(+-0.2 rad for headings, +-0.02 rad for turn angles, bounds inclusive).
"""

from __future__ import annotations

from dataclasses import dataclass

from openloop.core import curvature_angles, heading_angles
from openloop.dataio import Dataset

HEADING_BAND = (-0.2, 0.2)
CURVATURE_BAND = (-0.02, 0.02)
DEFAULT_BINS = 100


@dataclass(frozen=True)
class Histogram:
    """Counts over contiguous bins; edges strictly increasing.

    Bins are uniform except that band boundaries are inserted as extra edges
    so band mass can be read off exactly.
    """

    edges: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.counts) + 1:
            raise ValueError("need exactly one more edge than bins")
        if any(a >= b for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("edges must be strictly increasing")

    @property
    def total(self) -> int:
        return sum(self.counts)

    def mass_between(self, lo: float, hi: float) -> int:
        """Total count of bins fully inside [lo, hi]."""
        out = 0
        for (a, b), c in zip(zip(self.edges, self.edges[1:]), self.counts):
            if a >= lo and b <= hi:
                out += c
        return out


def make_histogram(values, bins: int = DEFAULT_BINS, band: tuple[float, float] | None = None) -> Histogram:
    """Uniform histogram over the observed range, band edges inserted."""
    values = sorted(values)
    if not values:
        raise ValueError("cannot histogram an empty value list")
    lo, hi = values[0], values[-1]
    if hi - lo <= max(abs(lo), abs(hi), 1.0) * 1e-9:
        # degenerate range: pad so bin widths stay representable
        lo, hi = lo - 0.5, hi + 0.5
    width = (hi - lo) / bins
    edges = [lo + i * width for i in range(bins)] + [hi]
    if band is not None:
        for edge in band:
            if lo < edge < hi and all(abs(edge - e) > 1e-12 for e in edges):
                edges.append(edge)
        edges.sort()
    counts = [0] * (len(edges) - 1)
    for v in values:
        # values == hi land in the last bin
        idx = len(counts) - 1
        for i in range(len(counts)):
            if v < edges[i + 1]:
                idx = i
                break
        counts[idx] += 1
    return Histogram(edges=tuple(edges), counts=tuple(counts))


def band_fraction(values, band: tuple[float, float]) -> float:
    """Share of values inside the closed band."""
    values = list(values)
    if not values:
        raise ValueError("no values")
    lo, hi = band
    return sum(lo <= v <= hi for v in values) / len(values)


@dataclass(frozen=True)
class DistributionReport:
    scatter: tuple[tuple[float, float], ...]  # all future waypoints, (x, y)
    heading_hist: Histogram
    curvature_hist: Histogram
    heading_band_fraction: float
    curvature_band_fraction: float

    def as_dict(self) -> dict:
        return {
            "n_points": len(self.scatter),
            "heading_band_fraction": self.heading_band_fraction,
            "curvature_band_fraction": self.curvature_band_fraction,
            "heading_band": list(HEADING_BAND),
            "curvature_band": list(CURVATURE_BAND),
        }


def distribution_report(ds: Dataset, bins: int = DEFAULT_BINS) -> DistributionReport:
    """Aggregate futures of the whole dataset.

    Headings are taken at the final (3 s) waypoint of each sample; turn
    angles pool every interior future waypoint.
    """
    if len(ds) == 0:
        raise ValueError("cannot analyze an empty dataset")
    scatter = []
    headings = []
    curvatures = []
    for sample in ds.samples:
        scatter.extend((p.x, p.y) for p in sample.gt_future.waypoints)
        headings.append(heading_angles(sample.gt_future)[-1])
        curvatures.extend(curvature_angles(sample.gt_future))
    return DistributionReport(
        scatter=tuple(scatter),
        heading_hist=make_histogram(headings, bins, HEADING_BAND),
        curvature_hist=make_histogram(curvatures, bins, CURVATURE_BAND) if curvatures else make_histogram([0.0], bins),
        heading_band_fraction=band_fraction(headings, HEADING_BAND),
        curvature_band_fraction=band_fraction(curvatures, CURVATURE_BAND) if curvatures else 1.0,
    )


# ---------------------------------------------------------------------------
# Export: CSV plus minimal SVG renderings, all byte-deterministic.


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line)
            f.write("\n")


def _histogram_csv(hist: Histogram):
    yield "bin_lo,bin_hi,count"
    for (a, b), c in zip(zip(hist.edges, hist.edges[1:]), hist.counts):
        yield f"{a!r},{b!r},{c}"


def _svg_header(width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">'
    )


def _scatter_svg(points, width=600, height=600):
    yield _svg_header(width, height)
    yield '<rect width="100%" height="100%" fill="white"/>'
    if points:
        xs = [p[0] for p in points]
        ys = [p[1] for p in points]
        lo_x, hi_x = min(xs), max(xs)
        lo_y, hi_y = min(ys), max(ys)
        span = max(hi_x - lo_x, hi_y - lo_y, 1e-9)
        for x, y in points:
            # forward (+x) up, left (+y) to the left of the plot
            px = 0.5 * width - (y - 0.5 * (lo_y + hi_y)) / span * (width - 40)
            py = height - 20 - (x - lo_x) / span * (height - 40)
            yield f'<circle cx="{px:.2f}" cy="{py:.2f}" r="1.2" fill="steelblue" fill-opacity="0.35"/>'
    yield "</svg>"


def _histogram_svg(hist: Histogram, width=600, height=400):
    yield _svg_header(width, height)
    yield '<rect width="100%" height="100%" fill="white"/>'
    peak = max(max(hist.counts), 1)
    lo, hi = hist.edges[0], hist.edges[-1]
    span = max(hi - lo, 1e-9)
    for (a, b), c in zip(zip(hist.edges, hist.edges[1:]), hist.counts):
        x0 = 20 + (a - lo) / span * (width - 40)
        x1 = 20 + (b - lo) / span * (width - 40)
        h = c / peak * (height - 40)
        yield (
            f'<rect x="{x0:.2f}" y="{height - 20 - h:.2f}" width="{max(x1 - x0, 0.5):.2f}" '
            f'height="{h:.2f}" fill="steelblue"/>'
        )
    yield "</svg>"


def export_figures(report: DistributionReport, out_dir) -> list[str]:
    """Write scatter and histogram CSVs plus SVG renderings.

    Returns the filenames written.  Output is deterministic: the same report
    produces identical bytes.
    """
    import os

    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, lines):
        _write_lines(os.path.join(out_dir, name), lines)
        written.append(name)

    emit(
        "trajectory_points.csv",
        ["x,y"] + [f"{x!r},{y!r}" for x, y in report.scatter],
    )
    emit("heading_hist.csv", list(_histogram_csv(report.heading_hist)))
    emit("curvature_hist.csv", list(_histogram_csv(report.curvature_hist)))
    emit("trajectory_points.svg", list(_scatter_svg(report.scatter)))
    emit("heading_hist.svg", list(_histogram_svg(report.heading_hist)))
    emit("curvature_hist.svg", list(_histogram_svg(report.curvature_hist)))
    return written
