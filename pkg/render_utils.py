"""
Render Utilities Module
Handles SVG output: neighbourhood comparison panels and attribution bar charts
"""
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from blackbox_utils import decision_grid
from domain_types import Explanation, Neighbourhood
from error_utils import ConfigError, DimensionError

SVG_NS = 'http://www.w3.org/2000/svg'

TITLE_HEIGHT = 24
GUTTER = 12
BOUNDS_PADDING = 0.05

GRID_COLORS = ('#fbe3d6', '#dbe9f6')
DATA_COLORS = ('#e6550d', '#3182bd')
FLAT_NEIGHBOUR_COLOR = '#1f5fbf'
STAR_COLOR = '#d62728'
BAR_COLORS = ('#3182bd', '#e6550d', '#31a354', '#756bb1', '#636363', '#8c6d31')

Bounds = Tuple[Tuple[float, float], Tuple[float, float]]


def _fmt(value: float) -> str:
    return f'{value:.3f}'


def weight_fill(weight: float, max_weight: float) -> str:
    """Grey level that gets darker as the weight grows (relative to the panel maximum)"""
    t = weight / max_weight if max_weight > 0 else 0.0
    level = 90.0 - 85.0 * min(max(t, 0.0), 1.0)
    return f'rgb({level:.6f}%,{level:.6f}%,{level:.6f}%)'


def fill_darkness(fill: str) -> float:
    """Darkness in [0, 100] of a fill written by weight_fill"""
    level = float(fill[len('rgb('):].split('%')[0])
    return 100.0 - level


@dataclass(frozen=True)
class Panel:
    """One sub-plot: decision raster, training scatter, neighbourhood scatter and the explained instance"""
    title: str
    bounds: Bounds
    star: np.ndarray
    data_points: np.ndarray
    data_labels: Optional[np.ndarray]
    nb_points: np.ndarray
    nb_weights: Optional[np.ndarray] = None
    grid: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ('star', 'data_points', 'nb_points'):
            values = np.atleast_2d(getattr(self, name))
            if values.size and values.shape[1] != 2:
                raise DimensionError(f'Panels render 2-D data only, {name} has d = {values.shape[1]}')
        (x0, x1), (y0, y1) = self.bounds
        if not (x0 < x1 and y0 < y1):
            raise ConfigError('Panel bounds must have positive extent')
        for values in (np.atleast_2d(self.star), self.data_points, self.nb_points):
            values = np.atleast_2d(values)
            if values.size and (values[:, 0].min() < x0 or values[:, 0].max() > x1
                                or values[:, 1].min() < y0 or values[:, 1].max() > y1):
                raise ConfigError(f"Panel '{self.title}': points fall outside the axis bounds")


def shared_bounds(point_sets: Sequence[np.ndarray], padding: float = BOUNDS_PADDING) -> Bounds:
    """Smallest box holding every point set, padded by a fraction of its extent"""
    stacked = np.vstack([np.atleast_2d(p) for p in point_sets if np.size(p)])
    if stacked.shape[1] != 2:
        raise DimensionError(f'Panels render 2-D data only, got d = {stacked.shape[1]}')
    lo = stacked.min(axis=0)
    hi = stacked.max(axis=0)
    extent = np.where(hi > lo, hi - lo, 1.0)
    lo = lo - padding * extent
    hi = hi + padding * extent
    return (float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1]))


def build_panels(model, data, z_e: np.ndarray, neighbourhoods: Sequence[Neighbourhood],
                 titles: Optional[Sequence[str]] = None, resolution: int = 200) -> List[Panel]:
    """
    Panels sharing axis bounds and one decision raster, one per neighbourhood.

    Raises:
        DimensionError: The data is not 2-D
    """
    if data.d != 2:
        raise DimensionError(f'Neighbourhood panels need 2-D data, got d = {data.d}')
    if not neighbourhoods:
        raise ConfigError('Nothing to render: no neighbourhoods')
    titles = list(titles) if titles is not None else [nb.strategy_id for nb in neighbourhoods]
    bounds = shared_bounds([data.rows, z_e] + [nb.points for nb in neighbourhoods])
    grid = decision_grid(model, bounds, resolution)
    return [Panel(title=title, bounds=bounds, star=z_e, data_points=data.rows, data_labels=data.labels,
                  nb_points=nb.points, nb_weights=nb.weights, grid=grid)
            for title, nb in zip(titles, neighbourhoods)]


def _star_path(cx: float, cy: float, outer: float, inner: float) -> str:
    corners = []
    for k in range(10):
        radius = outer if k % 2 == 0 else inner
        angle = -math.pi / 2 + k * math.pi / 5
        corners.append(f'{_fmt(cx + radius * math.cos(angle))},{_fmt(cy + radius * math.sin(angle))}')
    return 'M' + ' L'.join(corners) + ' Z'


class _Frame:
    """Data-to-pixel mapping for one panel"""

    def __init__(self, bounds: Bounds, left: float, top: float, size: float):
        (self.x0, self.x1), (self.y0, self.y1) = bounds
        self.left = left
        self.top = top
        self.size = size

    def px(self, x: float) -> float:
        return self.left + (x - self.x0) / (self.x1 - self.x0) * self.size

    def py(self, y: float) -> float:
        return self.top + (self.y1 - y) / (self.y1 - self.y0) * self.size


def _draw_grid(group: ET.Element, frame: _Frame, grid: np.ndarray):
    """One rect per run of equal labels along each raster row"""
    resolution = grid.shape[0]
    cell = frame.size / resolution
    for i in range(resolution):
        row = grid[i]
        top = frame.top + (resolution - 1 - i) * cell
        start = 0
        for j in range(1, resolution + 1):
            if j == resolution or row[j] != row[start]:
                ET.SubElement(group, 'rect', {
                    'x': _fmt(frame.left + start * cell), 'y': _fmt(top),
                    'width': _fmt((j - start) * cell), 'height': _fmt(cell),
                    'fill': GRID_COLORS[int(row[start])], 'class': 'grid'})
                start = j


def _draw_panel(root: ET.Element, panel: Panel, left: float, top: float, size: float):
    group = ET.SubElement(root, 'g', {'class': 'panel'})
    title = ET.SubElement(group, 'text', {'x': _fmt(left + size / 2), 'y': _fmt(top + 16),
                                          'text-anchor': 'middle', 'font-family': 'sans-serif',
                                          'font-size': '14'})
    title.text = panel.title
    frame = _Frame(panel.bounds, left, top + TITLE_HEIGHT, size)
    if panel.grid is not None:
        _draw_grid(group, frame, np.asarray(panel.grid))
    ET.SubElement(group, 'rect', {'x': _fmt(left), 'y': _fmt(frame.top), 'width': _fmt(size),
                                  'height': _fmt(size), 'fill': 'none', 'stroke': '#444444'})

    for k, point in enumerate(np.atleast_2d(panel.data_points)):
        label = int(panel.data_labels[k]) if panel.data_labels is not None else 0
        ET.SubElement(group, 'circle', {'cx': _fmt(frame.px(point[0])), 'cy': _fmt(frame.py(point[1])),
                                        'r': '1.5', 'fill': DATA_COLORS[label], 'fill-opacity': '0.35',
                                        'class': 'data'})

    points = np.atleast_2d(panel.nb_points)
    if panel.nb_weights is None:
        for point in points:
            ET.SubElement(group, 'circle', {'cx': _fmt(frame.px(point[0])), 'cy': _fmt(frame.py(point[1])),
                                            'r': '2.5', 'fill': FLAT_NEIGHBOUR_COLOR, 'class': 'neighbour',
                                            'data-x': repr(float(point[0])), 'data-y': repr(float(point[1]))})
    else:
        weights = np.asarray(panel.nb_weights, dtype=float)
        max_weight = float(weights.max()) if weights.size else 0.0
        for k in np.argsort(weights, kind='stable'):
            point = points[k]
            ET.SubElement(group, 'circle', {'cx': _fmt(frame.px(point[0])), 'cy': _fmt(frame.py(point[1])),
                                            'r': '2.5', 'fill': weight_fill(weights[k], max_weight),
                                            'class': 'neighbour', 'data-weight': repr(float(weights[k])),
                                            'data-x': repr(float(point[0])), 'data-y': repr(float(point[1]))})

    star = np.asarray(panel.star, dtype=float).reshape(-1)
    ET.SubElement(group, 'path', {'d': _star_path(frame.px(star[0]), frame.py(star[1]), 9.0, 3.8),
                                  'fill': STAR_COLOR, 'stroke': '#000000', 'stroke-width': '0.5',
                                  'class': 'star', 'data-x': repr(float(star[0])),
                                  'data-y': repr(float(star[1]))})


def _svg_root(width: float, height: float, stamp: Optional[Dict[str, Any]] = None) -> ET.Element:
    attrs = {'xmlns': SVG_NS, 'version': '1.1', 'width': _fmt(width),
             'height': _fmt(height), 'viewBox': f'0 0 {_fmt(width)} {_fmt(height)}'}
    for key, value in (stamp or {}).items():
        if value is not None:
            attrs[f"data-{key.replace('_', '-')}"] = str(value)
    return ET.Element('svg', attrs)


def _write_svg(root: ET.Element, path: str):
    document = ET.tostring(root, encoding='unicode')
    with open(path, 'w', encoding='utf-8') as f:
        f.write('<?xml version="1.0" encoding="UTF-8"?>\n' + document + '\n')


def render_neighbourhood_panels(panels: Sequence[Panel], rows: int, cols: int, path: str,
                                panel_size: int = 320, stamp: Optional[Dict[str, Any]] = None):
    """
    Write the panels as a rows x cols SVG grid.

    Weighted neighbourhoods are drawn in grey levels that darken with the
    weight, lightest first; unweighted ones in a single flat blue. The
    explained instance is a star in every panel. stamp (seed, config digest,
    tool version) lands as data-* attributes on the root element.
    """
    if not panels:
        raise ConfigError('Nothing to render: no panels')
    if rows * cols < len(panels):
        raise ConfigError(f'A {rows}x{cols} layout cannot hold {len(panels)} panels')
    cell_w = panel_size + GUTTER
    cell_h = panel_size + TITLE_HEIGHT + GUTTER
    root = _svg_root(cols * cell_w + GUTTER, rows * cell_h + GUTTER, stamp)
    for k, panel in enumerate(panels):
        r, c = divmod(k, cols)
        _draw_panel(root, panel, GUTTER + c * cell_w, GUTTER + r * cell_h, panel_size)
    _write_svg(root, path)


def render_attribution_bars(explanations: Sequence[Explanation], feature_names: Sequence[str], path: str,
                            width: int = 640, stamp: Optional[Dict[str, Any]] = None):
    """
    Grouped horizontal bars, one group per feature and one bar per method.

    Features are ordered by their largest absolute attribution across methods;
    bar lengths are proportional to the signed attribution around a zero line.

    Raises:
        DimensionError: Attributions disagree in length
    """
    attributed = [e for e in explanations if e.attribution is not None]
    if len(attributed) < len(explanations):
        print(f"ℹ️  Skipping {len(explanations) - len(attributed)} tree explanation(s) in the bar chart")
    if not attributed:
        raise ConfigError('No attribution explanations to render')
    lengths = {len(e.attribution) for e in attributed}
    if len(lengths) != 1:
        raise DimensionError(f'Attributions have mixed dimensions: {sorted(lengths)}')
    d = lengths.pop()
    if len(feature_names) != d:
        raise DimensionError(f'Got {len(feature_names)} feature names for {d} features')

    values = np.array([e.attribution for e in attributed], dtype=float)
    order = np.argsort(-np.abs(values).max(axis=0), kind='stable')
    max_abs = float(np.abs(values).max())

    bar_height = 14.0
    label_width = 120.0
    legend_height = 22.0 * len(attributed)
    group_height = bar_height * len(attributed) + 10.0
    plot_width = width - label_width - 2 * GUTTER
    zero = label_width + GUTTER + plot_width / 2
    scale = (plot_width / 2 - 4) / max_abs if max_abs > 0 else 0.0
    height = GUTTER * 2 + legend_height + group_height * d

    root = _svg_root(width, height, stamp)
    legend = ET.SubElement(root, 'g', {'class': 'legend'})
    for m, explanation in enumerate(attributed):
        y = GUTTER + 22.0 * m
        ET.SubElement(legend, 'rect', {'x': _fmt(label_width + GUTTER), 'y': _fmt(y), 'width': '12',
                                       'height': '12', 'fill': BAR_COLORS[m % len(BAR_COLORS)],
                                       'class': 'swatch'})
        text = ET.SubElement(legend, 'text', {'x': _fmt(label_width + GUTTER + 18), 'y': _fmt(y + 11),
                                              'font-family': 'sans-serif', 'font-size': '12'})
        text.text = f'{explanation.method} ({explanation.surrogate})'

    bars = ET.SubElement(root, 'g', {'class': 'bars'})
    top = GUTTER + legend_height
    for row, feature in enumerate(order):
        y = top + row * group_height
        label = ET.SubElement(bars, 'text', {'x': _fmt(label_width), 'y': _fmt(y + group_height / 2),
                                             'text-anchor': 'end', 'font-family': 'sans-serif',
                                             'font-size': '12'})
        label.text = str(feature_names[feature])
        for m in range(len(attributed)):
            value = values[m, feature]
            ET.SubElement(bars, 'rect', {'x': _fmt(zero + min(value, 0.0) * scale),
                                         'y': _fmt(y + m * bar_height), 'width': _fmt(abs(value) * scale),
                                         'height': _fmt(bar_height - 2), 'fill': BAR_COLORS[m % len(BAR_COLORS)],
                                         'class': 'bar', 'data-value': repr(float(value))})
    ET.SubElement(root, 'path', {'d': f'M{_fmt(zero)},{_fmt(top)} L{_fmt(zero)},{_fmt(height - GUTTER)}',
                                 'stroke': '#000000', 'stroke-width': '1', 'class': 'zero-line'})
    _write_svg(root, path)
