"""
Heatmap Renderer

Distance-matrix heatmaps (binary PGM or SVG) and curve tables for plotting.
Off-diagonal values are min-max scaled to gray levels 0..255; with
invert=True (the default) small distances are dark and the diagonal is black.
"""

import html
import io
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from PIL import Image

from stopprofiler.analyzers.distance_metrics import (DistanceMatrix,
                                                     reorder, variation_order)
from stopprofiler.analyzers.profile_builder import (HOUR_COLUMNS,
                                                    ProportionProfile,
                                                    order_by_global_seq)
from stopprofiler.core.apc import StopEvent, StopInfo
from stopprofiler.core.errors import (NotAPermutationError, UnknownStopError,
                                      UsageError)
from stopprofiler.utils.logger import get_logger

logger = get_logger(__name__)

MID_GRAY = 128


class ImageFormat(Enum):
    PGM = "pgm"
    SVG = "svg"


@dataclass(frozen=True)
class MatrixOrdering:
    """Row/column order of a heatmap: by global sequence or by one route variation"""
    variation_id: Optional[str] = None

    @property
    def by_global_seq(self) -> bool:
        return self.variation_id is None

    @classmethod
    def parse(cls, text: str) -> "MatrixOrdering":
        """`gseq` or `variation:<id>`"""
        text = text.strip()
        if text == "gseq":
            return cls()
        prefix, _, variation_id = text.partition(":")
        if prefix == "variation" and variation_id:
            return cls(variation_id=variation_id)
        raise UsageError(f"--order must be gseq or variation:<id>, got {text!r}")

    def __str__(self) -> str:
        return "gseq" if self.by_global_seq else f"variation:{self.variation_id}"


def resolve_ordering(ordering: MatrixOrdering, labels: Sequence[str],
                     infos: Optional[Mapping[str, StopInfo]] = None,
                     events: Optional[Sequence[StopEvent]] = None) -> List[int]:
    """
    Permutation putting `labels` into the requested order.

    Variation ordering lists the variation's stops in route order first,
    then the remaining stops in their current order.
    """
    position = {label: i for i, label in enumerate(labels)}
    if ordering.by_global_seq:
        if infos is None:
            raise UsageError("gseq ordering needs stop locations")
        return [position[s] for s in order_by_global_seq(labels, infos)]

    if events is None:
        raise UsageError("variation ordering needs events")
    route = [s for s in variation_order(events, ordering.variation_id) if s in position]
    on_route = set(route)
    rest = [s for s in labels if s not in on_route]
    return [position[s] for s in route + rest]


@dataclass(frozen=True, eq=False)
class HeatmapSpec:
    matrix: DistanceMatrix
    ordering: MatrixOrdering = MatrixOrdering()
    format: ImageFormat = ImageFormat.PGM
    invert: bool = True
    permutation: Optional[Tuple[int, ...]] = None
    value_range: Optional[Tuple[float, float]] = None
    cell_size: int = 8

    def __post_init__(self):
        if self.permutation is not None and len(self.permutation) != self.matrix.size:
            raise NotAPermutationError(
                f"ordering of length {len(self.permutation)} for a {self.matrix.size}-stop matrix"
            )


def gray_levels(matrix: DistanceMatrix, invert: bool = True,
                value_range: Optional[Tuple[float, float]] = None) -> np.ndarray:
    """
    Map a matrix to uint8 gray levels.

    The scale spans the off-diagonal minimum and maximum unless value_range
    fixes it (shared scaling across metrics). Midpoints round half to even.
    """
    n = matrix.size
    values = matrix.values
    off = ~np.eye(n, dtype=bool)
    if value_range is not None:
        lo, hi = value_range
    elif n > 1:
        lo, hi = float(values[off].min()), float(values[off].max())
    else:
        lo = hi = 0.0

    if hi > lo:
        scaled = np.clip(np.rint((values - lo) / (hi - lo) * 255.0), 0, 255)
        levels = scaled.astype(np.uint8)
    else:
        logger.warning(f"{matrix.metric.value}: all off-diagonal distances equal, rendering mid-gray")
        levels = np.full((n, n), MID_GRAY, dtype=np.uint8)
    np.fill_diagonal(levels, 0)
    if not invert:
        levels = (255 - levels).astype(np.uint8)
    return levels


def _encode_pgm(levels: np.ndarray) -> bytes:
    buffer = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(levels, dtype=np.uint8)).save(buffer, format="PPM")
    return buffer.getvalue()


def _encode_svg(levels: np.ndarray, labels: Sequence[str], cell: int) -> bytes:
    n = len(levels)
    size = n * cell
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}" shape-rendering="crispEdges">',
    ]
    for i in range(n):
        for j in range(n):
            g = int(levels[i, j])
            lines.append(
                f'  <rect x="{j * cell}" y="{i * cell}" width="{cell}" height="{cell}" '
                f'fill="rgb({g},{g},{g})"><title>{html.escape(labels[i])} / {html.escape(labels[j])}</title></rect>'
            )
    lines.append('</svg>')
    return ("\n".join(lines) + "\n").encode("utf-8")


def heatmap(spec: HeatmapSpec) -> bytes:
    """Render a (reordered) distance matrix as PGM (P5) or SVG bytes"""
    matrix = spec.matrix
    if spec.permutation is not None:
        matrix = reorder(matrix, spec.permutation)
    levels = gray_levels(matrix, spec.invert, spec.value_range)
    if spec.format is ImageFormat.PGM:
        return _encode_pgm(levels)
    return _encode_svg(levels, matrix.labels, spec.cell_size)


def curve_export(profiles: Mapping[str, ProportionProfile], ordering: Sequence[str]) -> bytes:
    """
    Proportion curves as CSV rows in the given stop order.

    Columns: stop_id, position_index (0-based), h00..h23.
    """
    missing = [s for s in ordering if s not in profiles]
    if missing:
        raise UnknownStopError(f"no profile for stop(s): {', '.join(missing)}")
    rows: List[Dict] = []
    for index, stop_id in enumerate(ordering):
        row = {"stop_id": stop_id, "position_index": index}
        row.update(zip(HOUR_COLUMNS, profiles[stop_id].proportions))
        rows.append(row)
    frame = pd.DataFrame(rows, columns=["stop_id", "position_index", *HOUR_COLUMNS])
    return frame.to_csv(index=False, lineterminator="\n", float_format="%.12g").encode("utf-8")
