"""TSPLIB instance parsing and exact integer edge weights.

Supports the symmetric TSP subset of the TSPLIB95 format with edge weight
types EUC_2D, CEIL_2D, GEO, ATT and EXPLICIT (FULL_MATRIX and the four
triangular row formats).  All distances follow the TSPLIB rounding
conventions and are exact integers, so tour lengths computed anywhere in
this package are exact.

Node indices are 0-based everywhere in memory; file I/O (including
``.tour`` files) uses the 1-based TSPLIB convention.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# TSPLIB GEO constants: flattened pi and the earth radius used by the
# reference implementation.
_GEO_PI = 3.141592
_GEO_RADIUS = 6378.388

# Full distance matrices are materialized only up to this dimension; larger
# instances compute rows on demand.
MATRIX_LIMIT = 2000


class TsplibError(ValueError):
    """Base class for TSPLIB parsing and format errors."""


class UnsupportedFormat(TsplibError):
    """Edge weight type or format outside the supported subset."""


class MalformedFile(TsplibError):
    """Structurally broken file: missing sections, bad counts, bad tokens."""


class DimensionMismatch(TsplibError):
    """DIMENSION header disagrees with the data section."""


class WeightKind(enum.Enum):
    EUC_2D = "EUC_2D"
    CEIL_2D = "CEIL_2D"
    GEO = "GEO"
    ATT = "ATT"
    EXPLICIT = "EXPLICIT"


def _nint(x: np.ndarray) -> np.ndarray:
    # TSPLIB nint(): (int)(x + 0.5) on non-negative values.
    return np.floor(x + 0.5).astype(np.int64)


def _geo_radians(values: np.ndarray) -> np.ndarray:
    # Coordinates are DDD.MM (degrees and minutes); deg truncates toward 0.
    deg = np.trunc(values)
    minutes = values - deg
    return _GEO_PI * (deg + 5.0 * minutes / 3.0) / 180.0


@dataclass(frozen=True)
class Instance:
    """Immutable TSP instance with exact integer distances.

    Exactly one of ``coords`` / ``explicit`` is populated, matching
    ``weight_kind``.  ``explicit`` is symmetric with a zero diagonal.
    """

    name: str
    dimension: int
    weight_kind: WeightKind
    coords: np.ndarray | None = None
    explicit: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        n = self.dimension
        if n < 3:
            raise MalformedFile(f"dimension must be >= 3, got {n}")
        if self.weight_kind is WeightKind.EXPLICIT:
            if self.explicit is None or self.coords is not None:
                raise MalformedFile("EXPLICIT instance requires a weight matrix")
            if self.explicit.shape != (n, n):
                raise DimensionMismatch(
                    f"weight matrix is {self.explicit.shape}, expected {(n, n)}"
                )
            if np.any(self.explicit != self.explicit.T):
                raise MalformedFile("explicit weights must be symmetric")
            if np.any(np.diag(self.explicit) != 0):
                raise MalformedFile("explicit weights must have a zero diagonal")
        else:
            if self.coords is None or self.explicit is not None:
                raise MalformedFile("coordinate instance requires node coordinates")
            if self.coords.shape != (n, 2):
                raise DimensionMismatch(
                    f"coordinate array is {self.coords.shape}, expected {(n, 2)}"
                )

    # -- distance computation ------------------------------------------------

    def _row_geo(self, i: int, targets: np.ndarray) -> np.ndarray:
        lat, lon = self._cache["geo"]
        q1 = np.cos(lon[i] - lon[targets])
        q2 = np.cos(lat[i] - lat[targets])
        q3 = np.cos(lat[i] + lat[targets])
        inner = 0.5 * ((1.0 + q1) * q2 - (1.0 - q1) * q3)
        d = _GEO_RADIUS * np.arccos(np.clip(inner, -1.0, 1.0)) + 1.0
        return np.trunc(d).astype(np.int64)

    def distance_row(self, i: int, targets: np.ndarray | None = None) -> np.ndarray:
        """Distances from city ``i`` to ``targets`` (default: all cities)."""
        if targets is None:
            targets = np.arange(self.dimension)
        kind = self.weight_kind
        if kind is WeightKind.EXPLICIT:
            row = self.explicit[i, targets]
            return row.astype(np.int64, copy=False)
        if kind is WeightKind.GEO:
            if "geo" not in self._cache:
                lat = _geo_radians(self.coords[:, 0])
                lon = _geo_radians(self.coords[:, 1])
                self._cache["geo"] = (lat, lon)
            row = self._row_geo(i, targets)
        else:
            delta = self.coords[targets] - self.coords[i]
            if kind is WeightKind.ATT:
                r = np.sqrt((delta[:, 0] ** 2 + delta[:, 1] ** 2) / 10.0)
                t = _nint(r)
                row = np.where(t < r, t + 1, t)
            else:
                e = np.hypot(delta[:, 0], delta[:, 1])
                if kind is WeightKind.CEIL_2D:
                    row = np.ceil(e).astype(np.int64)
                else:
                    row = _nint(e)
        row = row.copy()
        row[targets == i] = 0
        return row

    def distance(self, i: int, j: int) -> int:
        """Exact TSPLIB distance between cities ``i`` and ``j``."""
        if i == j:
            return 0
        m = self._cache.get("matrix")
        if m is not None:
            return int(m[i, j])
        return int(self.distance_row(i, np.array([j]))[0])

    def distance_matrix(self) -> np.ndarray:
        """Full integer distance matrix, cached; only for n <= MATRIX_LIMIT."""
        m = self._cache.get("matrix")
        if m is None:
            n = self.dimension
            if n > MATRIX_LIMIT:
                raise ValueError(
                    f"refusing to materialize a {n}x{n} matrix; "
                    f"use distance_row for n > {MATRIX_LIMIT}"
                )
            m = np.empty((n, n), dtype=np.int64)
            for i in range(n):
                m[i] = self.distance_row(i)
            self._cache["matrix"] = m
        return m

    def has_matrix(self) -> bool:
        return self.dimension <= MATRIX_LIMIT

    def dense_rows(self) -> list[list[int]]:
        """Distance matrix as plain lists for tight scalar loops."""
        rows = self._cache.get("rows")
        if rows is None:
            rows = [list(map(int, row)) for row in self.distance_matrix()]
            self._cache["rows"] = rows
        return rows

    def tour_length(self, order) -> int:
        """Exact length of the cyclic tour visiting ``order``."""
        order = np.asarray(order)
        if sorted(order.tolist()) != list(range(self.dimension)):
            raise ValueError("order is not a permutation of all cities")
        if self.has_matrix():
            m = self.distance_matrix()
            return int(m[order, np.roll(order, -1)].sum())
        total = 0
        nxt = np.roll(order, -1)
        for a, b in zip(order.tolist(), nxt.tolist()):
            total += self.distance(a, b)
        return total


# -- parsing ------------------------------------------------------------------

def _split_header(line: str) -> tuple[str, str]:
    key, _, value = line.partition(":")
    return key.strip().upper(), value.strip()


def parse_instance(text: str) -> Instance:
    """Parse a TSPLIB TSP file into an :class:`Instance`.

    Raises :class:`UnsupportedFormat` for weight kinds or formats outside
    the supported subset, :class:`MalformedFile` for structural problems and
    :class:`DimensionMismatch` when the header count disagrees with the data.
    """
    lines = [ln.strip() for ln in text.splitlines()]
    header: dict[str, str] = {}
    coord_tokens: list[str] = []
    weight_tokens: list[str] = []
    section = None
    for ln in lines:
        if not ln or ln == "EOF":
            continue
        upper = ln.upper()
        if upper.startswith("NODE_COORD_SECTION"):
            section = "coords"
            continue
        if upper.startswith("EDGE_WEIGHT_SECTION"):
            section = "weights"
            continue
        if upper.startswith("DISPLAY_DATA_SECTION"):
            section = "display"
            continue
        if upper.endswith("_SECTION"):
            raise UnsupportedFormat(f"unsupported section: {ln}")
        if section == "coords":
            coord_tokens.extend(ln.split())
        elif section == "weights":
            weight_tokens.extend(ln.split())
        elif section == "display":
            continue
        else:
            key, value = _split_header(ln)
            header[key] = value

    ftype = header.get("TYPE", "TSP").split()[0].upper()
    if ftype != "TSP":
        raise UnsupportedFormat(f"only TYPE: TSP is supported, got {ftype}")
    if "DIMENSION" not in header:
        raise MalformedFile("missing DIMENSION header")
    try:
        n = int(header["DIMENSION"])
    except ValueError as exc:
        raise MalformedFile(f"bad DIMENSION value: {header['DIMENSION']}") from exc
    kind_name = header.get("EDGE_WEIGHT_TYPE", "").upper()
    try:
        kind = WeightKind(kind_name)
    except ValueError:
        raise UnsupportedFormat(
            f"unsupported EDGE_WEIGHT_TYPE: {kind_name or '<missing>'}"
        ) from None
    name = header.get("NAME", "unnamed")

    if kind is WeightKind.EXPLICIT:
        matrix = _parse_explicit(header, weight_tokens, n)
        return Instance(name=name, dimension=n, weight_kind=kind, explicit=matrix)

    if not coord_tokens:
        raise MalformedFile("missing NODE_COORD_SECTION")
    if len(coord_tokens) != 3 * n:
        # every node line is "index x y"
        if len(coord_tokens) % 3 == 0:
            raise DimensionMismatch(
                f"DIMENSION says {n} nodes but found {len(coord_tokens) // 3}"
            )
        raise MalformedFile("NODE_COORD_SECTION lines must be 'index x y'")
    coords = np.empty((n, 2), dtype=np.float64)
    seen = np.zeros(n, dtype=bool)
    for k in range(n):
        idx_s, x_s, y_s = coord_tokens[3 * k : 3 * k + 3]
        try:
            idx = int(idx_s) - 1
            x, y = float(x_s), float(y_s)
        except ValueError as exc:
            raise MalformedFile(f"bad coordinate line: {idx_s} {x_s} {y_s}") from exc
        if not 0 <= idx < n or seen[idx]:
            raise MalformedFile(f"bad or duplicate node index {idx_s}")
        coords[idx] = (x, y)
        seen[idx] = True
    return Instance(name=name, dimension=n, weight_kind=kind, coords=coords)


def _parse_explicit(header: dict, tokens: list[str], n: int) -> np.ndarray:
    fmt = header.get("EDGE_WEIGHT_FORMAT", "").upper().split()[0] if header.get(
        "EDGE_WEIGHT_FORMAT"
    ) else ""
    counts = {
        "FULL_MATRIX": n * n,
        "UPPER_ROW": n * (n - 1) // 2,
        "LOWER_ROW": n * (n - 1) // 2,
        "UPPER_DIAG_ROW": n * (n + 1) // 2,
        "LOWER_DIAG_ROW": n * (n + 1) // 2,
    }
    if fmt not in counts:
        raise UnsupportedFormat(
            f"unsupported EDGE_WEIGHT_FORMAT: {fmt or '<missing>'}"
        )
    if not tokens:
        raise MalformedFile("missing EDGE_WEIGHT_SECTION")
    if len(tokens) != counts[fmt]:
        raise DimensionMismatch(
            f"{fmt} needs {counts[fmt]} weights for n={n}, found {len(tokens)}"
        )
    try:
        values = [int(t) for t in tokens]
    except ValueError as exc:
        raise MalformedFile("edge weights must be integers") from exc
    m = np.zeros((n, n), dtype=np.int64)
    it = iter(values)
    if fmt == "FULL_MATRIX":
        for i in range(n):
            for j in range(n):
                m[i, j] = next(it)
        if np.any(m != m.T):
            raise MalformedFile("FULL_MATRIX weights must be symmetric")
        m[np.diag_indices(n)] = 0
    elif fmt in ("UPPER_ROW", "UPPER_DIAG_ROW"):
        with_diag = fmt == "UPPER_DIAG_ROW"
        for i in range(n):
            for j in range(i if with_diag else i + 1, n):
                v = next(it)
                m[i, j] = m[j, i] = v if i != j else 0
    else:
        with_diag = fmt == "LOWER_DIAG_ROW"
        for i in range(n):
            for j in range(0, i + 1 if with_diag else i):
                v = next(it)
                m[i, j] = m[j, i] = v if i != j else 0
    return m


def load_instance(path) -> Instance:
    return parse_instance(Path(path).read_text())


def format_instance(inst: Instance) -> str:
    """Serialize a coordinate instance back to TSPLIB text."""
    if inst.weight_kind is WeightKind.EXPLICIT:
        raise UnsupportedFormat("re-serialization is defined for coordinate kinds")
    out = [
        f"NAME : {inst.name}",
        "TYPE : TSP",
        f"DIMENSION : {inst.dimension}",
        f"EDGE_WEIGHT_TYPE : {inst.weight_kind.value}",
        "NODE_COORD_SECTION",
    ]
    for i, (x, y) in enumerate(inst.coords):
        out.append(f"{i + 1} {x:.10g} {y:.10g}")
    out.append("EOF")
    return "\n".join(out) + "\n"


# -- tour files ----------------------------------------------------------------

def parse_tour(text: str) -> list[int]:
    """Parse a TSPLIB TOUR file; returns 0-based city indices."""
    lines = [ln.strip() for ln in text.splitlines()]
    tour: list[int] = []
    section = False
    for ln in lines:
        if not ln or ln == "EOF":
            continue
        if ln.upper().startswith("TOUR_SECTION"):
            section = True
            continue
        if not section:
            continue
        for tok in ln.split():
            v = int(tok)
            if v == -1:
                section = False
                break
            tour.append(v - 1)
    if not tour:
        raise MalformedFile("no TOUR_SECTION entries found")
    return tour


def load_tour(path) -> list[int]:
    return parse_tour(Path(path).read_text())


def format_tour(order, name: str = "tour", length: int | None = None) -> str:
    """TSPLIB TOUR text: 1-based indices, -1 terminator."""
    out = [f"NAME : {name}", "TYPE : TOUR"]
    if length is not None:
        out.append(f"COMMENT : length {length}")
    out.append(f"DIMENSION : {len(order)}")
    out.append("TOUR_SECTION")
    out.extend(str(int(v) + 1) for v in order)
    out.append("-1")
    out.append("EOF")
    return "\n".join(out) + "\n"
