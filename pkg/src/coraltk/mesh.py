"""ASCII PLY meshes and per-face texturing from class masks or height-change grids."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .raster import MASK_NODATA, format_number

DEFAULT_PALETTE = {
    0: (160, 160, 160),
    1: (222, 49, 99),
    2: (255, 182, 193),
    MASK_NODATA: (80, 80, 80),
}
UNKNOWN_COLOR = DEFAULT_PALETTE[MASK_NODATA]

BLUE = np.array([0.0, 0.0, 255.0])
WHITE = np.array([255.0, 255.0, 255.0])
YELLOW = np.array([255.0, 255.0, 0.0])

_VERTEX_TYPES = {"float", "float32", "double", "float64"}
_UCHAR_TYPES = {"uchar", "uint8"}
_FACE_COLOR = ("red", "green", "blue")


class PlyError(ValueError):
    pass


class UnsupportedPropertyError(PlyError):
    def __init__(self, element, prop):
        self.element = element
        self.property = prop
        super().__init__(f"unsupported property {prop!r} on element {element!r}")


class ProjectionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray
    faces: np.ndarray
    face_class: np.ndarray | None = None
    face_color: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64).reshape(-1, 3)
        f = np.array(self.faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise PlyError(f"face index out of range for {len(v)} vertices")
        if f.size and ((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])).any():
            raise PlyError("face with repeated vertex index")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.face_class is not None:
            fc = np.asarray(self.face_class)
            if fc.shape != (len(f),) or (fc < 0).any() or (fc > 255).any():
                raise PlyError("face_class must hold one uchar per face")
            object.__setattr__(self, "face_class", fc.astype(np.uint8))
        if self.face_color is not None:
            col = np.asarray(self.face_color)
            if col.shape != (len(f), 3) or (col < 0).any() or (col > 255).any():
                raise PlyError("face_color must hold one RGB uchar triple per face")
            object.__setattr__(self, "face_color", col.astype(np.uint8))

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented

        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and np.array_equal(a, b)

        return (same(self.vertices, other.vertices) and same(self.faces, other.faces)
                and same(self.face_class, other.face_class) and same(self.face_color, other.face_color))

    __hash__ = None

    def centroids(self):
        return self.vertices[self.faces].mean(axis=1)


# -- PLY --------------------------------------------------------------------


def _header(lines):
    if not lines or lines[0].strip() != "ply":
        raise PlyError("missing 'ply' magic line")
    elements = []
    for i, line in enumerate(lines[1:], start=1):
        toks = line.split()
        if not toks or toks[0] in ("comment", "obj_info"):
            continue
        if toks[0] == "format":
            if len(toks) < 2 or toks[1] != "ascii":
                raise PlyError(f"only ASCII PLY is supported, got format {' '.join(toks[1:])!r}")
        elif toks[0] == "element":
            if len(toks) != 3:
                raise PlyError(f"line {i + 1}: malformed element line")
            try:
                count = int(toks[2])
            except ValueError:
                raise PlyError(f"line {i + 1}: bad element count {toks[2]!r}") from None
            if count < 0:
                raise PlyError(f"line {i + 1}: negative element count")
            elements.append((toks[1], count, []))
        elif toks[0] == "property":
            if not elements:
                raise PlyError(f"line {i + 1}: property before any element")
            elements[-1][2].append(toks[1:])
        elif toks[0] == "end_header":
            return elements, i + 1
        else:
            raise PlyError(f"line {i + 1}: unexpected header line {line!r}")
    raise PlyError("missing end_header")


def read_ply(text):
    """Parse ASCII PLY with x/y/z vertices and triangle faces.

    Faces may carry ``red``/``green``/``blue`` and ``class`` uchar
    properties. Anything else raises :class:`UnsupportedPropertyError`.
    """
    lines = text.splitlines()
    elements, start = _header(lines)
    names = [e[0] for e in elements]
    if names not in (["vertex", "face"], ["vertex"]):
        raise PlyError(f"expected elements vertex, face; got {names}")

    _, nv, vprops = elements[0]
    vnames = []
    for prop in vprops:
        if len(prop) != 2 or prop[0] not in _VERTEX_TYPES:
            raise UnsupportedPropertyError("vertex", " ".join(prop))
        vnames.append(prop[1])
    if vnames != ["x", "y", "z"]:
        bad = next((n for n in vnames if n not in ("x", "y", "z")), " ".join(vnames))
        raise UnsupportedPropertyError("vertex", bad)

    fprops = []
    nf = 0
    if len(elements) == 2:
        _, nf, props = elements[1]
        for prop in props:
            if prop[0] == "list":
                if len(prop) != 4 or prop[3] not in ("vertex_indices", "vertex_index"):
                    raise UnsupportedPropertyError("face", " ".join(prop))
                fprops.append("vertex_indices")
            elif len(prop) == 2 and prop[0] in _UCHAR_TYPES and prop[1] in _FACE_COLOR + ("class",):
                fprops.append(prop[1])
            else:
                raise UnsupportedPropertyError("face", " ".join(prop))
        if "vertex_indices" not in fprops or len(set(fprops)) != len(fprops):
            raise PlyError("face element needs exactly one vertex_indices list")
        colors = [p for p in fprops if p in _FACE_COLOR]
        if colors and len(colors) != 3:
            raise PlyError("face colour needs all of red, green, blue")

    body = [ln for ln in lines[start:] if ln.strip()]
    if len(body) != nv + nf:
        raise PlyError(f"expected {nv} vertex and {nf} face lines, found {len(body)} data lines")
    try:
        verts = np.array([[float(t) for t in ln.split()] for ln in body[:nv]], dtype=np.float64).reshape(nv, -1)
    except ValueError as e:
        raise PlyError(f"bad vertex line: {e}") from None
    if verts.shape[1] != 3:
        raise PlyError("vertex lines must hold 3 values")

    faces, fclass, fcolor = [], [], []
    for j, ln in enumerate(body[nv:]):
        toks = ln.split()
        try:
            vals = [int(t) for t in toks]
        except ValueError:
            raise PlyError(f"face {j}: non-integer token") from None
        rec = {}
        pos = 0
        for p in fprops:
            if p == "vertex_indices":
                if pos >= len(vals) or vals[pos] != 3:
                    raise PlyError(f"face {j}: only triangles are supported")
                rec[p] = vals[pos + 1:pos + 4]
                pos += 4
            else:
                rec[p] = vals[pos] if pos < len(vals) else None
                pos += 1
        if pos != len(vals) or any(v is None for v in rec.values()) or len(rec["vertex_indices"]) != 3:
            raise PlyError(f"face {j}: wrong number of values")
        idx = rec["vertex_indices"]
        if max(idx) >= nv or min(idx) < 0:
            raise PlyError(f"face {j}: vertex index out of range (vertex count {nv})")
        faces.append(idx)
        if "class" in rec:
            fclass.append(rec["class"])
        if "red" in rec:
            fcolor.append([rec["red"], rec["green"], rec["blue"]])

    return Mesh(
        verts,
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        np.array(fclass) if "class" in fprops else None,
        np.array(fcolor).reshape(-1, 3) if "red" in fprops else None,
    )


def write_ply(mesh):
    """ASCII PLY text. Coordinates are written as doubles so they re-read exactly."""
    out = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(mesh.vertices)}",
        "property double x",
        "property double y",
        "property double z",
        f"element face {len(mesh.faces)}",
        "property list uchar int vertex_indices",
    ]
    if mesh.face_color is not None:
        out += [f"property uchar {c}" for c in _FACE_COLOR]
    if mesh.face_class is not None:
        out.append("property uchar class")
    out.append("end_header")
    for v in mesh.vertices.tolist():
        out.append(" ".join(format_number(x) for x in v))
    for i, f in enumerate(mesh.faces.tolist()):
        parts = ["3"] + [str(x) for x in f]
        if mesh.face_color is not None:
            parts += [str(int(c)) for c in mesh.face_color[i]]
        if mesh.face_class is not None:
            parts.append(str(int(mesh.face_class[i])))
        out.append(" ".join(parts))
    return "\n".join(out) + "\n"


def load_ply(path):
    with open(path, encoding="ascii") as f:
        return read_ply(f.read())


# -- projection -------------------------------------------------------------


def load_palette(source):
    """Palette from a JSON mapping ``{"1": [r, g, b], ...}`` merged over the defaults."""
    raw = json.loads(source) if isinstance(source, str) else dict(source)
    pal = dict(DEFAULT_PALETTE)
    for k, rgb in raw.items():
        rgb = tuple(int(c) for c in rgb)
        if len(rgb) != 3 or not all(0 <= c <= 255 for c in rgb):
            raise ValueError(f"bad colour for class {k}: {rgb}")
        pal[int(k)] = rgb
    named = {c: rgb for c, rgb in pal.items() if c != MASK_NODATA}
    if len(set(named.values())) != len(named):
        raise ValueError("palette colours must be distinct")
    return pal


def _face_cells(mesh, raster):
    if len(mesh.faces) == 0:
        raise ProjectionError("mesh has no faces")
    c = mesh.centroids()
    rows, cols = raster.transform.cell_of(c[:, 0], c[:, 1], raster.height)
    inside = (rows >= 0) & (rows < raster.height) & (cols >= 0) & (cols < raster.width)
    if not inside.any():
        raise ProjectionError("no face centroid falls inside the raster extent")
    return np.where(inside, rows, 0), np.where(inside, cols, 0), inside


def project_mask(mesh, mask, palette=None):
    """Class and colour per face from the mask cell under its centroid.

    Faces outside the mask or over nodata get class 255 and the unknown colour.
    """
    pal = DEFAULT_PALETTE if palette is None else palette
    rows, cols, inside = _face_cells(mesh, mask)
    cls = np.where(inside, mask.ids[rows, cols], MASK_NODATA).astype(np.int64)
    missing = sorted(set(np.unique(cls).tolist()) - set(pal))
    if missing:
        raise ValueError(f"palette has no colour for class(es) {missing}")
    colors = np.array([pal[c] for c in cls.tolist()], dtype=np.int64).reshape(-1, 3)
    return replace(mesh, face_class=cls, face_color=colors)


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def diverging_color(values, limit):
    """Blue at -limit, white at 0, yellow at +limit; values clamp to the ends."""
    if not limit > 0:
        raise ValueError(f"limit must be > 0, got {limit}")
    t = np.clip(np.asarray(values, dtype=np.float64) / limit, -1.0, 1.0)[..., None]
    rgb = np.where(t < 0, WHITE + (WHITE - BLUE) * t, WHITE + (YELLOW - WHITE) * t)
    return round_half_up(rgb)


def project_scalar(mesh, values, limit):
    """Colour each face by the grid value under its centroid (clamped to +-limit)."""
    if not limit > 0:
        raise ValueError(f"limit must be > 0, got {limit}")
    rows, cols, inside = _face_cells(mesh, values)
    v = values.values[rows, cols]
    ok = inside & (v != values.nodata)
    colors = diverging_color(np.where(ok, v, 0.0), limit)
    colors[~ok] = UNKNOWN_COLOR
    return replace(mesh, face_color=colors)
