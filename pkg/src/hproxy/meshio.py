"""OBJ and PLY (ascii / binary little-endian) mesh readers and writers.

Vertex colors are carried by the de-facto 6-float ``v`` extension in OBJ and
by per-vertex red/green/blue properties in PLY (uchar or float, normalized
to [0, 1] on read). Floats are written with shortest round-trip precision,
so save/load is lossless for float64 coordinates.
"""

import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .mesh import Mesh


class MeshFormatError(ValueError):
    """Parse failure, carrying the file path and 1-based line number when known."""

    def __init__(self, path, message, line: Optional[int] = None):
        self.path = str(path)
        self.line = line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


def _fmt(x: float) -> str:
    return repr(float(x))


def load_mesh(path, format: Optional[str] = None) -> Mesh:
    """Load an OBJ or PLY mesh; format inferred from the extension when omitted."""
    path = Path(path)
    if format is None:
        format = path.suffix.lower().lstrip(".")
    if format == "obj":
        mesh = _load_obj(path)
    elif format == "ply":
        mesh = _load_ply(path)
    else:
        raise MeshFormatError(path, f"unsupported mesh format {format!r}")
    mesh.validate()
    return mesh


def save_mesh(mesh: Mesh, path, format: Optional[str] = None, binary: bool = True) -> None:
    """Write a mesh as OBJ or PLY; emits vertex colors and normals when present."""
    path = Path(path)
    if format is None:
        format = path.suffix.lower().lstrip(".")
    if format == "obj":
        path.write_text(obj_text(mesh))
    elif format == "ply":
        path.write_bytes(_ply_bytes(mesh, binary=binary))
    else:
        raise MeshFormatError(path, f"unsupported mesh format {format!r}")


def obj_text(mesh: Mesh) -> str:
    """Serialize a mesh to OBJ text (deterministic byte-for-byte)."""
    lines = []
    if mesh.colors is not None:
        for v, c in zip(mesh.vertices, mesh.colors):
            lines.append("v " + " ".join(_fmt(x) for x in (*v, *c)))
    else:
        for v in mesh.vertices:
            lines.append("v " + " ".join(_fmt(x) for x in v))
    if mesh.normals is not None:
        for n in mesh.normals:
            lines.append("vn " + " ".join(_fmt(x) for x in n))
    for f in mesh.faces:
        lines.append("f " + " ".join(str(i + 1) for i in f))
    return "\n".join(lines) + "\n"


def _load_obj(path: Path) -> Mesh:
    verts: list[list[float]] = []
    colors: list[list[float]] = []
    normals: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            tokens = raw.split()
            if not tokens or tokens[0].startswith("#"):
                continue
            tag = tokens[0]
            if tag == "v":
                try:
                    vals = [float(t) for t in tokens[1:]]
                except ValueError:
                    raise MeshFormatError(path, "malformed vertex line", lineno)
                if len(vals) == 3:
                    verts.append(vals)
                elif len(vals) == 6:
                    verts.append(vals[:3])
                    colors.append(vals[3:])
                else:
                    raise MeshFormatError(path, f"vertex line has {len(vals)} floats, expected 3 or 6", lineno)
                if colors and len(colors) != len(verts):
                    raise MeshFormatError(path, "inconsistent vertex colors (some v lines lack them)", lineno)
            elif tag == "vn":
                try:
                    normals.append([float(t) for t in tokens[1:4]])
                except ValueError:
                    raise MeshFormatError(path, "malformed normal line", lineno)
            elif tag == "f":
                try:
                    idx = [int(t.split("/")[0]) for t in tokens[1:]]
                except ValueError:
                    raise MeshFormatError(path, "malformed face line", lineno)
                if len(idx) < 3:
                    raise MeshFormatError(path, "face needs at least 3 vertices", lineno)
                if any(i == 0 for i in idx):
                    raise MeshFormatError(path, "face index 0 is invalid in OBJ", lineno)
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if colors and len(colors) != len(verts):
        raise MeshFormatError(path, "inconsistent vertex colors (some v lines lack them)")
    mesh = Mesh(
        np.array(verts, dtype=np.float64).reshape(-1, 3),
        np.array(faces, dtype=np.int64).reshape(-1, 3),
        np.array(colors, dtype=np.float64) if colors else None,
        np.array(normals, dtype=np.float64) if len(normals) == len(verts) and normals else None,
    )
    return mesh


_PLY_TYPES = {
    "char": ("b", 1), "int8": ("b", 1),
    "uchar": ("B", 1), "uint8": ("B", 1),
    "short": ("h", 2), "int16": ("h", 2),
    "ushort": ("H", 2), "uint16": ("H", 2),
    "int": ("i", 4), "int32": ("i", 4),
    "uint": ("I", 4), "uint32": ("I", 4),
    "float": ("f", 4), "float32": ("f", 4),
    "double": ("d", 8), "float64": ("d", 8),
}


def _load_ply(path: Path) -> Mesh:
    data = path.read_bytes()
    lines = []
    offset = 0
    while True:
        end = data.find(b"\n", offset)
        if end < 0:
            raise MeshFormatError(path, "missing end_header")
        lines.append(data[offset:end].decode("ascii", errors="replace").strip())
        offset = end + 1
        if lines[-1] == "end_header":
            break
    if not lines or lines[0] != "ply":
        raise MeshFormatError(path, "not a PLY file", 1)
    fmt = None
    elements = []  # (name, count, [(prop_name, type, is_list, count_type)])
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
            if fmt not in ("ascii", "binary_little_endian"):
                raise MeshFormatError(path, f"unsupported PLY format {fmt!r}", lineno)
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise MeshFormatError(path, "property before element", lineno)
            if tokens[1] == "list":
                elements[-1][2].append((tokens[4], tokens[3], True, tokens[2]))
            else:
                elements[-1][2].append((tokens[2], tokens[1], False, None))
        elif tokens[0] == "end_header":
            break
    if fmt is None:
        raise MeshFormatError(path, "missing format line")

    verts = normals = colors = None
    faces: list[list[int]] = []
    body_lines = data[offset:].decode("ascii", errors="replace").splitlines() if fmt == "ascii" else None
    ascii_pos = 0

    for name, count, props in elements:
        if fmt == "ascii":
            rows = []
            for r in range(count):
                if ascii_pos >= len(body_lines):
                    raise MeshFormatError(path, f"unexpected end of data in element {name!r}")
                rows.append(body_lines[ascii_pos].split())
                ascii_pos += 1
            if name == "vertex":
                table = {}
                for j, (pname, ptype, is_list, _) in enumerate(props):
                    if is_list:
                        raise MeshFormatError(path, "list property on vertex element")
                    col = np.array([float(row[j]) for row in rows])
                    table[pname] = (col, ptype)
                verts, normals, colors = _vertex_columns(path, table, count)
            elif name == "face":
                for row in rows:
                    n = int(row[0])
                    idx = [int(x) for x in row[1 : 1 + n]]
                    for k in range(1, n - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
        else:
            if name == "vertex":
                if any(p[2] for p in props):
                    raise MeshFormatError(path, "list property on vertex element")
                dtype = np.dtype([(p[0], "<" + _PLY_TYPES[p[1]][0]) for p in props])
                nbytes = dtype.itemsize * count
                if offset + nbytes > len(data):
                    raise MeshFormatError(path, "unexpected end of binary vertex data")
                rec = np.frombuffer(data, dtype=dtype, count=count, offset=offset)
                offset += nbytes
                table = {p[0]: (rec[p[0]].astype(np.float64), p[1]) for p in props}
                verts, normals, colors = _vertex_columns(path, table, count)
            elif name == "face":
                for _ in range(count):
                    for pname, ptype, is_list, ctype in props:
                        if is_list:
                            cfmt, csize = _PLY_TYPES[ctype]
                            ifmt, isize = _PLY_TYPES[ptype]
                            if offset + csize > len(data):
                                raise MeshFormatError(path, "unexpected end of binary face data")
                            (n,) = struct.unpack_from("<" + cfmt, data, offset)
                            offset += csize
                            if offset + isize * n > len(data):
                                raise MeshFormatError(path, "unexpected end of binary face data")
                            idx = struct.unpack_from("<" + str(n) + ifmt, data, offset)
                            offset += isize * n
                            for k in range(1, n - 1):
                                faces.append([idx[0], idx[k], idx[k + 1]])
                        else:
                            offset += _PLY_TYPES[ptype][1]
            else:
                # skip unknown fixed-size elements
                row_size = sum(_PLY_TYPES[p[1]][1] for p in props if not p[2])
                if any(p[2] for p in props):
                    raise MeshFormatError(path, f"cannot skip list element {name!r}")
                offset += row_size * count

    if verts is None:
        raise MeshFormatError(path, "PLY file has no vertex element")
    return Mesh(verts, np.array(faces, dtype=np.int64).reshape(-1, 3), colors, normals)


def _vertex_columns(path, table, count):
    for axis in ("x", "y", "z"):
        if axis not in table:
            raise MeshFormatError(path, f"vertex element missing property {axis!r}")
    verts = np.stack([table["x"][0], table["y"][0], table["z"][0]], axis=1)
    normals = None
    if all(k in table for k in ("nx", "ny", "nz")):
        normals = np.stack([table["nx"][0], table["ny"][0], table["nz"][0]], axis=1)
    colors = None
    if all(k in table for k in ("red", "green", "blue")):
        cols = []
        for k in ("red", "green", "blue"):
            col, ptype = table[k]
            if ptype in ("uchar", "uint8", "char", "int8", "short", "ushort", "int16", "uint16", "int", "uint", "int32", "uint32"):
                col = col / 255.0
            cols.append(col)
        colors = np.stack(cols, axis=1)
    return verts, normals, colors


def _ply_bytes(mesh: Mesh, binary: bool) -> bytes:
    header = ["ply", "format binary_little_endian 1.0" if binary else "format ascii 1.0"]
    header.append(f"element vertex {mesh.n_vertices}")
    props = [("x", "double"), ("y", "double"), ("z", "double")]
    if mesh.normals is not None:
        props += [("nx", "double"), ("ny", "double"), ("nz", "double")]
    if mesh.colors is not None:
        props += [("red", "double"), ("green", "double"), ("blue", "double")]
    header += [f"property {t} {n}" for n, t in props]
    header.append(f"element face {mesh.n_faces}")
    header.append("property list uchar int vertex_indices")
    header.append("end_header")

    cols = [mesh.vertices]
    if mesh.normals is not None:
        cols.append(mesh.normals)
    if mesh.colors is not None:
        cols.append(mesh.colors)
    vdata = np.concatenate(cols, axis=1)

    out = bytearray(("\n".join(header) + "\n").encode("ascii"))
    if binary:
        out += np.ascontiguousarray(vdata, dtype="<f8").tobytes()
        ftab = np.empty((mesh.n_faces, 13), dtype=np.uint8)
        counts = np.full(mesh.n_faces, 3, dtype=np.uint8)
        ftab[:, 0] = counts
        ftab[:, 1:] = mesh.faces.astype("<i4").view(np.uint8).reshape(mesh.n_faces, 12)
        out += ftab.tobytes()
    else:
        for row in vdata:
            out += (" ".join(_fmt(x) for x in row) + "\n").encode("ascii")
        for f in mesh.faces:
            out += ("3 " + " ".join(str(i) for i in f) + "\n").encode("ascii")
    return bytes(out)
