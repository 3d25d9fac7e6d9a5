"""Triangle mesh container, Wavefront OBJ io and vertex-set metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree


@dataclass
class Mesh:
    """Triangle mesh with float64 vertices and integer face indices.

    Faces may be empty (a bare point cloud). The undirected edge set is
    derived from the faces once, deduplicated and kept in lexicographic
    order so that edge-indexed quantities are reproducible.
    """

    vertices: np.ndarray
    faces: np.ndarray
    edges: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.faces.size == 0:
            self.faces = self.faces.reshape(0, 3)
        self.edges = _face_edges(self.faces)
        self.validate()

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def validate(self):
        """Raise ValueError if the mesh violates its structural contract."""
        v, f = self.vertices, self.faces
        if v.ndim != 2 or v.shape[1] != 3 or v.shape[0] == 0:
            raise ValueError("vertices must be a nonempty (N, 3) array")
        if not np.isfinite(v).all():
            raise ValueError("vertex coordinates must be finite")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("faces must be an (F, 3) array")
        if f.size:
            if f.min() < 0 or f.max() >= v.shape[0]:
                raise ValueError("face index out of range")
            degen = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degen.any():
                raise ValueError("face repeats a vertex")
        if self.edges.size:
            lengths = np.linalg.norm(
                v[self.edges[:, 0]] - v[self.edges[:, 1]], axis=1
            )
            if (lengths == 0.0).any():
                raise ValueError("zero-length edge")

    def copy(self) -> "Mesh":
        return Mesh(self.vertices.copy(), self.faces.copy())

    def with_vertices(self, vertices: np.ndarray) -> "Mesh":
        """Same connectivity, new vertex positions."""
        return Mesh(np.asarray(vertices, dtype=np.float64), self.faces.copy())

    def same_connectivity(self, other: "Mesh") -> bool:
        return (
            self.n_vertices == other.n_vertices
            and self.faces.shape == other.faces.shape
            and bool(np.array_equal(self.faces, other.faces))
        )


def _face_edges(faces: np.ndarray) -> np.ndarray:
    if faces.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [0, 2]]])
    pairs = np.sort(pairs, axis=1)
    return np.unique(pairs, axis=0)


def load_mesh(path) -> Mesh:
    """Read a triangle mesh from a Wavefront OBJ file.

    Args:
        path: OBJ file. Only ``v`` and ``f`` records are interpreted; any
            other record type is ignored. Face indices are 1-based and may
            carry ``/``-separated texture/normal refs, which are dropped.

    Returns:
        Mesh with vertices in file order.

    Raises:
        FileNotFoundError: missing file.
        ValueError: malformed record, non-triangular face or an index
            outside ``[1, N]`` (0 and negative indices are rejected).
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such mesh file: {path}")
    verts: list[list[float]] = []
    face_refs: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise ValueError(f"{path}:{lineno}: malformed vertex record")
            try:
                verts.append([float(t) for t in tokens[1:4]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed vertex record") from exc
        elif tokens[0] == "f":
            if len(tokens) != 4:
                raise ValueError(f"{path}:{lineno}: face is not a triangle")
            face_refs.append((lineno, tokens[1:]))
    faces = np.zeros((len(face_refs), 3), dtype=np.int64)
    n = len(verts)
    for row, (lineno, refs) in enumerate(face_refs):
        for col, ref in enumerate(refs):
            head = ref.split("/")[0]
            try:
                idx = int(head)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed face record") from exc
            if idx < 1 or idx > n:
                raise ValueError(f"{path}:{lineno}: face index {idx} out of range")
            faces[row, col] = idx - 1
    if not verts:
        raise ValueError(f"{path}: no vertices")
    return Mesh(np.array(verts, dtype=np.float64), faces)


def save_mesh(mesh: Mesh, path) -> None:
    """Write a mesh as OBJ. Vertices round-trip exactly (repr precision)."""
    mesh.validate()
    lines = []
    for x, y, z in mesh.vertices:
        lines.append(f"v {float(x)!r} {float(y)!r} {float(z)!r}")
    for a, b, c in mesh.faces:
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    Path(path).write_text("\n".join(lines) + "\n")


def _as_points(x) -> np.ndarray:
    if isinstance(x, Mesh):
        return x.vertices
    pts = np.asarray(x, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) points, got shape {pts.shape}")
    return pts


def pmd(a, b) -> float:
    """Mean per-vertex squared distance between two corresponded vertex sets.

    Accepts meshes or bare (n, 3) arrays.
    """
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] != pb.shape[0]:
        raise ValueError(
            f"pmd needs equal vertex counts, got {pa.shape[0]} and {pb.shape[0]}"
        )
    d = pa - pb
    return float(np.mean(np.einsum("ij,ij->i", d, d)))


def chamfer(a, b) -> float:
    """Symmetric chamfer distance, squared nearest-neighbour averages.

    Half the mean squared distance from each vertex of ``a`` to its nearest
    vertex of ``b``, plus the same with the roles swapped. Correspondence
    free, so vertex counts may differ. Accepts meshes or bare (n, 3) arrays.
    """
    pa, pb = _as_points(a), _as_points(b)
    if pa.shape[0] == 0 or pb.shape[0] == 0:
        raise ValueError("chamfer needs nonempty vertex sets")
    da, _ = cKDTree(pb).query(pa)
    db, _ = cKDTree(pa).query(pb)
    return float(0.5 * np.mean(da**2) + 0.5 * np.mean(db**2))


def edge_lengths(mesh: Mesh) -> np.ndarray:
    """Lengths of the undirected edges, in the mesh's canonical edge order."""
    if mesh.edges.size == 0:
        return np.zeros(0, dtype=np.float64)
    return np.linalg.norm(
        mesh.vertices[mesh.edges[:, 0]] - mesh.vertices[mesh.edges[:, 1]], axis=1
    )


@dataclass
class MetricReport:
    """Flat evaluation summary. Fields are None when undefined for the pair."""

    pmd: float | None = None
    chamfer: float | None = None
    edge_loss: float | None = None

    def to_dict(self) -> dict:
        return {"pmd": self.pmd, "chamfer": self.chamfer, "edge_loss": self.edge_loss}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)
