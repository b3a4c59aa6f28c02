"""GLB (glTF 2.0 binary) scene writer, reader, and structural validator.

Writing is deterministic: canonical JSON key order, no timestamps, all floats
quantized to float32 before emission. Node transforms are carried as TRS (the
quaternion parsed from an input file is kept on the node so a read-write cycle
reproduces the input bytes exactly). Geometry buffers are never baked.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CorruptGlbError,
    InvalidArgumentError,
    NotGlbError,
    UnsupportedFeatureError,
)
from .geometry import Similarity3
from .mesh import Mesh

GLB_MAGIC = 0x46546C67
GLB_VERSION = 2
CHUNK_JSON = 0x4E4F534A
CHUNK_BIN = 0x004E4942

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

_COMPONENT_DTYPES = {
    5120: np.dtype("<i1"),
    5121: np.dtype("<u1"),
    5122: np.dtype("<i2"),
    5123: np.dtype("<u2"),
    5125: np.dtype("<u4"),
    5126: np.dtype("<f4"),
}
_TYPE_COMPONENTS = {"SCALAR": 1, "VEC2": 2, "VEC3": 3, "VEC4": 4, "MAT4": 16}


@dataclass(frozen=True)
class Material:
    base_color: tuple = (0.8, 0.8, 0.8, 1.0)
    texture_png: bytes | None = None

    def __post_init__(self):
        if len(self.base_color) != 4:
            raise InvalidArgumentError("base_color must be RGBA")
        if self.texture_png is not None and not self.texture_png.startswith(_PNG_SIGNATURE):
            raise InvalidArgumentError("texture bytes must be a PNG stream")


@dataclass(frozen=True)
class SceneNode:
    name: str
    mesh: Mesh
    transform: Similarity3
    material: Material | None = None
    # Quaternion exactly as parsed from a source file; reused on write when it
    # still matches `transform` so read->write round-trips byte-identically.
    raw_rotation: tuple | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Scene:
    nodes: tuple

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise InvalidArgumentError(f"node names must be unique, got {names}")


def merge_scene(
    head: Mesh,
    eyewear: Mesh,
    placement: Similarity3,
    head_material: Material | None = None,
    eyewear_material: Material | None = None,
) -> Scene:
    """Head at identity plus eyewear carrying the placement on its node TRS."""
    return Scene(
        nodes=(
            SceneNode("head", head, Similarity3.identity(), head_material),
            SceneNode("eyewear", eyewear, placement, eyewear_material),
        )
    )


def _f32(x) -> float:
    return float(np.float32(x))


def _quat_from_matrix(rot: np.ndarray) -> tuple:
    """Unit quaternion (x, y, z, w) with a canonical sign (w >= 0)."""
    m = rot
    tr = m[0, 0] + m[1, 1] + m[2, 2]
    if tr > 0.0:
        s = np.sqrt(tr + 1.0) * 2.0
        w, x, y, z = 0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s
    elif m[0, 0] > m[1, 1] and m[0, 0] > m[2, 2]:
        s = np.sqrt(1.0 + m[0, 0] - m[1, 1] - m[2, 2]) * 2.0
        w, x, y, z = (m[2, 1] - m[1, 2]) / s, 0.25 * s, (m[0, 1] + m[1, 0]) / s, (m[0, 2] + m[2, 0]) / s
    elif m[1, 1] > m[2, 2]:
        s = np.sqrt(1.0 + m[1, 1] - m[0, 0] - m[2, 2]) * 2.0
        w, x, y, z = (m[0, 2] - m[2, 0]) / s, (m[0, 1] + m[1, 0]) / s, 0.25 * s, (m[1, 2] + m[2, 1]) / s
    else:
        s = np.sqrt(1.0 + m[2, 2] - m[0, 0] - m[1, 1]) * 2.0
        w, x, y, z = (m[1, 0] - m[0, 1]) / s, (m[0, 2] + m[2, 0]) / s, (m[1, 2] + m[2, 1]) / s, 0.25 * s
    q = np.array([x, y, z, w])
    q /= np.linalg.norm(q)
    for component in (q[3], q[0], q[1], q[2]):
        if component != 0.0:
            if component < 0.0:
                q = -q
            break
    return tuple(float(v) for v in q)


def _matrix_from_quat(q) -> np.ndarray:
    """Homogeneous quaternion-to-matrix: exact rotation for any nonzero q, no renormalization."""
    x, y, z, w = (float(v) for v in q)
    n = x * x + y * y + z * z + w * w
    if n == 0.0:
        raise CorruptGlbError("zero-length rotation quaternion")
    s = 2.0 / n
    return np.array(
        [
            [1.0 - s * (y * y + z * z), s * (x * y - z * w), s * (x * z + y * w)],
            [s * (x * y + z * w), 1.0 - s * (x * x + z * z), s * (y * z - x * w)],
            [s * (x * z - y * w), s * (y * z + x * w), 1.0 - s * (x * x + y * y)],
        ]
    )


def write_glb(scene: Scene) -> bytes:
    """Serialize a scene to GLB bytes. Deterministic for equal scenes."""
    if not scene.nodes:
        raise InvalidArgumentError("scene must contain at least one node")

    binary = bytearray()
    buffer_views: list[dict] = []
    accessors: list[dict] = []
    meshes: list[dict] = []
    nodes: list[dict] = []
    materials: list[dict] = []
    textures: list[dict] = []
    images: list[dict] = []

    def add_view(data: bytes, target: int | None = None) -> int:
        while len(binary) % 4:
            binary.append(0)
        view = {"buffer": 0, "byteLength": len(data), "byteOffset": len(binary)}
        if target is not None:
            view["target"] = target
        binary.extend(data)
        buffer_views.append(view)
        return len(buffer_views) - 1

    def add_accessor(array: np.ndarray, gltf_type: str, component: int, target: int, with_bounds: bool) -> int:
        view = add_view(np.ascontiguousarray(array).tobytes(), target)
        acc = {
            "bufferView": view,
            "byteOffset": 0,
            "componentType": component,
            "count": int(array.shape[0]),
            "type": gltf_type,
        }
        if with_bounds:
            acc["max"] = [float(v) for v in array.max(axis=0)]
            acc["min"] = [float(v) for v in array.min(axis=0)]
        accessors.append(acc)
        return len(accessors) - 1

    for node in scene.nodes:
        mesh = node.mesh
        positions = mesh.vertices.astype("<f4")
        attributes = {"POSITION": add_accessor(positions, "VEC3", 5126, 34962, with_bounds=True)}
        if mesh.normals is not None:
            attributes["NORMAL"] = add_accessor(mesh.normals.astype("<f4"), "VEC3", 5126, 34962, False)
        if mesh.uv is not None:
            attributes["TEXCOORD_0"] = add_accessor(mesh.uv.astype("<f4"), "VEC2", 5126, 34962, False)
        indices = add_accessor(mesh.triangles.astype("<u4").reshape(-1, 1), "SCALAR", 5125, 34963, False)

        primitive = {"attributes": attributes, "indices": indices, "mode": 4}
        if node.material is not None:
            mat = node.material
            pbr: dict = {
                "baseColorFactor": [_f32(c) for c in mat.base_color],
                "metallicFactor": 0.0,
                "roughnessFactor": 0.9,
            }
            if mat.texture_png is not None:
                if mesh.uv is None:
                    raise InvalidArgumentError(f"node {node.name!r} has a texture but no uv")
                image_view = add_view(mat.texture_png)
                images.append({"bufferView": image_view, "mimeType": "image/png"})
                textures.append({"source": len(images) - 1})
                pbr["baseColorTexture"] = {"index": len(textures) - 1}
            materials.append({"doubleSided": True, "pbrMetallicRoughness": pbr})
            primitive["material"] = len(materials) - 1

        meshes.append({"name": node.name, "primitives": [primitive]})

        t = node.transform
        if node.raw_rotation is not None and np.array_equal(
            _matrix_from_quat(node.raw_rotation), t.rotation
        ):
            quat = tuple(float(v) for v in node.raw_rotation)
        else:
            quat = tuple(_f32(v) for v in _quat_from_matrix(t.rotation))
        nodes.append(
            {
                "mesh": len(meshes) - 1,
                "name": node.name,
                "rotation": list(quat),
                "scale": [_f32(t.scale)] * 3,
                "translation": [_f32(v) for v in t.translation],
            }
        )

    doc: dict = {
        "asset": {"generator": "eyefit", "version": "2.0"},
        "scene": 0,
        "scenes": [{"nodes": list(range(len(nodes)))}],
        "nodes": nodes,
        "meshes": meshes,
        "accessors": accessors,
        "bufferViews": buffer_views,
        "buffers": [{"byteLength": len(binary)}],
    }
    if materials:
        doc["materials"] = materials
    if textures:
        doc["textures"] = textures
        doc["images"] = images

    json_bytes = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")
    json_bytes += b" " * ((-len(json_bytes)) % 4)
    bin_bytes = bytes(binary) + b"\x00" * ((-len(binary)) % 4)

    total = 12 + 8 + len(json_bytes) + 8 + len(bin_bytes)
    out = bytearray()
    out += struct.pack("<III", GLB_MAGIC, GLB_VERSION, total)
    out += struct.pack("<II", len(json_bytes), CHUNK_JSON)
    out += json_bytes
    out += struct.pack("<II", len(bin_bytes), CHUNK_BIN)
    out += bin_bytes
    return bytes(out)


def _split_chunks(data: bytes):
    if len(data) < 12:
        raise NotGlbError("too short to be a GLB container")
    magic, version, total = struct.unpack_from("<III", data, 0)
    if magic != GLB_MAGIC:
        raise NotGlbError(f"bad magic 0x{magic:08X}")
    if version != GLB_VERSION:
        raise UnsupportedFeatureError(f"unsupported GLB version {version}")
    if total != len(data):
        raise CorruptGlbError(f"declared length {total} != actual {len(data)}")
    chunks = []
    offset = 12
    while offset < len(data):
        if offset + 8 > len(data):
            raise CorruptGlbError("trailing bytes too short for a chunk header")
        length, ctype = struct.unpack_from("<II", data, offset)
        offset += 8
        if offset + length > len(data):
            raise CorruptGlbError("chunk overruns the buffer")
        chunks.append((ctype, data[offset : offset + length]))
        offset += length
    return chunks


def _read_accessor(doc: dict, bin_chunk: bytes, index: int) -> np.ndarray:
    try:
        acc = doc["accessors"][index]
    except (KeyError, IndexError):
        raise CorruptGlbError(f"accessor {index} missing") from None
    if "sparse" in acc:
        raise UnsupportedFeatureError("sparse accessors are not supported")
    dtype = _COMPONENT_DTYPES.get(acc.get("componentType"))
    if dtype is None:
        raise UnsupportedFeatureError(f"unsupported componentType {acc.get('componentType')}")
    n_comp = _TYPE_COMPONENTS.get(acc.get("type"))
    if n_comp is None:
        raise UnsupportedFeatureError(f"unsupported accessor type {acc.get('type')}")
    count = int(acc["count"])
    try:
        view = doc["bufferViews"][acc["bufferView"]]
    except (KeyError, IndexError):
        raise CorruptGlbError("accessor references a missing bufferView") from None
    view_offset = int(view.get("byteOffset", 0))
    view_length = int(view["byteLength"])
    if view_offset + view_length > len(bin_chunk):
        raise CorruptGlbError("bufferView overruns the binary chunk")
    raw = bin_chunk[view_offset : view_offset + view_length]

    elem_size = dtype.itemsize * n_comp
    stride = int(view.get("byteStride", elem_size))
    if stride < elem_size:
        raise CorruptGlbError("byteStride smaller than the element size")
    acc_offset = int(acc.get("byteOffset", 0))
    needed = acc_offset + stride * (count - 1) + elem_size
    if needed > view_length:
        raise CorruptGlbError("accessor overruns its bufferView")
    if stride == elem_size:
        flat = np.frombuffer(raw, dtype=dtype, count=count * n_comp, offset=acc_offset)
        return flat.reshape(count, n_comp)
    rows = np.frombuffer(raw, dtype=np.uint8, count=stride * (count - 1) + elem_size, offset=acc_offset)
    strided = np.lib.stride_tricks.as_strided(rows, shape=(count, elem_size), strides=(stride, 1))
    return strided.copy().view(dtype).reshape(count, n_comp)


def _node_local_transform(node: dict) -> tuple[Similarity3, tuple | None]:
    if "matrix" in node:
        m = np.asarray(node["matrix"], dtype=np.float64).reshape(4, 4).T  # column-major in glTF
        rot_scale = m[:3, :3]
        det = float(np.linalg.det(rot_scale))
        if det <= 0.0:
            raise UnsupportedFeatureError("mirrored or singular node matrix")
        scale = det ** (1.0 / 3.0)
        rot = rot_scale / scale
        u, _, vt = np.linalg.svd(rot)
        rot_fixed = u @ vt
        if np.max(np.abs(rot_fixed - rot)) > 1e-4:
            raise UnsupportedFeatureError("node matrix has shear or non-uniform scale")
        return Similarity3(scale, rot_fixed, m[:3, 3]), None
    scale_vec = node.get("scale", [1.0, 1.0, 1.0])
    if max(scale_vec) - min(scale_vec) > 1e-6 * max(abs(s) for s in scale_vec):
        raise UnsupportedFeatureError(f"non-uniform node scale {scale_vec}")
    quat = tuple(float(v) for v in node.get("rotation", (0.0, 0.0, 0.0, 1.0)))
    return (
        Similarity3(float(scale_vec[0]), _matrix_from_quat(quat), node.get("translation", [0.0, 0.0, 0.0])),
        quat,
    )


def read_glb(data: bytes) -> Scene:
    """Parse GLB bytes into a Scene, tolerating glTF fields this module does not model."""
    chunks = _split_chunks(data)
    if not chunks or chunks[0][0] != CHUNK_JSON:
        raise CorruptGlbError("first chunk must be JSON")
    try:
        doc = json.loads(chunks[0][1].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptGlbError(f"JSON chunk unreadable: {e}") from e
    bin_chunk = b""
    for ctype, payload in chunks[1:]:
        if ctype == CHUNK_BIN:
            bin_chunk = payload
            break

    gltf_nodes = doc.get("nodes", [])
    scene_index = doc.get("scene", 0)
    scenes = doc.get("scenes", [])
    roots = scenes[scene_index]["nodes"] if scenes else list(range(len(gltf_nodes)))

    out_nodes: list[SceneNode] = []
    used_names: set[str] = set()

    def unique_name(base: str) -> str:
        name = base
        suffix = 1
        while name in used_names:
            name = f"{base}~{suffix}"
            suffix += 1
        used_names.add(name)
        return name

    def visit(node_index: int, parent: Similarity3, depth: int):
        if depth > 64:
            raise CorruptGlbError("node hierarchy too deep (cycle?)")
        try:
            node = gltf_nodes[node_index]
        except IndexError:
            raise CorruptGlbError(f"scene references missing node {node_index}") from None
        local, quat = _node_local_transform(node)
        world = parent.compose(local)
        if "mesh" in node:
            try:
                gltf_mesh = doc["meshes"][node["mesh"]]
            except (KeyError, IndexError):
                raise CorruptGlbError(f"node references missing mesh {node.get('mesh')}") from None
            base = node.get("name") or f"node{node_index}"
            for pi, prim in enumerate(gltf_mesh.get("primitives", [])):
                if prim.get("mode", 4) != 4:
                    raise UnsupportedFeatureError("only triangle primitives are supported")
                mesh, material = _read_primitive(doc, bin_chunk, prim)
                name = unique_name(base if pi == 0 else f"{base}.{pi}")
                raw = quat if _is_identity(parent) else None
                out_nodes.append(SceneNode(name, mesh, world, material, raw_rotation=raw))
        for child in node.get("children", []):
            visit(child, world, depth + 1)

    identity = Similarity3.identity()
    for root in roots:
        visit(root, identity, 0)
    return Scene(nodes=tuple(out_nodes))


def _is_identity(t: Similarity3) -> bool:
    return (
        t.scale == 1.0
        and np.array_equal(t.rotation, np.eye(3))
        and np.array_equal(t.translation, np.zeros(3))
    )


def _read_primitive(doc: dict, bin_chunk: bytes, prim: dict) -> tuple[Mesh, Material | None]:
    attributes = prim.get("attributes", {})
    if "POSITION" not in attributes:
        raise CorruptGlbError("primitive missing POSITION")
    positions = _read_accessor(doc, bin_chunk, attributes["POSITION"]).astype(np.float64)
    normals = None
    if "NORMAL" in attributes:
        normals = _read_accessor(doc, bin_chunk, attributes["NORMAL"]).astype(np.float64)
    uv = None
    if "TEXCOORD_0" in attributes:
        uv = _read_accessor(doc, bin_chunk, attributes["TEXCOORD_0"]).astype(np.float64)
    if "indices" in prim:
        idx = _read_accessor(doc, bin_chunk, prim["indices"])
        if idx.dtype.kind == "f":
            raise UnsupportedFeatureError("float index accessor")
        triangles = idx.reshape(-1).astype(np.int64)
    else:
        triangles = np.arange(len(positions), dtype=np.int64)
    if len(triangles) % 3:
        raise CorruptGlbError("index count is not a multiple of 3")
    triangles = triangles.reshape(-1, 3)

    material = None
    if "material" in prim:
        try:
            mat = doc["materials"][prim["material"]]
        except (KeyError, IndexError):
            raise CorruptGlbError("primitive references a missing material") from None
        pbr = mat.get("pbrMetallicRoughness", {})
        base_color = tuple(float(c) for c in pbr.get("baseColorFactor", (1.0, 1.0, 1.0, 1.0)))
        texture_png = None
        if "baseColorTexture" in pbr:
            try:
                texture = doc["textures"][pbr["baseColorTexture"]["index"]]
                image = doc["images"][texture["source"]]
            except (KeyError, IndexError):
                raise CorruptGlbError("texture chain references a missing entry") from None
            if image.get("mimeType") == "image/png" and "bufferView" in image:
                view = doc["bufferViews"][image["bufferView"]]
                start = int(view.get("byteOffset", 0))
                end = start + int(view["byteLength"])
                if end > len(bin_chunk):
                    raise CorruptGlbError("image bufferView overruns the binary chunk")
                candidate = bin_chunk[start:end]
                if candidate.startswith(_PNG_SIGNATURE):
                    texture_png = candidate
        material = Material(base_color=base_color, texture_png=texture_png)
    return Mesh(positions, triangles, uv=uv, normals=normals), material


def validate_glb(data: bytes) -> list[str]:
    """Structural checks on GLB bytes; returns human-readable violations (empty = valid).

    Walks the container independently of read_glb: header and chunk layout,
    alignment, buffer/view/accessor bounds, index ranges, PNG signatures,
    node-name uniqueness.
    """
    problems: list[str] = []
    if len(data) < 12:
        return ["file shorter than the 12-byte GLB header"]
    magic, version, total = struct.unpack_from("<III", data, 0)
    if magic != GLB_MAGIC:
        problems.append(f"bad magic 0x{magic:08X}, expected 0x{GLB_MAGIC:08X}")
        return problems
    if version != GLB_VERSION:
        problems.append(f"version {version}, expected {GLB_VERSION}")
    if total != len(data):
        problems.append(f"declared total length {total} != file size {len(data)}")

    chunks = []
    offset = 12
    while offset < len(data):
        if offset + 8 > len(data):
            problems.append("dangling bytes after the last chunk")
            break
        length, ctype = struct.unpack_from("<II", data, offset)
        if length % 4:
            problems.append(f"chunk at {offset} has unaligned length {length}")
        offset += 8
        if offset + length > len(data):
            problems.append(f"chunk at {offset - 8} overruns the file")
            return problems
        chunks.append((ctype, data[offset : offset + length]))
        offset += length

    if not chunks or chunks[0][0] != CHUNK_JSON:
        problems.append("first chunk is not the JSON chunk")
        return problems
    try:
        doc = json.loads(chunks[0][1].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        problems.append(f"JSON chunk does not parse: {e}")
        return problems
    bin_chunk = next((payload for ctype, payload in chunks[1:] if ctype == CHUNK_BIN), b"")

    if doc.get("asset", {}).get("version") != "2.0":
        problems.append(f"asset.version {doc.get('asset', {}).get('version')!r}, expected '2.0'")

    buffers = doc.get("buffers", [])
    if buffers:
        declared = buffers[0].get("byteLength", 0)
        if declared > len(bin_chunk):
            problems.append(f"buffer byteLength {declared} exceeds BIN chunk size {len(bin_chunk)}")
        elif len(bin_chunk) - declared >= 4:
            problems.append("BIN chunk padded by 4 bytes or more beyond the declared buffer")

    views = doc.get("bufferViews", [])
    for i, view in enumerate(views):
        start = view.get("byteOffset", 0)
        if start % 4:
            problems.append(f"bufferView {i} byteOffset {start} not 4-byte aligned")
        if start + view.get("byteLength", 0) > len(bin_chunk):
            problems.append(f"bufferView {i} overruns the binary chunk")

    accessors = doc.get("accessors", [])
    for i, acc in enumerate(accessors):
        dtype = _COMPONENT_DTYPES.get(acc.get("componentType"))
        n_comp = _TYPE_COMPONENTS.get(acc.get("type"))
        if dtype is None or n_comp is None:
            problems.append(f"accessor {i} has unknown componentType/type")
            continue
        if not (0 <= acc.get("bufferView", -1) < len(views)):
            problems.append(f"accessor {i} references missing bufferView")
            continue
        view = views[acc["bufferView"]]
        elem = dtype.itemsize * n_comp
        stride = view.get("byteStride", elem)
        needed = acc.get("byteOffset", 0) + stride * (acc.get("count", 0) - 1) + elem
        if needed > view.get("byteLength", 0):
            problems.append(f"accessor {i} overruns bufferView {acc['bufferView']}")

    names = []
    for i, node in enumerate(doc.get("nodes", [])):
        if "mesh" in node and not (0 <= node["mesh"] < len(doc.get("meshes", []))):
            problems.append(f"node {i} references missing mesh {node['mesh']}")
        if "name" in node:
            names.append(node["name"])
    duplicates = {n for n in names if names.count(n) > 1}
    if duplicates:
        problems.append(f"duplicate node names: {sorted(duplicates)}")

    for mi, gltf_mesh in enumerate(doc.get("meshes", [])):
        for pi, prim in enumerate(gltf_mesh.get("primitives", [])):
            attrs = prim.get("attributes", {})
            if "POSITION" not in attrs:
                problems.append(f"mesh {mi} primitive {pi} missing POSITION")
                continue
            counts = {}
            for attr, acc_index in attrs.items():
                if not (0 <= acc_index < len(accessors)):
                    problems.append(f"mesh {mi} primitive {pi} attribute {attr} missing accessor")
                    continue
                counts[attr] = accessors[acc_index].get("count", 0)
            if len(set(counts.values())) > 1:
                problems.append(f"mesh {mi} primitive {pi} attribute counts differ: {counts}")
            pos_acc = accessors[attrs["POSITION"]]
            if "min" not in pos_acc or "max" not in pos_acc:
                problems.append(f"mesh {mi} primitive {pi} POSITION accessor lacks min/max")
            if "indices" in prim and 0 <= prim["indices"] < len(accessors):
                try:
                    idx = _read_accessor(doc, bin_chunk, prim["indices"])
                    if idx.size and int(idx.max()) >= counts.get("POSITION", 0):
                        problems.append(f"mesh {mi} primitive {pi} has out-of-range indices")
                except (CorruptGlbError, UnsupportedFeatureError) as e:
                    problems.append(f"mesh {mi} primitive {pi} indices unreadable: {e}")

    for i, image in enumerate(doc.get("images", [])):
        if image.get("mimeType") == "image/png" and "bufferView" in image:
            if 0 <= image["bufferView"] < len(views):
                view = views[image["bufferView"]]
                start = view.get("byteOffset", 0)
                payload = bin_chunk[start : start + view.get("byteLength", 0)]
                if not payload.startswith(_PNG_SIGNATURE):
                    problems.append(f"image {i} declared as PNG but lacks the PNG signature")
    return problems
