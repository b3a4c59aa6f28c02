import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eyefit.errors import DegenerateInputError, InvalidArgumentError
from eyefit.geometry import (
    Similarity3,
    apply_transform,
    rodrigues,
    rotation_to_rotvec,
    umeyama,
    vertex_normals,
)


def quaternion_exponential_rotation(rotvec):
    """Independent oracle: rotation matrix via the unit-quaternion exponential map."""
    rotvec = np.asarray(rotvec, dtype=np.float64)
    theta = np.linalg.norm(rotvec)
    if theta == 0.0:
        w, x, y, z = 1.0, 0.0, 0.0, 0.0
    else:
        axis = rotvec / theta
        w = np.cos(theta / 2.0)
        x, y, z = np.sin(theta / 2.0) * axis
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotvecs(rng, n, max_angle=np.pi):
    axes = rng.normal(size=(n, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(0.0, max_angle, size=n)
    return axes * angles[:, None]


def random_similarity(rng, max_scale=3.0):
    rot = rodrigues(random_rotvecs(rng, 1)[0])
    return Similarity3(rng.uniform(0.3, max_scale), rot, rng.uniform(-50, 50, size=3))


class TestRodrigues:
    def test_zero_vector_is_identity(self):
        assert np.array_equal(rodrigues((0.0, 0.0, 0.0)), np.eye(3))

    def test_quarter_turn_about_z(self):
        r = rodrigues((0.0, 0.0, np.pi / 2))
        np.testing.assert_allclose(r @ np.array([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0], atol=1e-12)

    def test_matches_quaternion_oracle(self):
        rng = np.random.default_rng(7)
        for rotvec in random_rotvecs(rng, 100):
            np.testing.assert_allclose(
                rodrigues(rotvec), quaternion_exponential_rotation(rotvec), atol=1e-12
            )

    def test_orthonormal_det_plus_one_on_random_samples(self):
        rng = np.random.default_rng(11)
        for rotvec in random_rotvecs(rng, 1000, max_angle=4.0 * np.pi):
            r = rodrigues(rotvec)
            np.testing.assert_allclose(r.T @ r, np.eye(3), atol=1e-12)
            assert abs(np.linalg.det(r) - 1.0) < 1e-12

    def test_non_finite_input_rejected(self):
        with pytest.raises(InvalidArgumentError):
            rodrigues((np.nan, 0.0, 0.0))
        with pytest.raises(InvalidArgumentError):
            rodrigues((np.inf, 0.0, 0.0))

    def test_rotvec_round_trip(self):
        rng = np.random.default_rng(13)
        rotvecs = np.concatenate(
            [
                random_rotvecs(rng, 200),
                random_rotvecs(rng, 50, max_angle=1e-6),  # near-zero branch
                random_rotvecs(rng, 50) * 0.0 + random_rotvecs(rng, 50) / np.linalg.norm(
                    random_rotvecs(rng, 50), axis=1, keepdims=True
                ) * (np.pi - 1e-9),  # near-pi branch
            ]
        )
        for rotvec in rotvecs:
            recovered = rotation_to_rotvec(rodrigues(rotvec))
            np.testing.assert_allclose(rodrigues(recovered), rodrigues(rotvec), atol=1e-9)


class TestUmeyama:
    def test_self_alignment_is_identity(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(10, 3))
        t = umeyama(pts, pts)
        assert abs(t.scale - 1.0) < 1e-12
        np.testing.assert_allclose(t.rotation, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(t.translation, np.zeros(3), atol=1e-12)

    def test_construct_then_recover(self):
        rng = np.random.default_rng(5)
        src = rng.normal(size=(12, 3)) * 10
        rot = rodrigues((0.0, 0.0, np.pi / 2))
        dst = 2.0 * src @ rot.T + np.array([1.0, 2.0, 3.0])
        t = umeyama(src, dst)
        assert abs(t.scale - 2.0) < 1e-9
        np.testing.assert_allclose(t.rotation, rot, atol=1e-9)
        np.testing.assert_allclose(t.translation, [1.0, 2.0, 3.0], atol=1e-9)

    def test_mirrored_target_keeps_det_plus_one(self):
        rng = np.random.default_rng(9)
        src = rng.normal(size=(20, 3))
        dst = src.copy()
        dst[:, 0] *= -1.0  # reflection about the x=0 plane
        t = umeyama(src, dst)
        assert np.linalg.det(t.rotation) > 0.0
        residual = np.linalg.norm(t.apply(src) - dst)
        assert residual > 1e-3

    def test_left_invariance_under_random_similarity(self):
        rng = np.random.default_rng(21)
        for _ in range(20):
            src = rng.normal(size=(8, 3)) * 5
            dst = rng.normal(size=(8, 3)) * 5
            base = umeyama(src, dst)
            pre = random_similarity(rng)
            moved = umeyama(pre.apply(src), dst)
            recomposed = moved.compose(pre)
            assert abs(recomposed.scale - base.scale) < 1e-8
            np.testing.assert_allclose(recomposed.rotation, base.rotation, atol=1e-8)
            np.testing.assert_allclose(recomposed.translation, base.translation, atol=1e-7)

    def test_rigid_mode_fixes_scale(self):
        rng = np.random.default_rng(17)
        src = rng.normal(size=(10, 3))
        dst = 3.0 * src
        t = umeyama(src, dst, with_scale=False)
        assert t.scale == 1.0

    def test_too_few_points(self):
        with pytest.raises(DegenerateInputError):
            umeyama([[0, 0, 0], [1, 0, 0]], [[0, 0, 0], [1, 0, 0]])

    def test_collinear_points(self):
        src = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [3, 0, 0]])
        with pytest.raises(DegenerateInputError):
            umeyama(src, src + 1.0)

    def test_planar_points_are_fine(self):
        # Any 3 non-collinear points are coplanar; alignment must still work.
        src = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
        rot = rodrigues((0.1, 0.2, 0.3))
        dst = src @ rot.T + np.array([0.5, -0.25, 2.0])
        t = umeyama(src, dst)
        np.testing.assert_allclose(t.apply(src), dst, atol=1e-9)
        assert np.linalg.det(t.rotation) > 0.0


class TestApplyTransform:
    def test_identity(self):
        pts = np.array([[1.0, 2.0, 3.0], [-1.0, 0.5, 2.0]])
        np.testing.assert_array_equal(apply_transform(pts, Similarity3.identity()), pts)

    def test_scale_doubles_pairwise_distances(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(6, 3))
        t = Similarity3(2.0, np.eye(3), np.array([4.0, 5.0, 6.0]))
        out = apply_transform(pts, t)
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                d_in = np.linalg.norm(pts[i] - pts[j])
                d_out = np.linalg.norm(out[i] - out[j])
                assert abs(d_out - 2.0 * d_in) < 1e-12

    def test_composition_matches_sequential_application(self):
        rng = np.random.default_rng(33)
        pts = rng.normal(size=(10, 3)) * 7
        for _ in range(10):
            a = random_similarity(rng)
            b = random_similarity(rng)
            seq = apply_transform(apply_transform(pts, a), b)
            composed = apply_transform(pts, b.compose(a))
            np.testing.assert_allclose(seq, composed, atol=1e-10)

    def test_inverse_round_trips(self):
        rng = np.random.default_rng(41)
        t = random_similarity(rng)
        pts = rng.normal(size=(5, 3))
        np.testing.assert_allclose(t.inverse().apply(t.apply(pts)), pts, atol=1e-10)

    def test_invalid_scale_rejected(self):
        with pytest.raises(InvalidArgumentError):
            Similarity3(0.0, np.eye(3), np.zeros(3))
        with pytest.raises(InvalidArgumentError):
            Similarity3(-1.0, np.eye(3), np.zeros(3))

    def test_non_rotation_rejected(self):
        with pytest.raises(InvalidArgumentError):
            Similarity3(1.0, np.eye(3) * 2.0, np.zeros(3))


def brute_force_vertex_normals(vertices, triangles):
    """Oracle: explicit per-vertex loop accumulating area-weighted face normals."""
    vertices = np.asarray(vertices, dtype=np.float64)
    out = np.zeros_like(vertices)
    for vi in range(len(vertices)):
        acc = np.zeros(3)
        for a, b, c in triangles:
            if vi not in (a, b, c):
                continue
            n = np.cross(vertices[b] - vertices[a], vertices[c] - vertices[a])
            area = np.linalg.norm(n) / 2.0
            if area == 0.0:
                continue
            acc += (n / (2.0 * area)) * area
        out[vi] = acc / np.linalg.norm(acc)
    return out


class TestVertexNormals:
    def test_flat_ccw_triangle_points_up(self):
        verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]])
        tris = np.array([[0, 1, 2]])
        np.testing.assert_allclose(vertex_normals(verts, tris), np.tile([0.0, 0, 1], (3, 1)), atol=1e-15)

    def test_unit_length_contract(self):
        rng = np.random.default_rng(8)
        verts = rng.normal(size=(30, 3))
        tris = np.array([[i, (i + 1) % 30, (i + 7) % 30] for i in range(30)])
        normals = vertex_normals(verts, tris)
        np.testing.assert_allclose(np.linalg.norm(normals, axis=1), 1.0, atol=1e-12)

    def test_asymmetric_fan_matches_brute_force(self):
        # Apex shared by faces of very different sizes.
        verts = np.array(
            [
                [0.0, 0.0, 1.0],
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [-5.0, 0.0, 0.0],
                [0.0, -0.3, 0.0],
            ]
        )
        tris = np.array([[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1]])
        np.testing.assert_allclose(
            vertex_normals(verts, tris), brute_force_vertex_normals(verts, tris), atol=1e-10
        )

    def test_rotation_equivariance(self):
        rng = np.random.default_rng(19)
        verts = rng.normal(size=(25, 3))
        tris = np.array([[i, (i + 3) % 25, (i + 11) % 25] for i in range(25)])
        base = vertex_normals(verts, tris)
        for rotvec in random_rotvecs(rng, 5):
            rot = rodrigues(rotvec)
            rotated = vertex_normals(verts @ rot.T, tris)
            np.testing.assert_allclose(rotated, base @ rot.T, atol=1e-9)

    def test_degenerate_only_fan_rejected(self):
        verts = np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]])
        tris = np.array([[0, 1, 2], [1, 2, 3]])  # vertex 0 only touches the zero-area face
        with pytest.raises(DegenerateInputError):
            vertex_normals(verts, tris)

    def test_empty_mesh_rejected(self):
        with pytest.raises(InvalidArgumentError):
            vertex_normals(np.zeros((3, 3)), np.zeros((0, 3), dtype=int))


@settings(max_examples=50, deadline=None)
@given(
    st.tuples(
        st.floats(-3.0, 3.0), st.floats(-3.0, 3.0), st.floats(-3.0, 3.0)
    )
)
def test_rodrigues_always_proper_rotation(rotvec):
    r = rodrigues(rotvec)
    assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-12
    assert abs(np.linalg.det(r) - 1.0) < 1e-12
