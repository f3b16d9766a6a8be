import numpy as np
import pytest

from dropcae.data import (SCENE_RECIPES, HsiCube, HsiMatrix, SplitSpec,
                          cube_from_bytes, flatten_labeled, hsic_bytes,
                          matrix_to_cube, read_hsic, remove_bands, split,
                          synth_scene, write_hsic)
from dropcae.errors import DataError, FormatError, ParameterError


def random_cube(rng, with_labels=True, max_dim=6):
    h, w, d = (int(rng.integers(1, max_dim + 1)) for _ in range(3))
    values = rng.random((h, w, d), dtype=np.float32)
    labels = None
    if with_labels:
        labels = rng.integers(0, 4, size=(h, w)).astype(np.uint16)
    return HsiCube(values, labels)


class TestHsicRoundTrip:
    def test_zero_cube_layout(self, tmp_path):
        cube = HsiCube(np.zeros((2, 2, 3), dtype=np.float32))
        raw = hsic_bytes(cube)
        assert len(raw) == 18 + 4 * 2 * 2 * 3
        path = tmp_path / "zeros.hsic"
        write_hsic(cube, path)
        back = read_hsic(path)
        assert np.array_equal(back.values, cube.values)
        assert back.labels is None

    def test_labels_preserved(self, tmp_path):
        rng = np.random.default_rng(5)
        cube = random_cube(rng)
        path = tmp_path / "scene.hsic"
        write_hsic(cube, path)
        back = read_hsic(path)
        assert np.array_equal(back.labels, cube.labels)
        assert hsic_bytes(back) == hsic_bytes(cube)

    def test_byte_identity_on_random_cubes(self, tmp_path):
        rng = np.random.default_rng(7)
        for i in range(25):
            cube = random_cube(rng, with_labels=bool(i % 2))
            raw = hsic_bytes(cube)
            assert hsic_bytes(cube_from_bytes(raw)) == raw

    def test_degenerate_1x1x1(self):
        cube = HsiCube(np.array([[[0.25]]], dtype=np.float32),
                       np.array([[3]], dtype=np.uint16))
        raw = hsic_bytes(cube)
        back = cube_from_bytes(raw)
        assert back.values[0, 0, 0] == np.float32(0.25)
        assert back.labels[0, 0] == 3

    def test_truncated_payload(self):
        cube = HsiCube(np.ones((2, 3, 4), dtype=np.float32))
        raw = hsic_bytes(cube)
        with pytest.raises(FormatError) as err:
            cube_from_bytes(raw[: len(raw) - 7])
        assert err.value.offset == len(raw) - 7

    def test_truncated_header(self):
        with pytest.raises(FormatError):
            cube_from_bytes(b"HSIC\x01")

    def test_bad_magic(self):
        raw = bytearray(hsic_bytes(HsiCube(np.ones((1, 1, 1), dtype=np.float32))))
        raw[0:4] = b"NOPE"
        with pytest.raises(FormatError) as err:
            cube_from_bytes(bytes(raw))
        assert err.value.offset == 0

    def test_bad_version(self):
        raw = bytearray(hsic_bytes(HsiCube(np.ones((1, 1, 1), dtype=np.float32))))
        raw[4] = 9
        with pytest.raises(FormatError) as err:
            cube_from_bytes(bytes(raw))
        assert err.value.offset == 4

    def test_unknown_flags(self):
        raw = bytearray(hsic_bytes(HsiCube(np.ones((1, 1, 1), dtype=np.float32))))
        raw[5] |= 0x80
        with pytest.raises(FormatError):
            cube_from_bytes(bytes(raw))

    def test_trailing_garbage(self):
        raw = hsic_bytes(HsiCube(np.ones((1, 1, 1), dtype=np.float32)))
        with pytest.raises(FormatError):
            cube_from_bytes(raw + b"x")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_hsic(tmp_path / "absent.hsic")


class TestRemoveBands:
    def test_indian_pines_recipe_on_224_bands(self):
        cube = HsiCube(np.zeros((2, 2, 224), dtype=np.float32))
        out = remove_bands(cube, SCENE_RECIPES["indian_pines"])
        assert out.values.shape[2] == 200

    def test_indian_pines_recipe_on_220_bands(self):
        cube = HsiCube(np.zeros((2, 2, 220), dtype=np.float32))
        out = remove_bands(cube, SCENE_RECIPES["indian_pines"])
        assert out.values.shape[2] == 200

    def test_salinas_literal_exclusions(self):
        cube = HsiCube(np.zeros((2, 2, 224), dtype=np.float32))
        out = remove_bands(cube, [(108, 112), (154, 167), 224])
        assert out.values.shape[2] == 204
        assert np.array_equal(out.band_map,
                              remove_bands(cube, SCENE_RECIPES["salinas"]).band_map)

    def test_empty_exclusions_identity(self):
        rng = np.random.default_rng(0)
        cube = random_cube(rng)
        out = remove_bands(cube, [])
        assert np.array_equal(out.values, cube.values)
        assert np.array_equal(out.band_map, np.arange(cube.values.shape[2]))

    def test_band_map_contents(self):
        cube = HsiCube(np.zeros((1, 1, 5), dtype=np.float32))
        out = remove_bands(cube, [(2, 3)])
        assert np.array_equal(out.band_map, [0, 3, 4])

    def test_count_preserved(self):
        cube = HsiCube(np.zeros((1, 1, 30), dtype=np.float32))
        out = remove_bands(cube, [(1, 4), 10, (29, 30)])
        assert out.values.shape[2] == 30 - 7

    def test_out_of_range(self):
        cube = HsiCube(np.zeros((1, 1, 5), dtype=np.float32))
        for bad in ([(0, 2)], [(4, 6)], [9]):
            with pytest.raises(ParameterError):
                remove_bands(cube, bad)

    def test_chained_band_map(self):
        cube = HsiCube(np.zeros((1, 1, 6), dtype=np.float32))
        step1 = remove_bands(cube, [1])  # drops original 0
        step2 = remove_bands(step1, [2])  # drops original 2
        assert np.array_equal(step2.band_map, [1, 3, 4, 5])


class TestFlattenLabeled:
    def test_single_labeled_pixel(self):
        values = np.arange(12, dtype=np.float32).reshape(2, 2, 3)
        labels = np.array([[0, 0], [2, 0]], dtype=np.uint16)
        mat = flatten_labeled(HsiCube(values, labels))
        # a single row makes every band constant, which maps to 0
        assert mat.values.shape == (1, 3)
        assert np.array_equal(mat.values, np.zeros((1, 3)))
        assert mat.labels.tolist() == [2]

    def test_scan_order_and_normalization(self):
        values = np.array(
            [[[0.0], [2.0]],
             [[6.0], [4.0]]], dtype=np.float32)
        labels = np.array([[1, 2], [3, 4]], dtype=np.uint16)
        mat = flatten_labeled(HsiCube(values, labels))
        assert mat.labels.tolist() == [1, 2, 3, 4]  # row-major scan
        assert mat.values[:, 0].tolist() == [0.0, 2.0 / 6.0, 1.0, 4.0 / 6.0]

    def test_only_labeled_rows_counted(self):
        rng = np.random.default_rng(2)
        cube = random_cube(rng, max_dim=8)
        mat = flatten_labeled(cube)
        assert mat.n == int(np.sum(cube.labels > 0))
        assert np.all(mat.values >= 0.0) and np.all(mat.values <= 1.0)
        assert np.all(mat.labels >= 1)

    def test_constant_band_maps_to_zero(self):
        values = np.stack([np.full((2, 2), 7.0, dtype=np.float32),
                           np.array([[0.0, 1.0], [2.0, 3.0]], dtype=np.float32)],
                          axis=2)
        labels = np.ones((2, 2), dtype=np.uint16)
        mat = flatten_labeled(HsiCube(values, labels))
        assert np.array_equal(mat.values[:, 0], np.zeros(4))
        assert mat.values[:, 1].max() == 1.0

    def test_no_labels_errors(self):
        with pytest.raises(DataError):
            flatten_labeled(HsiCube(np.zeros((2, 2, 2), dtype=np.float32)))

    def test_all_unlabeled_errors(self):
        cube = HsiCube(np.zeros((2, 2, 2), dtype=np.float32),
                       np.zeros((2, 2), dtype=np.uint16))
        with pytest.raises(DataError):
            flatten_labeled(cube)

    def test_band_map_propagates(self):
        values = np.random.default_rng(1).random((2, 2, 6)).astype(np.float32)
        labels = np.ones((2, 2), dtype=np.uint16)
        cube = remove_bands(HsiCube(values, labels), [(2, 3)])
        mat = flatten_labeled(cube)
        assert np.array_equal(mat.band_map, [0, 3, 4, 5])


def toy_matrix(n=100, d=3, classes=(1, 1), seed=0):
    rng = np.random.default_rng(seed)
    values = rng.random((n, d))
    labels = 1 + np.arange(n) % len(classes)
    return HsiMatrix(values, labels, np.arange(d))


class TestSplit:
    def test_plain_fraction(self):
        mat = toy_matrix(100)
        train, test = split(mat, SplitSpec(0.1, stratified=False, seed=3))
        assert train.size == 10 and test.size == 90

    def test_stratified_per_class(self):
        mat = toy_matrix(100, classes=(1, 2))
        train, test = split(mat, SplitSpec(0.1, stratified=True, seed=3))
        assert train.size == 10
        for cls in (1, 2):
            assert np.sum(mat.labels[train] == cls) == 5

    def test_deterministic(self):
        mat = toy_matrix(80, classes=(1, 2))
        a = split(mat, SplitSpec(0.2, True, seed=9))
        b = split(mat, SplitSpec(0.2, True, seed=9))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
        c = split(mat, SplitSpec(0.2, True, seed=10))
        assert not np.array_equal(a[0], c[0])

    def test_partition_exact(self):
        mat = toy_matrix(53, classes=(1, 2, 3))
        train, test = split(mat, SplitSpec(0.3, True, seed=1))
        union = np.sort(np.concatenate([train, test]))
        assert np.array_equal(union, np.arange(53))

    def test_proportions_within_one_sample(self):
        rng = np.random.default_rng(4)
        labels = rng.integers(1, 5, size=200)
        labels[:8] = [1, 2, 3, 4] * 2  # every class present
        mat = HsiMatrix(rng.random((200, 2)), labels, np.arange(2))
        train, _ = split(mat, SplitSpec(0.25, True, seed=0))
        for cls in (1, 2, 3, 4):
            n_c = np.sum(mat.labels == cls)
            got = np.sum(mat.labels[train] == cls)
            assert abs(got - 0.25 * n_c) <= 1.0

    def test_tiny_class_errors(self):
        mat = HsiMatrix(np.random.default_rng(0).random((5, 2)),
                        np.array([1, 1, 1, 1, 2]), np.arange(2))
        with pytest.raises(DataError, match="class 2"):
            split(mat, SplitSpec(0.4, True, seed=0))

    def test_bad_fraction(self):
        for frac in (0.0, 1.0, -0.5):
            with pytest.raises(ParameterError):
                SplitSpec(frac)


class TestSynthScene:
    def test_noiseless_rank_equals_k(self):
        mat, planted = synth_scene(20, 5, 300, 0.0, seed=4)
        centered = mat.values - mat.values.mean(axis=0)
        assert np.linalg.matrix_rank(centered, tol=1e-8) == 5

    def test_deterministic(self):
        a, pa = synth_scene(15, 4, 120, 0.05, seed=8)
        b, pb = synth_scene(15, 4, 120, 0.05, seed=8)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(pa, pb)

    def test_shapes_and_ranges(self):
        mat, planted = synth_scene(12, 3, 64, 0.05, seed=2)
        assert mat.values.shape == (64, 12)
        assert np.all((mat.values >= 0) & (mat.values <= 1))
        assert sorted(set(mat.labels.tolist())) == [1, 2, 3, 4]
        assert planted.size == 3
        assert np.all(np.diff(planted) > 0)

    def test_invalid_sizes(self):
        with pytest.raises(ParameterError):
            synth_scene(5, 5, 100, 0.05, seed=0)
        with pytest.raises(ParameterError):
            synth_scene(5, 0, 100, 0.05, seed=0)
        with pytest.raises(ParameterError):
            synth_scene(5, 2, 4, 0.05, seed=0)
        with pytest.raises(ParameterError):
            synth_scene(5, 2, 100, -0.1, seed=0)

    def test_matrix_to_cube_grid(self):
        mat, _ = synth_scene(10, 2, 4000, 0.05, seed=1)
        cube = matrix_to_cube(mat)
        assert cube.values.shape == (50, 80, 10)
        assert np.all(cube.labels >= 1)
