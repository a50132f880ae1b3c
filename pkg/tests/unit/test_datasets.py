import numpy as np
import pytest
from mockito import ANY, unstub, when
from parameterized import parameterized
from scipy.spatial.distance import pdist

from cellarium.warp import constants, exceptions
from cellarium.warp.datasets import BlobSpec, Dataset, blobs, load_csv, load_idx, make_blobs, save_csv, write_idx

SPEC = BlobSpec(num_classes=4, per_class=25, dim=3, center_scale=10.0, noise_std=0.5, seed=0)


class TestBlobs:
    def teardown_method(self) -> None:
        unstub()

    def test_class_histogram(self):
        dataset = make_blobs(SPEC)
        assert dataset.features.shape == (100, 3)
        assert np.bincount(dataset.labels).tolist() == [25, 25, 25, 25]
        assert dataset.split == constants.DatasetSplit.TRAIN

    def test_determinism(self):
        np.testing.assert_array_equal(make_blobs(SPEC).features, make_blobs(SPEC).features)
        other = make_blobs(SPEC.model_copy(update={"seed": 1}))
        assert not np.array_equal(other.features, make_blobs(SPEC).features)

    def test_noiseless_classes_collapse_onto_shared_centres(self):
        spec = SPEC.model_copy(update={"noise_std": 0.0})
        train = make_blobs(spec, constants.DatasetSplit.TRAIN)
        test = make_blobs(spec, constants.DatasetSplit.TEST)

        np.testing.assert_array_equal(train.features, test.features)
        for c in range(4):
            members = train.features[train.labels == c]
            assert np.all(members == members[0])

    def test_splits_draw_different_samples_around_the_same_centres(self):
        train = make_blobs(SPEC, constants.DatasetSplit.TRAIN)
        test = make_blobs(SPEC, "test")

        assert test.split == constants.DatasetSplit.TEST
        assert not np.array_equal(train.features, test.features)
        for c in range(4):
            gap = train.features[train.labels == c].mean(axis=0) - test.features[test.labels == c].mean(axis=0)
            assert np.linalg.norm(gap) < 1.0

    def test_well_separated_two_class_centres(self):
        spec = BlobSpec(num_classes=2, per_class=50, dim=2, center_scale=10.0, noise_std=0.5, seed=3)
        dataset = make_blobs(spec)
        means = np.stack([dataset.features[dataset.labels == c].mean(axis=0) for c in range(2)])
        assert pdist(means).min() > 6 * 0.5 - 0.5

    def test_close_centres_are_drawn_again_with_the_next_seed(self):
        spec = SPEC.model_copy(update={"noise_std": 0.0})
        expected = make_blobs(spec.model_copy(update={"seed": 1}))

        when(blobs).pdist(ANY).thenReturn(np.array([0.0])).thenAnswer(pdist)
        np.testing.assert_array_equal(make_blobs(spec).features, expected.features)

    def test_unachievable_separation(self):
        spec = SPEC.model_copy(update={"center_scale": 1e-3, "noise_std": 10.0})
        with pytest.raises(exceptions.ConfigError):
            make_blobs(spec)


@parameterized.expand(
    [
        ("one_class", dict(num_classes=1)),
        ("no_samples", dict(per_class=0)),
        ("negative_noise", dict(noise_std=-1.0)),
        ("zero_scale", dict(center_scale=0.0)),
    ]
)
def test_blob_spec_validation(_, overrides):
    fields = dict(num_classes=2, per_class=5, dim=2, center_scale=1.0, noise_std=0.1)
    fields.update(overrides)
    with pytest.raises(ValueError):
        BlobSpec(**fields)


def test_dataset_validation():
    with pytest.raises(exceptions.DatasetFormatError):
        Dataset(features=np.zeros(3), labels=[0, 1, 2])
    with pytest.raises(exceptions.DatasetFormatError):
        Dataset(features=np.zeros((3, 2)), labels=[0, 1])
    with pytest.raises(exceptions.DatasetFormatError):
        Dataset(features=np.zeros((2, 2)), labels=[0, -1])
    assert Dataset(features=np.zeros((2, 2)), labels=[0, 3]).num_classes == 4


def test_csv_round_trip_is_exact(tmp_path):
    rng = np.random.RandomState(0)
    features = rng.normal(size=(20, 3)) * 10.0 ** rng.randint(-8, 8, size=(20, 1))
    dataset = Dataset(features=features, labels=rng.randint(0, 5, 20))
    save_csv(dataset, tmp_path / "data.csv")
    restored = load_csv(tmp_path / "data.csv")

    np.testing.assert_array_equal(restored.features, dataset.features)
    np.testing.assert_array_equal(restored.labels, dataset.labels)
    assert (tmp_path / "data.csv").read_text().splitlines()[0] == "label,f0,f1,f2"


def test_csv_single_row(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("label,f0,f1\n2,0.5,-1\n")
    dataset = load_csv(path, split=constants.DatasetSplit.TEST)
    assert len(dataset) == 1
    np.testing.assert_array_equal(dataset.features, [[0.5, -1.0]])
    assert dataset.labels.tolist() == [2]
    assert dataset.split == constants.DatasetSplit.TEST


@pytest.mark.parametrize(
    "name, content, field, line",
    [
        ("bad_label", "label,f0\n0,1.0\n1,2.0\nx,3.0\n", "label", 4),
        ("negative_label", "label,f0\n0,1.0\n-1,2.0\n", "label", 3),
        ("bad_feature", "label,f0,f1\n0,1.0,2.0\n1,abc,2.0\n", "f0", 3),
        ("missing_field", "label,f0,f1\n0,1.0,2.0\n1,2.0\n", "f1", 3),
        ("extra_field", "label,f0,f1\n0,1.0,2.0\n1,2.0,3.0,4.0\n", "row", 3),
        ("non_finite", "label,f0\n0,inf\n", "f0", 2),
        ("bad_header", "y,f0\n0,1.0\n", "header", 1),
        ("skipped_feature", "label,f0,f2\n0,1.0,2.0\n", "header", 1),
    ]
)
def test_csv_malformed_rows(tmp_path, name, content, field, line):
    path = tmp_path / f"{name}.csv"
    path.write_text(content)
    with pytest.raises(exceptions.DatasetFormatError) as error:
        load_csv(path)
    assert (error.value.field, error.value.line) == (field, line)


def test_csv_without_samples(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("label,f0,f1\n")
    with pytest.raises(exceptions.DatasetFormatError, match="no samples"):
        load_csv(path)

    path.write_text("")
    with pytest.raises(exceptions.DatasetFormatError, match="empty"):
        load_csv(path)


def test_csv_missing_file(tmp_path):
    with pytest.raises(exceptions.ArtifactIOError):
        load_csv(tmp_path / "missing.csv")


@pytest.fixture
def idx_files(tmp_path):
    images = np.zeros((3, 2, 2), dtype=np.uint8)
    images[0, 0, 0] = 255
    images[1, 1, 0] = 51
    images[2] = [[1, 2], [3, 4]]
    write_idx(tmp_path / "images.idx", tmp_path / "labels.idx", images, [7, 0, 3])
    return tmp_path / "images.idx", tmp_path / "labels.idx"


def test_load_idx(idx_files):
    dataset = load_idx(*idx_files)

    assert dataset.labels.tolist() == [7, 0, 3]
    assert dataset.features.shape == (3, 4)
    assert dataset.features[0, 0] == 1.0
    assert dataset.features[1, 2] == pytest.approx(0.2)
    np.testing.assert_allclose(dataset.features[2], np.array([1, 2, 3, 4]) / 255.0)


def test_load_idx_limit(idx_files):
    dataset = load_idx(*idx_files, limit=2)
    assert dataset.labels.tolist() == [7, 0]
    assert load_idx(*idx_files, limit=10).labels.tolist() == [7, 0, 3]


def test_idx_header_layout(idx_files):
    images_path, labels_path = idx_files
    assert images_path.read_bytes()[:16] == bytes.fromhex("00000803 00000003 00000002 00000002")
    assert labels_path.read_bytes() == bytes.fromhex("00000801 00000003 07 00 03")


def test_idx_errors(idx_files, tmp_path):
    images_path, labels_path = idx_files

    with pytest.raises(exceptions.DatasetFormatError) as error:
        load_idx(labels_path, images_path)
    assert error.value.field == "magic"

    write_idx(tmp_path / "more.idx", tmp_path / "four.idx", np.zeros((3, 2, 2)), [1, 2, 3, 4])
    with pytest.raises(exceptions.DatasetFormatError) as error:
        load_idx(images_path, tmp_path / "four.idx")
    assert error.value.field == "count"

    truncated = tmp_path / "truncated.idx"
    truncated.write_bytes(images_path.read_bytes()[:-1])
    with pytest.raises(exceptions.DatasetFormatError) as error:
        load_idx(truncated, labels_path)
    assert error.value.field == "payload"

    with pytest.raises(exceptions.ArtifactIOError):
        load_idx(tmp_path / "missing.idx", labels_path)
