import numpy as np
import pytest

from cfrl import data, schema
from cfrl.errors import ConfigError, CsvParseError


def make_schema(n=2, task="classification"):
    feats = tuple(schema.Feature(f"f{i}") for i in range(n))
    tgt = schema.Target("y", task, 2 if task == "classification" else None)
    return schema.FeatureSchema(features=feats, target=tgt)


def write_csv(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


class TestSchema:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ConfigError):
            schema.FeatureSchema(
                features=(schema.Feature("a"), schema.Feature("a")),
                target=schema.Target("y", "regression"),
            )

    def test_needs_actionable_feature(self):
        with pytest.raises(ConfigError):
            schema.FeatureSchema(
                features=(schema.Feature("a", actionable=False),),
                target=schema.Target("y", "regression"),
            )

    def test_binary_bounds_fixed(self):
        with pytest.raises(ConfigError):
            schema.Feature("b", kind="binary", raw_min=0, raw_max=2)

    def test_numeric_needs_increasing_bounds(self):
        with pytest.raises(ConfigError):
            schema.Feature("a", raw_min=1.0, raw_max=1.0)

    def test_json_round_trip(self, tmp_path):
        sch = make_schema(3)
        path = tmp_path / "s.json"
        schema.save_schema(sch, path)
        assert schema.load_schema(path) == sch
        assert schema.load_schema(path).fingerprint() == sch.fingerprint()


class TestLoadCsv:
    def test_three_row_csv(self, tmp_path):
        sch = make_schema()
        p = write_csv(tmp_path, "f0,f1,y\n1,2,0\n3,4,1\n5,6,0\n")
        ds = data.load_csv(p, sch)
        assert ds.rows.shape == (3, 2)
        assert ds.labels.tolist() == [0, 1, 0]
        assert not ds.normalized

    def test_breast_cancer_file_shape(self):
        sch = schema.load_schema("data/breast_cancer.schema.json")
        ds = data.load_csv("data/breast_cancer.csv", sch)
        assert ds.n_rows == 699
        assert ds.n_features == 10

    def test_non_numeric_cell_names_row(self, tmp_path):
        sch = make_schema()
        rows = "\n".join(f"{i},{i},0" for i in range(1, 5))
        p = write_csv(tmp_path, f"f0,f1,y\n{rows}\nbad,9,1\n")
        with pytest.raises(CsvParseError, match="row 5"):
            data.load_csv(p, sch)

    def test_missing_column(self, tmp_path):
        sch = make_schema()
        p = write_csv(tmp_path, "f0,y\n1,0\n")
        with pytest.raises(CsvParseError, match="f1"):
            data.load_csv(p, sch)

    def test_label_out_of_range(self, tmp_path):
        sch = make_schema()
        p = write_csv(tmp_path, "f0,f1,y\n1,2,5\n")
        with pytest.raises(CsvParseError, match="label out of range"):
            data.load_csv(p, sch)

    def test_column_order_free(self, tmp_path):
        sch = make_schema()
        p = write_csv(tmp_path, "y,f1,f0\n0,2,1\n")
        ds = data.load_csv(p, sch)
        assert ds.rows[0].tolist() == [1.0, 2.0]


class TestNormalizer:
    def test_single_row_is_constant(self):
        sch = make_schema()
        ds = data.Dataset(sch, np.array([[2.0, 3.0]]), np.array([0]))
        st = data.fit_normalizer(ds)
        assert st.constant_mask.all()
        assert data.normalize(ds.rows[0], st).tolist() == [0.0, 0.0]

    def test_min_max_simple(self):
        sch = make_schema(1)
        ds = data.Dataset(sch, np.array([[0.0], [10.0]]), np.array([0, 1]))
        st = data.fit_normalizer(ds)
        assert (st.mins[0], st.maxs[0]) == (0.0, 10.0)
        ds3 = data.Dataset(sch, np.array([[-5.0], [5.0], [15.0]]), np.array([0, 1, 0]))
        st3 = data.fit_normalizer(ds3)
        assert (st3.mins[0], st3.maxs[0]) == (-5.0, 15.0)

    def test_extremes_map_to_unit_corners(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 4)) * 7 + 3
        sch = make_schema(4)
        st = data.fit_normalizer(data.Dataset(sch, X, np.zeros(20, dtype=int)))
        assert np.allclose(data.normalize(st.mins, st), 0.0)
        assert np.allclose(data.normalize(st.maxs, st), 1.0)

    def test_round_trip_exact(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(-10, 10, size=(50, 6))
        sch = make_schema(6)
        st = data.fit_normalizer(data.Dataset(sch, X, np.zeros(50, dtype=int)))
        for _ in range(100):
            x = st.mins + rng.uniform(size=6) * (st.maxs - st.mins)
            back = data.denormalize(data.normalize(x, st), st)
            assert np.abs(back - x).max() < 1e-9

    def test_empty_dataset_rejected(self):
        sch = make_schema()
        ds = data.Dataset(sch, np.zeros((0, 2)), np.zeros(0, dtype=int))
        with pytest.raises(ConfigError):
            data.fit_normalizer(ds)

    def test_length_mismatch(self):
        sch = make_schema()
        st = data.fit_normalizer(
            data.Dataset(sch, np.array([[0.0, 1.0], [1.0, 2.0]]), np.array([0, 1])))
        with pytest.raises(ConfigError):
            data.normalize(np.zeros(3), st)

    def test_constant_features_leave_actionable_set(self):
        feats = (schema.Feature("a"), schema.Feature("b"))
        sch = schema.FeatureSchema(features=feats, target=schema.Target("y", "classification", 2))
        X = np.array([[1.0, 5.0], [2.0, 5.0]])
        st = data.fit_normalizer(data.Dataset(sch, X, np.array([0, 1])))
        assert data.actionable_indices(sch, st) == [0]


class TestSplit:
    def test_counts(self):
        sch = make_schema(1)
        ds = data.Dataset(sch, np.arange(10.0)[:, None], np.zeros(10, dtype=int))
        tr, te = data.split(ds, 0.7, seed=0)
        assert (tr.n_rows, te.n_rows) == (7, 3)

    def test_699_split_is_floored(self):
        sch = make_schema(1)
        ds = data.Dataset(sch, np.arange(699.0)[:, None], np.zeros(699, dtype=int))
        tr, te = data.split(ds, 0.7, seed=3)
        assert (tr.n_rows, te.n_rows) == (489, 210)

    def test_deterministic_and_partition(self):
        sch = make_schema(1)
        ds = data.Dataset(sch, np.arange(25.0)[:, None], np.arange(25) % 2)
        a_tr, a_te = data.split(ds, 0.6, seed=11)
        b_tr, b_te = data.split(ds, 0.6, seed=11)
        assert np.array_equal(a_tr.rows, b_tr.rows)
        assert np.array_equal(a_te.rows, b_te.rows)
        union = np.concatenate([a_tr.rows, a_te.rows]).ravel()
        assert sorted(union.tolist()) == list(range(25))

    def test_fraction_bounds(self):
        sch = make_schema(1)
        ds = data.Dataset(sch, np.arange(4.0)[:, None], np.zeros(4, dtype=int))
        for bad in (0.0, 1.0, -0.5):
            with pytest.raises(ConfigError):
                data.split(ds, bad, seed=0)


class TestNeighborhood:
    def test_within_ball_and_box(self):
        x = np.full(8, 0.5)
        pts = data.sample_neighborhood(x, 1.0, 500, rng=0)
        assert pts.shape == (500, 8)
        assert (pts >= 0).all() and (pts <= 1).all()
        assert (np.linalg.norm(pts - x, axis=1) <= 1.0 + 1e-12).all()

    def test_tiny_radius_collapses_to_center(self):
        x = np.array([0.2, 0.9, 0.4])
        pts = data.sample_neighborhood(x, 1e-12, 50, rng=1)
        assert np.abs(pts - x).max() < 1e-9

    def test_ball_symmetry_monte_carlo(self):
        x = np.full(5, 0.5)
        pts = data.sample_neighborhood(x, 1.0, 100_000, rng=2, clip=False)
        assert np.abs(pts.mean(axis=0) - x).max() < 0.02

    def test_bad_arguments(self):
        x = np.zeros(2)
        with pytest.raises(ConfigError):
            data.sample_neighborhood(x, 1.0, 0, rng=0)
        with pytest.raises(ConfigError):
            data.sample_neighborhood(x, -1.0, 5, rng=0)
