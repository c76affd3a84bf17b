import numpy as np
import pytest

from splinefil.bspline import make_spec
from splinefil.errors import DataError
from splinefil.io import (
    AffineTransform, ingest_csv, posterior_from_dict, posterior_to_dict, read_filament_csv, write_data_csv,
    write_filament_csv,
)
from splinefil.posterior import default_prior, fit
from splinefil.ridge import Filament


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestIngest:
    def test_three_rows(self, tmp_path):
        p = write(tmp_path, "x1,x2,y\n0.1,0.2,3.5\n0.4,0.9,-1\n1,0,2e-3\n")
        xs, ys, _ = ingest_csv(p, rescale=False)
        np.testing.assert_array_equal(xs, [[0.1, 0.2], [0.4, 0.9], [1, 0]])
        np.testing.assert_array_equal(ys, [3.5, -1, 2e-3])

    def test_column_order_and_extra_columns(self, tmp_path):
        p = write(tmp_path, "mag,lat,id,lon\n4.2,33,a,-118\n5.0,35,b,-117\n")
        xs, ys, _ = ingest_csv(p, ("lon", "lat", "mag"), rescale=False)
        np.testing.assert_array_equal(xs, [[-118, 33], [-117, 35]])
        np.testing.assert_array_equal(ys, [4.2, 5.0])

    def test_positional(self, tmp_path):
        p = write(tmp_path, "0.5,0.25,7\n0.75,0.5,8\n")
        xs, ys, _ = ingest_csv(p, (0, 1, 2), rescale=False, header=False)
        np.testing.assert_array_equal(ys, [7, 8])

    def test_rescale_round_trip(self, tmp_path, rng):
        lon = rng.uniform(-120, -114, 200)
        lat = rng.uniform(32, 42, 200)
        lon[[0, 1]], lat[[0, 1]] = (-120, -114), (32, 42)
        p = tmp_path / "q.csv"
        write_data_csv(p, np.column_stack([lon, lat]), rng.random(200))
        xs, _, tr = ingest_csv(p)
        assert xs.min() == 0.0 and xs.max() == 1.0
        np.testing.assert_allclose(tr.inverse(xs), np.column_stack([lon, lat]), rtol=0, atol=1e-12)

    def test_missing_column(self, tmp_path):
        p = write(tmp_path, "x1,x2,z\n0,0,1\n")
        with pytest.raises(DataError, match="'y'"):
            ingest_csv(p)

    def test_non_numeric(self, tmp_path):
        p = write(tmp_path, "x1,x2,y\n0,0,1\n0.5,abc,2\n")
        with pytest.raises(DataError, match=r"row 3, column 'x2'"):
            ingest_csv(p)

    def test_empty(self, tmp_path):
        with pytest.raises(DataError):
            ingest_csv(write(tmp_path, "x1,x2,y\n"))
        with pytest.raises(DataError):
            ingest_csv(write(tmp_path, "", "e.csv"))

    def test_degenerate_extent(self, tmp_path):
        p = write(tmp_path, "x1,x2,y\n0.3,0.1,1\n0.3,0.9,2\n")
        with pytest.raises(DataError, match="constant"):
            ingest_csv(p)
        xs, _, _ = ingest_csv(p, rescale=False)
        assert xs.shape == (2, 2)


class TestRoundTrips:
    def test_posterior(self, rng):
        spec = make_spec(3, 4, 3, 5)
        post = fit(spec, default_prior(spec), rng.random((30, 2)), rng.normal(size=30))
        tr = AffineTransform((-120.0, 32.0), (-114.0, 42.0))
        back, tr2 = posterior_from_dict(posterior_to_dict(post, tr))
        np.testing.assert_array_equal(back.mean_theta, post.mean_theta)
        np.testing.assert_array_equal(back.precision_chol, post.precision_chol)
        assert back.sigma2_hat == post.sigma2_hat and back.spec.shape == (4, 5) and tr2 == tr

    def test_filament_inverse_transform(self, tmp_path, rng):
        pts = rng.random((25, 2))
        fil = Filament(pts, ["converged"] * 25, -rng.random(25))
        tr = AffineTransform((-120.0, 32.0), (-114.0, 42.0))
        write_filament_csv(tmp_path / "f.csv", fil, tr)
        back = read_filament_csv(tmp_path / "f.csv")
        np.testing.assert_allclose(tr.forward(back.points), pts, rtol=0, atol=1e-10)
        np.testing.assert_array_equal(back.lambdas, fil.lambdas)
