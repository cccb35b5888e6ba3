"""Unit tests for experiment artifact I/O."""

import json

import numpy as np
import pandas as pd
import pytest

from semrobust.core.attacks import AttackOutcome
from semrobust.core.certify import CertResult
from semrobust.core.oracle import gen_population
from semrobust.exceptions import ConfigurationError
from semrobust.exceptions import OutputError
from semrobust.utils import io


def _outcome(identity_id, delta, success=True):
    delta = np.asarray(delta, dtype=np.float64)
    return AttackOutcome(
        identity_id=identity_id,
        method="fab",
        success=success,
        delta=delta,
        energy=float(np.linalg.norm(delta)),
        predicted_class=identity_id + 1,
        restart_index=0,
        clean_correct=True,
    )


class TestAtomicWrites:
    """Locked, atomic text writes."""

    def test_creates_parents(self, tmp_path):
        target = tmp_path / "a" / "b" / "out.txt"
        io.atomic_write_text(target, "hello\n")
        assert target.read_text(encoding="utf-8") == "hello\n"

    def test_no_temporaries_left(self, tmp_path):
        target = tmp_path / "out.json"
        io.write_json({"x": 1}, target)
        io.write_json({"x": 2}, target)
        leftovers = [p.name for p in tmp_path.iterdir() if p.name.startswith(".out.json.")]
        assert leftovers == []
        assert json.loads(target.read_text())["x"] == 2

    def test_lf_line_endings(self, tmp_path):
        target = tmp_path / "frame.csv"
        io.write_frame(pd.DataFrame({"a": [1, 2], "b": ["x", "y"]}), target)
        raw = target.read_bytes()
        assert b"\r\n" not in raw
        assert raw == b"a,b\n1,x\n2,y\n"

    def test_seventeen_digits(self, tmp_path):
        target = tmp_path / "frame.csv"
        io.write_frame(pd.DataFrame({"v": [0.1]}), target)
        assert target.read_text().splitlines()[1] == "0.10000000000000001"

    def test_unwritable_target(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OutputError):
            io.atomic_write_text(blocker / "child.txt", "y")


class TestReaders:
    """Error mapping on read."""

    def test_missing_json(self, tmp_path):
        with pytest.raises(OutputError):
            io.read_json(tmp_path / "absent.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigurationError):
            io.read_json(path)

    def test_missing_csv(self, tmp_path):
        with pytest.raises(OutputError):
            io.read_frame(tmp_path / "absent.csv")

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "partial.csv"
        path.write_text("identity_id,method\n0,pgd\n")
        with pytest.raises(ConfigurationError, match="lacks columns"):
            io.read_outcomes(path)

    def test_no_delta_columns(self, tmp_path):
        path = tmp_path / "nodelta.csv"
        frame = io.outcomes_to_frame([_outcome(0, [0.1, 0.2])], 2)
        io.write_frame(frame.drop(columns=["delta_0", "delta_1"]), path)
        with pytest.raises(ConfigurationError):
            io.read_outcomes(path)


class TestAttackResults:
    """Per-identity attack CSVs."""

    def test_round_trip(self, tmp_path, rng):
        outcomes = [_outcome(i, rng.normal(size=3), success=i % 2 == 0) for i in range(12)]
        path = io.write_outcomes(outcomes, 3, tmp_path / "attack_results.csv")
        loaded = io.read_outcomes(path)
        assert [o.identity_id for o in loaded] == list(range(12))
        for original, copy in zip(outcomes, loaded):
            np.testing.assert_array_equal(original.delta, copy.delta)
            assert copy.energy == original.energy
            assert copy.success == original.success
            assert copy.clean_correct and copy.method == "fab"

    def test_column_layout(self):
        frame = io.outcomes_to_frame([_outcome(0, [0.1, 0.2])], 2)
        assert list(frame.columns) == io.ATTACK_COLUMNS + ["delta_0", "delta_1"]

    def test_many_delta_columns_stay_ordered(self, tmp_path):
        delta = np.arange(12, dtype=float)
        path = io.write_outcomes([_outcome(0, delta)], 12, tmp_path / "wide.csv")
        np.testing.assert_array_equal(io.read_outcomes(path)[0].delta, delta)


class TestCertResults:
    """Certification CSVs and curves."""

    def test_round_trip(self, tmp_path):
        results = [
            CertResult(0, "anisotropic", 0.25, 0, True, 0.9332543, 1.5006, 0.375157, False),
            CertResult(1, "anisotropic", 0.25, 3, False, 0.31, 0.0, 0.0, True),
        ]
        path = io.write_cert_results(results, tmp_path / "certify.csv")
        assert io.read_cert_results(path) == results
        assert list(pd.read_csv(path).columns) == io.CERT_COLUMNS

    def test_curve(self, tmp_path):
        path = io.write_curve([(0.0, 1.0), (0.5, 0.25)], tmp_path / "curve.csv")
        assert path.read_text() == "radius,certified_accuracy\n0,1\n0.5,0.25\n"


class TestLoaders:
    """Population and basis files."""

    def test_population(self, tmp_path):
        pop = gen_population(5, 4, seed=3)
        path = io.save_population(pop, tmp_path / "population.json")
        loaded = io.load_population(path)
        np.testing.assert_array_equal(loaded.codes, pop.codes)
        assert loaded.seed == 3

    def test_malformed_population(self, tmp_path):
        path = tmp_path / "population.json"
        path.write_text(json.dumps({"codes": [[1.0]]}))
        with pytest.raises(ConfigurationError):
            io.load_population(path)

    def test_basis_npy(self, tmp_path):
        path = tmp_path / "basis.npy"
        np.save(path, np.eye(3, 6))
        basis = io.load_basis(path)
        assert (basis.num_attributes, basis.latent_dim) == (3, 6)
        assert basis.attribute_names == ("pose", "age", "gender")

    def test_basis_json(self, tmp_path):
        path = tmp_path / "basis.json"
        path.write_text(
            json.dumps({"attribute_names": ["a", "b"], "directions": [[2.0, 0.0], [0.0, 1.0]]})
        )
        basis = io.load_basis(path)
        assert basis.attribute_names == ("a", "b")
        np.testing.assert_allclose(basis.directions, np.eye(2))

    def test_basis_json_without_directions(self, tmp_path):
        path = tmp_path / "basis.json"
        path.write_text(json.dumps({"attribute_names": ["a"]}))
        with pytest.raises(ConfigurationError):
            io.load_basis(path)
