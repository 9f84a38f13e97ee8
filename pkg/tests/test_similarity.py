import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from taskorder.errors import NegativeTransferError, NonpositiveBaseline, NotPSD, ParseError, ShapeMismatch, TaskOrderError
from taskorder.similarity import (
    TransferErrorTable,
    estimate_similarity,
    linear_transfer_table,
    load_table,
    load_table_csv,
    project_psd,
)

from strategies import correlations


def _pair(ratio_ab, ratio_ba):
    t = np.array([[0.0, ratio_ab], [ratio_ba, 0.0]])
    return TransferErrorTable(t, np.ones((2, 2)))


class TestEstimate:
    @pytest.mark.parametrize("ratio,rho", [(0.25, 0.5), (1.0, 0.0), (2.25, -0.5), (0.0, 1.0)])
    def test_symmetric_pairs(self, ratio, rho):
        sim = estimate_similarity(_pair(ratio, ratio))
        assert sim.rho[0, 1] == pytest.approx(rho, abs=1e-15)
        assert not sim.any_clamped

    def test_clamps_and_flags(self):
        sim = estimate_similarity(_pair(9.0, 9.0))
        assert sim.rho[0, 1] == -1.0
        assert sim.clamped[0, 1] and sim.clamped[1, 0]
        assert not sim.clamped[0, 0]

    def test_custom_clamp(self):
        sim = estimate_similarity(_pair(0.25, 0.25), clamp_lo=-0.2, clamp_hi=0.4)
        assert sim.rho[0, 1] == 0.4 and sim.clamped[0, 1]
        with pytest.raises(TaskOrderError):
            estimate_similarity(_pair(1, 1), clamp_lo=0.5, clamp_hi=0.5)

    def test_asymmetry(self):
        sim = estimate_similarity(_pair(0.25, 1.0))
        assert sim.rho[0, 1] == pytest.approx(0.25)
        assert sim.asymmetry[0, 1] == pytest.approx(0.25)

    def test_baseline_scales_out(self):
        t = TransferErrorTable([[1.0, 0.5], [2.0, 1.0]], [[2.0, 2.0], [8.0, 8.0]])
        assert estimate_similarity(t).rho[0, 1] == pytest.approx(0.5)

    @settings(max_examples=40, deadline=None)
    @given(correlations(2, 7), st.floats(0.1, 10.0))
    def test_linear_round_trip(self, c, base):
        sim = estimate_similarity(linear_transfer_table(c.entries, base))
        assert np.allclose(sim.rho, c.entries, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2**31 - 1))
    def test_exactly_symmetric(self, P, seed):
        rng = np.random.default_rng(seed)
        t = rng.uniform(0, 3, (P, P))
        b = rng.uniform(0.5, 2, (P, P))
        rho = estimate_similarity(TransferErrorTable(t, b)).rho
        assert np.array_equal(rho, rho.T)
        assert np.all(np.diag(rho) == 1.0)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 5), st.integers(0, 2**31 - 1), st.floats(0.0, 1.0))
    def test_lower_transfer_error_never_lowers_similarity(self, P, seed, shrink):
        rng = np.random.default_rng(seed)
        t = rng.uniform(0, 3, (P, P))
        b = rng.uniform(0.5, 2, (P, P))
        i, j = rng.choice(P, 2, replace=False)
        before = estimate_similarity(TransferErrorTable(t, b)).rho[i, j]
        t2 = t.copy()
        t2[i, j] *= shrink
        after = estimate_similarity(TransferErrorTable(t2, b)).rho[i, j]
        assert after >= before


class TestTableValidation:
    def test_negative_transfer(self):
        with pytest.raises(NegativeTransferError):
            TransferErrorTable([[0, -1], [1, 0]], np.ones((2, 2)))

    def test_zero_baseline(self):
        with pytest.raises(NonpositiveBaseline):
            TransferErrorTable(np.ones((2, 2)), [[1, 0], [1, 1]])

    def test_shapes(self):
        with pytest.raises(ShapeMismatch):
            TransferErrorTable(np.ones((2, 2)), np.ones((3, 3)))
        with pytest.raises(ShapeMismatch):
            TransferErrorTable(np.ones((2, 3)), np.ones((2, 3)))


class TestLoad:
    DOC = {"transfer": [[0, 0.25, 1], [0.25, 0, 0.5], [1, 0.5, 0]], "baseline": [[1] * 3] * 3}

    def test_json_string_dict_and_file(self, tmp_path):
        path = tmp_path / "t.json"
        path.write_text(json.dumps(self.DOC))
        for src in (self.DOC, json.dumps(self.DOC), path, str(path)):
            assert load_table(src).P == 3

    def test_missing_baseline(self):
        with pytest.raises(ParseError):
            load_table({"transfer": self.DOC["transfer"]})

    def test_negative_entry(self):
        doc = dict(self.DOC, transfer=[[0, -0.1, 1], [0.25, 0, 0.5], [1, 0.5, 0]])
        with pytest.raises(NegativeTransferError):
            load_table(doc)

    def test_bad_json_and_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_table("{not json")
        with pytest.raises(ParseError):
            load_table(tmp_path / "absent.json")

    def test_ragged(self):
        with pytest.raises(ParseError):
            load_table({"transfer": [[0, 1], [1]], "baseline": [[1, 1], [1, 1]]})

    def test_two_csv_files(self, tmp_path):
        (tmp_path / "t.csv").write_text("a,b\n0,0.25\n0.25,0\n")
        (tmp_path / "b.csv").write_text("1,1\n1,1\n")
        table = load_table_csv(tmp_path / "t.csv", tmp_path / "b.csv")
        assert estimate_similarity(table).rho[0, 1] == pytest.approx(0.5)


class TestProjection:
    def test_non_psd_estimate(self):
        rho = np.array([[1.0, 0.95, -0.9], [0.95, 1.0, 0.95], [-0.9, 0.95, 1.0]])
        sim = estimate_similarity(linear_transfer_table(rho))
        assert not sim.is_psd()
        with pytest.raises(NotPSD):
            sim.to_correlation()
        c = sim.to_correlation(project=True)
        assert np.linalg.eigvalsh(c.entries)[0] >= -1e-10
        assert np.all(np.diag(c.entries) == 1.0)

    @settings(max_examples=20, deadline=None)
    @given(correlations(2, 6))
    def test_psd_input_unchanged(self, c):
        assert np.allclose(project_psd(c.entries), c.entries, atol=1e-10)
