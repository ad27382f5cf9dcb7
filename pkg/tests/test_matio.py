import os
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectemp import matio
from spectemp.errors import (
    CorruptionError,
    DataError,
    DuplicateError,
    FormatError,
    ParseError,
    SizeMismatchError,
    SpecTempError,
)
from spectemp.tempering import fit_model


def _embf(n, d, payload, version=1, dtype=1, magic=b"EMBF"):
    header = struct.pack("<4sIQQB", magic, version, n, d, dtype)
    return header + np.asarray(payload, dtype="<f4").tobytes()


class TestLoadEmbeddings:
    def test_decodes_row_major(self, tmp_path):
        p = tmp_path / "a.embf"
        p.write_bytes(_embf(2, 3, [1, 2, 3, 4, 5, 6]))
        m = matio.load_embeddings(p)
        assert (m.n, m.d) == (2, 3)
        np.testing.assert_array_equal(m.data, [[1, 2, 3], [4, 5, 6]])
        assert m.data.dtype == np.float32

    def test_minimal_matrix(self, tmp_path):
        p = tmp_path / "one.embf"
        p.write_bytes(_embf(1, 1, [0.0]))
        np.testing.assert_array_equal(matio.load_embeddings(p).data, [[0.0]])

    def test_short_payload(self, tmp_path):
        p = tmp_path / "short.embf"
        p.write_bytes(_embf(2, 3, [1, 2, 3, 4, 5]))
        with pytest.raises(SizeMismatchError):
            matio.load_embeddings(p)

    def test_trailing_bytes(self):
        with pytest.raises(SizeMismatchError):
            matio.parse_embf(_embf(1, 2, [1, 2, 3]))

    @pytest.mark.parametrize(
        "kwargs", [dict(magic=b"EMBX"), dict(version=2), dict(dtype=0)], ids=["magic", "version", "dtype"]
    )
    def test_bad_header(self, kwargs):
        with pytest.raises(FormatError):
            matio.parse_embf(_embf(1, 1, [1.0], **kwargs))

    def test_non_finite_names_row(self):
        buf = _embf(3, 2, [0, 0, 1, 1, np.nan, 2])
        with pytest.raises(DataError, match="row 2"):
            matio.parse_embf(buf)


class TestSaveEmbeddings:
    def test_round_trip_bytes(self, tmp_path):
        m = matio.EmbeddingMatrix(np.arange(12, dtype=np.float32).reshape(3, 4) * 0.37)
        p = tmp_path / "m.embf"
        matio.save_embeddings(m, p)
        back = matio.load_embeddings(p)
        assert back == m
        assert back.data.tobytes() == m.data.tobytes()

    def test_negative_zero_survives(self, tmp_path):
        m = matio.EmbeddingMatrix(np.array([[-0.0, 0.0]], dtype=np.float32))
        p = tmp_path / "z.embf"
        matio.save_embeddings(m, p)
        back = matio.load_embeddings(p).data
        assert np.signbit(back[0, 0]) and not np.signbit(back[0, 1])

    @pytest.mark.skipif(os.geteuid() == 0, reason="root ignores directory permissions")
    def test_read_only_dir(self, tmp_path):
        ro = tmp_path / "ro"
        ro.mkdir()
        ro.chmod(0o500)
        with pytest.raises(OSError):
            matio.save_embeddings(matio.EmbeddingMatrix(np.ones((1, 1))), ro / "x.embf")

    def test_missing_dir(self, tmp_path):
        with pytest.raises(OSError):
            matio.save_embeddings(matio.EmbeddingMatrix(np.ones((1, 1))), tmp_path / "nope" / "x.embf")

    @settings(max_examples=50, deadline=None)
    @given(
        st.integers(1, 5).flatmap(
            lambda n: st.integers(1, 5).flatmap(
                lambda d: st.lists(
                    st.floats(allow_nan=False, allow_infinity=False, width=32), min_size=n * d, max_size=n * d
                ).map(lambda v: np.array(v, dtype=np.float32).reshape(n, d))
            )
        )
    )
    def test_round_trip_property(self, data):
        m = matio.EmbeddingMatrix(data)
        assert matio.parse_embf(matio.embf_bytes(m)) == m


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=80))
def test_embf_loader_is_total(buf):
    try:
        matio.parse_embf(buf)
    except SpecTempError:
        pass


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_model_loader_is_total(buf):
    try:
        matio.parse_model(b"STM1" + buf)
    except SpecTempError:
        pass


class TestQrels:
    def test_three_columns(self):
        q = matio.parse_qrels("q1 d1 1\nq1 d2 0\n")
        assert q.entries == {"q1": [("d1", 1), ("d2", 0)]}

    def test_four_columns(self):
        assert matio.parse_qrels("q1 0 d1 1").entries == {"q1": [("d1", 1)]}

    def test_duplicate(self):
        with pytest.raises(DuplicateError, match="line 2"):
            matio.parse_qrels("q1 d1 1\nq1 d1 2")

    @pytest.mark.parametrize("text", ["q1 d1", "q1 d1 x", "q1 d1 -1", "a b c d e"])
    def test_malformed(self, text):
        with pytest.raises(ParseError, match="line 1"):
            matio.parse_qrels(text)

    def test_query_without_positive_is_dropped(self):
        q = matio.parse_qrels("q1 d1 0\nq2 d1 2\n")
        assert list(q.entries) == ["q2"]

    def test_file_round_trip(self, tmp_path):
        q = matio.parse_qrels("q1 d1 1\nq1 d2 0\nq2 d9 3\n")
        matio.save_qrels(q, tmp_path / "q.txt")
        assert matio.load_qrels(tmp_path / "q.txt") == q


class TestModelFile:
    @pytest.fixture
    def model(self, rng):
        return fit_model(rng.standard_normal((100, 8)) * np.arange(1, 9))

    def test_round_trip_bit_exact(self, model, tmp_path):
        matio.save_model(model, tmp_path / "m.stm")
        back = matio.load_model(tmp_path / "m.stm")
        assert back.fields_equal(model)
        assert matio.model_bytes(back) == matio.model_bytes(model)

    def test_eigenvectors_stored_column_major(self, model):
        buf = matio.model_bytes(model)
        d = model.dim
        offset = matio._STM_HEADER.size + 16 * d
        first_col = np.frombuffer(buf, dtype="<f8", count=d, offset=offset)
        np.testing.assert_array_equal(first_col, model.eigenvectors[:, 0])

    def test_ascending_eigenvalues_rejected(self, model):
        buf = bytearray(matio.model_bytes(model))
        d = model.dim
        start = matio._STM_HEADER.size + 8 * d
        lam = np.frombuffer(bytes(buf[start : start + 8 * d]), dtype="<f8")[::-1].copy()
        buf[start : start + 8 * d] = lam.tobytes()
        with pytest.raises(CorruptionError):
            matio.parse_model(bytes(buf))

    def test_embf_magic_rejected(self, tmp_path):
        p = tmp_path / "x.stm"
        p.write_bytes(_embf(1, 1, [1.0]))
        with pytest.raises(FormatError):
            matio.load_model(p)

    def test_version_mismatch(self, model):
        buf = bytearray(matio.model_bytes(model))
        buf[4:8] = struct.pack("<I", 9)
        with pytest.raises(FormatError, match="version"):
            matio.parse_model(bytes(buf))

    def test_truncated(self, model):
        with pytest.raises(SizeMismatchError):
            matio.parse_model(matio.model_bytes(model)[:-8])
