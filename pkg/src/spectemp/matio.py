"""Disk I/O: EMBF embedding matrices, STM1 fitted models, TREC qrels.

EMBF layout (little-endian)::

    magic  b"EMBF"
    u32    version (1)
    u64    rows n
    u64    dim d
    u8     dtype code (1 = float32, the only one defined)
    f32    n*d values, row-major

STM1 layout (little-endian)::

    magic  b"STM1"
    u32    version (1)
    u64    dim d
    u64    rows used for the fit
    u64    sample cap
    i64    sample seed
    f64    tail fraction
    f64    noise floor
    u64    knee index (1-based)
    f64    reference snr
    f64    mean[d]
    f64    eigenvalues[d]      (descending)
    f64    eigenvectors[d*d]   (column-major: column i is contiguous)
    f64    snr[d]
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from spectemp.errors import (
    CorruptionError,
    DataError,
    DuplicateError,
    FormatError,
    ParseError,
    SizeMismatchError,
)

logger = logging.getLogger(__name__)

EMBF_MAGIC = b"EMBF"
EMBF_VERSION = 1
DTYPE_FLOAT32 = 1
_EMBF_HEADER = struct.Struct("<4sIQQB")

STM_MAGIC = b"STM1"
STM_VERSION = 1
_STM_HEADER = struct.Struct("<4sIQQQqddQd")


@dataclass(eq=False)
class EmbeddingMatrix:
    """An n x d float32 matrix with an optional source tag.

    ``label`` is in-memory only; the EMBF format has no slot for it.
    """

    data: np.ndarray
    label: str | None = None

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise DataError(f"embedding matrix must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise DataError(f"embedding matrix needs n >= 1 and d >= 1, got {data.shape}")
        self.data = np.ascontiguousarray(data, dtype=np.float32)
        bad = ~np.isfinite(self.data)
        if bad.any():
            row = int(np.argwhere(bad)[0, 0])
            raise DataError(f"non-finite value in row {row}")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def __eq__(self, other):
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return self.data.shape == other.data.shape and self.data.tobytes() == other.data.tobytes()


@dataclass
class QrelsTable:
    """Relevance judgments: query id -> [(doc id, grade), ...] in file order."""

    entries: dict[str, list[tuple[str, int]]] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def __contains__(self, qid):
        return qid in self.entries

    def grades(self, qid: str) -> dict[str, int]:
        return dict(self.entries.get(qid, ()))


def _write_bytes(path, payload: bytes):
    try:
        with open(path, "wb") as fh:
            fh.write(payload)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def embf_bytes(m: EmbeddingMatrix) -> bytes:
    header = _EMBF_HEADER.pack(EMBF_MAGIC, EMBF_VERSION, m.n, m.d, DTYPE_FLOAT32)
    return header + m.data.astype("<f4", copy=False).tobytes(order="C")


def parse_embf(buf: bytes, label: str | None = None) -> EmbeddingMatrix:
    if len(buf) < _EMBF_HEADER.size:
        if not buf.startswith(EMBF_MAGIC[: len(buf)]) or len(buf) < 4:
            raise FormatError("not an EMBF file (bad magic)")
        raise SizeMismatchError(f"EMBF header truncated: {len(buf)} bytes")
    magic, version, n, d, dtype = _EMBF_HEADER.unpack_from(buf)
    if magic != EMBF_MAGIC:
        raise FormatError(f"not an EMBF file (magic {magic!r})")
    if version != EMBF_VERSION:
        raise FormatError(f"unsupported EMBF version {version}")
    if dtype != DTYPE_FLOAT32:
        raise FormatError(f"unsupported EMBF dtype code {dtype}")
    if n < 1 or d < 1:
        raise FormatError(f"EMBF header declares empty matrix ({n} x {d})")
    expected = n * d * 4
    got = len(buf) - _EMBF_HEADER.size
    if got != expected:
        raise SizeMismatchError(
            f"EMBF payload is {got} bytes, header ({n} x {d}) requires {expected}"
        )
    data = np.frombuffer(buf, dtype="<f4", offset=_EMBF_HEADER.size).reshape(n, d)
    return EmbeddingMatrix(data.astype(np.float32), label=label)


def load_embeddings(path) -> EmbeddingMatrix:
    path = Path(path)
    buf = path.read_bytes()
    return parse_embf(buf, label=path.stem)


def save_embeddings(m: EmbeddingMatrix, path) -> None:
    _write_bytes(path, embf_bytes(m))


def parse_qrels(text: str) -> QrelsTable:
    entries: dict[str, list[tuple[str, int]]] = {}
    seen: set[tuple[str, str]] = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        parts = line.split()
        if not parts:
            continue
        if len(parts) == 3:
            qid, docid, rel_text = parts
        elif len(parts) == 4:
            qid, _, docid, rel_text = parts
        else:
            raise ParseError(f"expected 3 or 4 columns, got {len(parts)}", line=lineno)
        try:
            rel = int(rel_text)
        except ValueError:
            raise ParseError(f"relevance {rel_text!r} is not an integer", line=lineno) from None
        if rel < 0:
            raise ParseError(f"negative relevance {rel}", line=lineno)
        if (qid, docid) in seen:
            raise DuplicateError(f"duplicate judgment ({qid}, {docid})", line=lineno)
        seen.add((qid, docid))
        entries.setdefault(qid, []).append((docid, rel))

    retained = {q: rows for q, rows in entries.items() if any(r > 0 for _, r in rows)}
    dropped = len(entries) - len(retained)
    if dropped:
        logger.warning("dropped %d queries without a positive judgment", dropped)
    return QrelsTable(retained)


def load_qrels(path) -> QrelsTable:
    with open(path, encoding="utf-8") as fh:
        return parse_qrels(fh.read())


def save_qrels(qrels: QrelsTable, path) -> None:
    lines = [f"{q} 0 {doc} {rel}\n" for q, rows in qrels.entries.items() for doc, rel in rows]
    _write_bytes(path, "".join(lines).encode("utf-8"))


def load_ids(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh if line.strip()]


def save_ids(ids, path) -> None:
    _write_bytes(path, "".join(f"{i}\n" for i in ids).encode("utf-8"))


def model_bytes(model) -> bytes:
    d = model.dim
    header = _STM_HEADER.pack(
        STM_MAGIC,
        STM_VERSION,
        d,
        model.n_samples,
        model.sample_cap,
        model.seed,
        model.tail_fraction,
        model.noise_floor,
        model.knee_index,
        model.ref_snr,
    )
    body = [
        np.asarray(model.mean, dtype="<f8"),
        np.asarray(model.eigenvalues, dtype="<f8"),
        np.asarray(model.eigenvectors, dtype="<f8").ravel(order="F"),
        np.asarray(model.snr, dtype="<f8"),
    ]
    return header + b"".join(a.tobytes() for a in body)


def parse_model(buf: bytes):
    from spectemp.tempering import SpectralModel

    if len(buf) < 4 or buf[:4] != STM_MAGIC:
        raise FormatError(f"not an STM1 model file (magic {bytes(buf[:4])!r})")
    if len(buf) < _STM_HEADER.size:
        raise SizeMismatchError(f"STM1 header truncated: {len(buf)} bytes")
    (_, version, d, n_used, cap, seed, tail, floor, knee, ref) = _STM_HEADER.unpack_from(buf)
    if version != STM_VERSION:
        raise FormatError(f"unsupported STM1 version {version}")
    if d < 1 or d > 1 << 16:
        raise CorruptionError(f"implausible model dimension {d}")
    expected = _STM_HEADER.size + 8 * (3 * d + d * d)
    if len(buf) != expected:
        raise SizeMismatchError(f"STM1 file is {len(buf)} bytes, d={d} requires {expected}")

    arr = np.frombuffer(buf, dtype="<f8", offset=_STM_HEADER.size).astype(np.float64)
    mean = arr[:d].copy()
    eigenvalues = arr[d : 2 * d].copy()
    eigenvectors = arr[2 * d : 2 * d + d * d].reshape((d, d), order="F").copy()
    snr = arr[2 * d + d * d :].copy()

    if not (np.all(np.isfinite(arr)) and np.isfinite([tail, floor, ref]).all()):
        raise CorruptionError("non-finite value in model file")
    if np.any(np.diff(eigenvalues) > 0):
        raise CorruptionError("eigenvalues are not in descending order")
    if not (1 <= knee <= d):
        raise CorruptionError(f"knee index {knee} outside [1, {d}]")
    if not (0.0 < tail < 1.0):
        raise CorruptionError(f"tail fraction {tail} outside (0, 1)")

    return SpectralModel(
        mean=mean,
        eigenvalues=eigenvalues,
        eigenvectors=eigenvectors,
        n_samples=n_used,
        sample_cap=cap,
        seed=seed,
        tail_fraction=tail,
        noise_floor=floor,
        snr=snr,
        knee_index=knee,
        ref_snr=ref,
    )


def save_model(model, path) -> None:
    _write_bytes(path, model_bytes(model))


def load_model(path):
    return parse_model(Path(path).read_bytes())

