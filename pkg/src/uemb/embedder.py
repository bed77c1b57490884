"""Embedding operators y = h(Ax + w) and embedding-space geometry.

Operators are immutable (A, w, map) bundles.  All distances are normalized
by M (means, not sums) so tolerance guarantees are rate-independent.

Bit-exactness: every projection goes through the same >=2-row GEMM path
regardless of batch size or partitioning, so embed, embed_batch, and any
caller-side split of a batch agree coordinatewise to the last bit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .maps import PeriodicMap, make_multibit, make_square_wave
from .randproj import ProjectionSpec, sample_dither, sample_projection

_CHUNK_ROWS = 4096

MAGIC = b"UEMB"
FORMAT_VERSION = 1
_FLAG_PACKED_BITS = 0x1


class FormatError(ValueError):
    """Embedding file fails magic/version/structure validation."""


@dataclass(frozen=True)
class EmbeddingOperator:
    """Frozen (A, w, map, spec) bundle mapping R^N signals to R^M embeddings."""

    A: np.ndarray
    w: np.ndarray
    map: PeriodicMap
    spec: ProjectionSpec
    M: int
    N: int
    seed: int

    def __post_init__(self):
        if self.A.shape != (self.M, self.N):
            raise ValueError("A must be M x N")
        if self.w.shape != (self.M,):
            raise ValueError("w must have length M")
        if np.any(self.w < 0) or np.any(self.w >= 1):
            raise ValueError("dither entries must lie in [0, 1)")
        self.A.setflags(write=False)
        self.w.setflags(write=False)

    @property
    def operator_id(self):
        """Provenance tag stored with embeddings; distance checks compare it."""
        return "%s|%s|seed=%d|M=%d|N=%d" % (
            self.map.name, self.spec.describe(), self.seed, self.M, self.N
        )


@dataclass(eq=False)
class EmbeddingVector:
    """One embedded signal with provenance."""

    values: np.ndarray
    map_id: str
    binary: bool = False
    quantized_bits: int | None = None
    saturation_count: int | None = None


def build_operator(spec, map_, M, N, rs):
    """Sample A ('matrix' stream) and w ('dither' stream) for an operator.

    spec.scale is used as-is; use universal_scale / build_universal_operator
    for the (sigma, Delta, B) parameterization of universal embeddings.
    """
    M, N = int(M), int(N)
    if M < 1 or N < 1:
        raise ValueError("M and N must be positive")
    A = sample_projection(spec, M, N, rs)
    w = sample_dither(M, rs)
    return EmbeddingOperator(A=A, w=w, map=map_, spec=spec, M=M, N=N, seed=rs.seed)


def replace_map(op, map_):
    """Same (A, w, spec) with a different nonlinearity.

    Used to compare quantized and unquantized twins of one randomization.
    """
    return EmbeddingOperator(
        A=op.A, w=op.w, map=map_, spec=op.spec, M=op.M, N=op.N, seed=op.seed
    )


def universal_scale(scale, Delta, bits=1):
    """Effective projection scale folding the quantizer geometry.

    A B-bit universal quantizer with step Delta spans 2^B Delta before it
    wraps; rescaling it to the period-1 map moves that span into the
    projection, giving scale / (2^B Delta).  B = 1 is the binary case.
    """
    if Delta <= 0:
        raise ValueError("Delta must be positive")
    if int(bits) != bits or bits < 1:
        raise ValueError("bits must be a positive integer")
    return scale / (2 ** int(bits) * Delta)


def build_universal_operator(family, scale, Delta, bits, M, N, rs):
    """Universal embedding operator at user-level (scale, Delta, B).

    B = 1 uses the {0,1} square-wave map (Hamming-compatible); B > 1 uses
    the B-bit quantized sawtooth.
    """
    spec = ProjectionSpec(family, universal_scale(scale, Delta, bits))
    map_ = make_square_wave() if bits == 1 else make_multibit(bits)
    return build_operator(spec, map_, M, N, rs)


def _project_rows(op, X):
    """X @ A.T + w through a fixed >=2-row GEMM path (see module docstring)."""
    n = X.shape[0]
    out = np.empty((n, op.M))
    At = op.A.T
    for lo in range(0, n, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, n)
        block = X[lo:hi]
        if hi - lo == 1:
            padded = np.concatenate([block, block], axis=0) @ At
            out[lo:hi] = padded[:1]
        else:
            out[lo:hi] = block @ At
    out += op.w
    return out


def embed(op, x):
    """y_i = h(<a_i, x> + w_i)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (op.N,):
        raise ValueError("signal must have length N=%d" % op.N)
    if not np.all(np.isfinite(x)):
        raise ValueError("signal must be finite")
    values = op.map(_project_rows(op, x[None, :])[0])
    return EmbeddingVector(values=values, map_id=op.operator_id, binary=op.map.is_binary)


def embed_batch(op, X):
    """Embed a batch of signals; elementwise equal to mapping embed."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != op.N:
        raise ValueError("batch must be n x N with N=%d" % op.N)
    if X.shape[0] == 0:
        return []
    if not np.all(np.isfinite(X)):
        raise ValueError("signals must be finite")
    Y = op.map(_project_rows(op, X))
    is_bin = op.map.is_binary
    return [
        EmbeddingVector(values=Y[i], map_id=op.operator_id, binary=is_bin)
        for i in range(Y.shape[0])
    ]


METRICS = ("sq_l2_mean", "l2_mean", "hamming_mean", "inner_mean")


def embedding_distance(y, y2, metric):
    """Normalized embedding-space distance or inner product.

    sq_l2_mean = (1/M) ||y - y'||_2^2, l2_mean its square root,
    hamming_mean the fraction of differing coordinates ({0,1} embeddings
    only, where it equals sq_l2_mean exactly), inner_mean = (1/M) <y, y'>.
    """
    if metric not in METRICS:
        raise ValueError("unknown metric %r" % (metric,))
    if y.map_id != y2.map_id:
        raise ValueError(
            "embeddings come from different operators: %r vs %r" % (y.map_id, y2.map_id)
        )
    a, b = y.values, y2.values
    if a.shape != b.shape:
        raise ValueError("embedding length mismatch")
    if metric == "inner_mean":
        return float(a @ b) / a.size
    if metric == "hamming_mean":
        if not (y.binary and y2.binary):
            raise ValueError("hamming_mean requires binary {0,1} embeddings")
        return float(np.count_nonzero(a != b)) / a.size
    sq = float(np.sum((a - b) ** 2)) / a.size
    return math.sqrt(sq) if metric == "l2_mean" else sq


def post_quantize(y, bits, S):
    """Uniform scalar quantization of an embedding over [-S, S].

    Step 2^{-B+1} S with midpoint reconstruction; inputs outside [-S, S]
    clamp to the edge cells and are counted in saturation_count.
    """
    if int(bits) != bits or bits < 1:
        raise ValueError("bits must be a positive integer")
    if not S > 0:
        raise ValueError("saturation level S must be positive")
    bits = int(bits)
    levels = 2 ** bits
    step = 2.0 ** (-bits + 1) * S
    v = y.values
    saturated = int(np.count_nonzero((v < -S) | (v >= S)))
    idx = np.clip(np.floor((v + S) / step), 0, levels - 1)
    q = -S + (idx + 0.5) * step
    return EmbeddingVector(
        values=q,
        map_id=y.map_id,
        binary=False,
        quantized_bits=bits,
        saturation_count=saturated,
    )


# ---------------------------------------------------------------------------
# Persistence: little-endian binary container + CSV export

_HEADER = struct.Struct("<4sHHIQ")


def save_embeddings(path, vectors):
    """Write embeddings to the UEMB container; bit-exact round trip.

    Binary {0,1} embeddings are packed 8 per byte (flag bit 0); everything
    else is stored as raw float64.
    """
    vectors = list(vectors)
    if vectors:
        M = vectors[0].values.size
        map_id = vectors[0].map_id
        for v in vectors:
            if v.values.size != M or v.map_id != map_id:
                raise ValueError("all embeddings in one file must share M and map_id")
        packed = all(v.binary for v in vectors)
    else:
        M, map_id, packed = 0, "", False
    flags = _FLAG_PACKED_BITS if packed else 0
    mid = map_id.encode("utf-8")
    if len(mid) > 0xFFFF:
        raise ValueError("map_id too long")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(MAGIC, FORMAT_VERSION, flags, M, len(vectors)))
        f.write(struct.pack("<H", len(mid)))
        f.write(mid)
        for v in vectors:
            if packed:
                f.write(np.packbits(v.values.astype(np.uint8)).tobytes())
            else:
                f.write(v.values.astype("<f8").tobytes())


def load_embeddings(path):
    """Read a UEMB container written by save_embeddings."""
    with open(path, "rb") as f:
        head = f.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise FormatError("truncated header")
        magic, version, flags, M, count = _HEADER.unpack(head)
        if magic != MAGIC:
            raise FormatError("bad magic %r" % (magic,))
        if version != FORMAT_VERSION:
            raise FormatError("unsupported version %d" % version)
        (mid_len,) = struct.unpack("<H", f.read(2))
        map_id = f.read(mid_len).decode("utf-8")
        packed = bool(flags & _FLAG_PACKED_BITS)
        out = []
        per_vec = (M + 7) // 8 if packed else 8 * M
        for _ in range(count):
            raw = f.read(per_vec)
            if len(raw) != per_vec:
                raise FormatError("truncated payload")
            if packed:
                bits = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[:M]
                values = bits.astype(np.float64)
            else:
                values = np.frombuffer(raw, dtype="<f8").astype(np.float64)
            out.append(EmbeddingVector(values=values, map_id=map_id, binary=packed))
        if f.read(1):
            raise FormatError("trailing bytes after payload")
    return out


def export_csv(path, vectors):
    """CSV export: header id,v0..v{M-1}, one row per vector."""
    vectors = list(vectors)
    M = vectors[0].values.size if vectors else 0
    with open(path, "w", newline="") as f:
        f.write("id," + ",".join("v%d" % j for j in range(M)) + "\n")
        for i, v in enumerate(vectors):
            f.write(str(i) + "," + ",".join(repr(float(x)) for x in v.values) + "\n")
