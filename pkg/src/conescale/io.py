"""JSON schemas, deterministic serialization and run manifests.

Floats are written with Python's shortest round-trip representation, so
parse(emit(x)) reproduces every number bit for bit.  Non-finite values use
the ``Infinity``/``NaN`` tokens that Python's json module reads back.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .barriers import ScalingOperator
from .cones import BlockSlice, ConeDescriptor
from .encoding import EncodedPolytope
from .errors import SchemaError
from .polytopes import PolytopeInstance
from .scaling import Factorization, ScalingCertificate


def _plain(obj):
    """Convert numpy containers and scalars to plain Python for json."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def loads(text: str, source: str = "<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}", source) from None


def read_json(path) -> Any:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError(f"cannot read file: {exc.strerror}", str(path)) from None
    return loads(text, str(path))


def write_atomic(path, text: str) -> str:
    """Write text via a temporary file and rename; returns the sha256 of the bytes."""
    path = Path(path)
    data = text.encode()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# field-level helpers


def _get(data: dict, key: str, path: str):
    if not isinstance(data, dict):
        raise SchemaError("expected an object", path)
    if key not in data:
        raise SchemaError("missing field", f"{path}.{key}" if path else key)
    return data[key]


def _matrix(rows, path: str, width: int | None = None) -> np.ndarray:
    if not isinstance(rows, list):
        raise SchemaError("expected a list of vectors", path)
    out = []
    for i, r in enumerate(rows):
        p = f"{path}[{i}]"
        if not isinstance(r, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in r):
            raise SchemaError("expected a list of numbers", p)
        if width is not None and len(r) != width:
            raise SchemaError(f"has length {len(r)}; ambient dimension is {width}", p)
        out.append([float(x) for x in r])
    if width is None:
        return np.array(out, dtype=float)
    return np.array(out, dtype=float).reshape(len(out), width)


def _int_rows(rows, path: str) -> list[list[int]]:
    if not isinstance(rows, list):
        raise SchemaError("expected a list of integer vectors", path)
    out = []
    for i, r in enumerate(rows):
        if not isinstance(r, list) or not all(isinstance(x, int) and not isinstance(x, bool) for x in r):
            raise SchemaError("expected a list of integers", f"{path}[{i}]")
        out.append([int(x) for x in r])
    return out


# ---------------------------------------------------------------------------
# cone and factorization


def parse_cone(data, path: str = "cone") -> ConeDescriptor:
    return ConeDescriptor.from_dict(data, path)


def factorization_to_dict(fac: Factorization) -> dict:
    out = {"cone": fac.cone.to_dict(), "A": fac.A.tolist(), "B": fac.B.tolist()}
    if fac.labels is not None:
        out["labels"] = fac.labels
    return out


def parse_factorization(data, path: str = "factorization", cone: ConeDescriptor | None = None) -> Factorization:
    if cone is None:
        cone = parse_cone(_get(data, "cone", path), f"{path}.cone")
    A = _matrix(_get(data, "A", path), f"{path}.A", cone.dim)
    B = _matrix(_get(data, "B", path), f"{path}.B", cone.dim)
    labels = data.get("labels")
    if labels is not None:
        if not isinstance(labels, dict):
            raise SchemaError("expected an object", f"{path}.labels")
        for key in ("V", "F"):
            if key in labels:
                labels = dict(labels)
                labels[key] = _int_rows(labels[key], f"{path}.labels.{key}")
    return Factorization(cone, A, B, labels)


# ---------------------------------------------------------------------------
# certificate


def operator_to_dict(L: ScalingOperator) -> dict:
    return {
        "parts": [
            {"offset": s.offset, "length": s.length, "kind": kind, "forward": np.asarray(fwd).tolist(),
             "inverse": np.asarray(inv).tolist()}
            for s, kind, fwd, inv in L.parts
        ]
    }


def parse_operator(data, cone: ConeDescriptor, path: str = "L") -> ScalingOperator:
    parts = []
    raw = _get(data, "parts", path)
    if not isinstance(raw, list):
        raise SchemaError("expected a list", f"{path}.parts")
    for i, part in enumerate(raw):
        p = f"{path}.parts[{i}]"
        kind = _get(part, "kind", p)
        if kind not in ("diag", "dense", "congruence"):
            raise SchemaError(f"unknown kind {kind!r}", f"{p}.kind")
        off, length = int(_get(part, "offset", p)), int(_get(part, "length", p))
        fwd = np.asarray(_get(part, "forward", p), dtype=float)
        inv = np.asarray(_get(part, "inverse", p), dtype=float)
        parts.append((BlockSlice(i, off, length), kind, fwd, inv))
    return ScalingOperator(cone, parts)


_CERT_SCALARS = ("theta", "delta", "t_bar", "max_primal_norm_sq", "max_dual_norm_sq", "inner_product_max_error",
                 "kkt_residual", "sym2_value", "degenerate", "blockwise")


def certificate_to_dict(cert: ScalingCertificate, cone: ConeDescriptor) -> dict:
    out = {k: getattr(cert, k) for k in _CERT_SCALARS}
    out.update(
        cone=cone.to_dict(),
        L=operator_to_dict(cert.L),
        w_bar=None if cert.w_bar is None else cert.w_bar.tolist(),
        lam=None if cert.lam is None else np.asarray(cert.lam).tolist(),
        mu=None if cert.mu is None else np.asarray(cert.mu).tolist(),
        f_c=cert.f_c,
        bound=cert.bound,
    )
    return out


def parse_certificate(data, path: str = "certificate") -> tuple[ScalingCertificate, ConeDescriptor]:
    cone = parse_cone(_get(data, "cone", path), f"{path}.cone")
    kw = {k: _get(data, k, path) for k in _CERT_SCALARS}
    arr = {k: (None if data.get(k) is None else np.asarray(data[k], dtype=float)) for k in ("w_bar", "lam", "mu")}
    L = parse_operator(_get(data, "L", path), cone, f"{path}.L")
    return ScalingCertificate(L=L, **kw, **arr), cone


# ---------------------------------------------------------------------------
# polytope instances and encodings


def parse_instance(data, path: str = "instance") -> PolytopeInstance:
    family = _get(data, "family", path)
    if family not in ("zero-one", "cyclic"):
        raise SchemaError(f"unknown family {family!r}", f"{path}.family")
    X = _get(data, "X", path)
    return PolytopeInstance(
        d=int(_get(data, "d", path)),
        V=tuple(tuple(v) for v in _int_rows(_get(data, "V", path), f"{path}.V")),
        F=tuple(tuple(f) for f in _int_rows(_get(data, "F", path), f"{path}.F")),
        M=int(_get(data, "M", path)),
        family=family,
        X=tuple(tuple(x) if isinstance(x, list) else x for x in X),
        t=data.get("t"),
        M_observed=int(data.get("M_observed", 0)),
        separation_violations=tuple(tuple(p) for p in data.get("separation_violations", [])),
    )


def parse_encoding(data, path: str = "encoding") -> EncodedPolytope:
    cone = parse_cone(_get(data, "cone", path), f"{path}.cone")
    F = _int_rows(_get(data, "F", path), f"{path}.F")
    coords = _int_rows(_get(data, "net_coords", path), f"{path}.net_coords")
    if len(F) != len(coords):
        raise SchemaError("F and net_coords differ in length", path)
    for i, c in enumerate(coords):
        if len(c) != cone.dim:
            raise SchemaError(f"has length {len(c)}; ambient dimension is {cone.dim}", f"{path}.net_coords[{i}]")
    return EncodedPolytope(
        cone=cone,
        d=int(_get(data, "d", path)),
        F=tuple(tuple(f) for f in F),
        coords=tuple(tuple(c) for c in coords),
        selected=tuple(int(i) for i in _get(data, "selected", path)),
        rank=int(_get(data, "rank", path)),
        rho=float(_get(data, "rho", path)),
        eps=float(_get(data, "eps", path)),
        M=int(_get(data, "M", path)),
        f_c=float(_get(data, "f_c", path)),
        rho_variant=str(data.get("rho_variant", "d+1")),
    )


def parse_points(data, path: str = "candidates") -> list[tuple[int, ...]]:
    if isinstance(data, dict):
        data = _get(data, "points", path)
        path = f"{path}.points"
    return [tuple(r) for r in _int_rows(data, path)]


# ---------------------------------------------------------------------------
# manifest


@dataclass
class RunManifest:
    command: str
    argv: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    options: dict[str, Any] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    wall_time: float = 0.0
    exit_code: int = 0
    started: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self, exit_code: int = 0) -> dict:
        self.wall_time = time.perf_counter() - self.started
        self.exit_code = exit_code
        out = asdict(self)
        out.pop("started")
        return out
