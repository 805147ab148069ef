"""Versioned binary cache for shooting orbits.

Layout: magic + format byte, one JSON header line, raw little-endian
float64 payload (times, states, derivs), and a sha256 trailer over
everything before it.  Floats are stored as raw bits, so a round trip is
bitwise exact.  Shooting is the most expensive stage; the pipeline keys
these files by the orbit-relevant slice of the config hash.
"""

from __future__ import annotations

import hashlib
import json
import os

import numpy as np

from .equilibria import SteadyState
from .errors import ChecksumMismatchError, VersionMismatchError
from .homoclinic import OrbitTrajectory
from .integrators import SampledPath

__all__ = ["write_orbit_cache", "read_orbit_cache", "FORMAT_VERSION"]

MAGIC = b"KSMORBIT\x01\n"
FORMAT_VERSION = 1


def _header_dict(orbit: OrbitTrajectory, meta: dict | None) -> dict:
    n, dim = orbit.path.states.shape
    hdr = {
        "format": FORMAT_VERSION,
        "rows": n,
        "cols": dim,
        "return_distance": orbit.return_distance,
        "initial_return_distance": orbit.initial_return_distance,
        "t_center": orbit.t_center,
        "time_offset_applied": orbit.time_offset_applied,
        "converged": orbit.converged,
        "clip_fraction": orbit.clip_fraction,
        "n_evaluations": orbit.n_evaluations,
        "delta": orbit.delta,
        "steady_residual": orbit.steady.residual_norm,
        "steady_iterations": orbit.steady.newton_iterations,
    }
    if meta:
        hdr["meta"] = meta
    return hdr


def write_orbit_cache(orbit: OrbitTrajectory, path: str, meta: dict | None = None) -> None:
    """Atomic write (temp file + rename); numeric payload is bit-exact."""
    hdr = _header_dict(orbit, meta)
    header = json.dumps(hdr, sort_keys=True).encode() + b"\n"
    blocks = [
        orbit.path.times,
        orbit.path.states,
        orbit.path.derivs,
        orbit.steady.x,
        orbit.direction,
    ]
    payload = b"".join(np.ascontiguousarray(b, dtype="<f8").tobytes() for b in blocks)
    body = MAGIC + header + payload
    digest = hashlib.sha256(body).hexdigest()
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(body)
        fh.write(b"sha256:" + digest.encode() + b"\n")
    os.replace(tmp, path)


def read_orbit_cache(path: str) -> tuple[OrbitTrajectory, dict]:
    """Read and verify a cache file; returns (orbit, meta)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(MAGIC):
        raise VersionMismatchError(f"{path}: not an orbit cache or unsupported version")
    trailer_at = raw.rfind(b"sha256:")
    if trailer_at < 0 or not raw.endswith(b"\n"):
        raise ChecksumMismatchError(f"{path}: checksum trailer missing (truncated?)")
    body = raw[:trailer_at]
    stored = raw[trailer_at + len(b"sha256:") : -1].decode(errors="replace")
    if hashlib.sha256(body).hexdigest() != stored:
        raise ChecksumMismatchError(f"{path}: checksum mismatch (truncated or corrupted)")
    nl = body.index(b"\n", len(MAGIC))
    hdr = json.loads(body[len(MAGIC) : nl])
    if hdr.get("format") != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format {hdr.get('format')} != {FORMAT_VERSION}")
    n, dim = hdr["rows"], hdr["cols"]
    need = (n + 2 * n * dim + dim + dim) * 8
    payload = body[nl + 1 :]
    if len(payload) != need:
        raise ChecksumMismatchError(f"{path}: payload size {len(payload)} != expected {need}")
    buf = np.frombuffer(payload, dtype="<f8")
    off = 0
    times = buf[off : off + n].copy()
    off += n
    states = buf[off : off + n * dim].reshape(n, dim).copy()
    off += n * dim
    derivs = buf[off : off + n * dim].reshape(n, dim).copy()
    off += n * dim
    steady_x = buf[off : off + dim].copy()
    off += dim
    direction = buf[off : off + dim].copy()
    steady = SteadyState(steady_x, hdr["steady_residual"], hdr["steady_iterations"])
    orbit = OrbitTrajectory(
        path=SampledPath(times, states, derivs),
        steady=steady,
        return_distance=hdr["return_distance"],
        initial_return_distance=hdr["initial_return_distance"],
        t_center=hdr["t_center"],
        time_offset_applied=hdr["time_offset_applied"],
        converged=hdr["converged"],
        clip_fraction=hdr["clip_fraction"],
        n_evaluations=hdr["n_evaluations"],
        delta=hdr["delta"],
        direction=direction,
    )
    return orbit, hdr.get("meta", {})
