"""Text formats for tensors, sample sets, traces, configs and run manifests.

Dense tensors::

    dims: n1 n2 ... nd
    <one value per line, column-major order>

TT tensors::

    tt-ranks: 1 r1 ... 1
    dims: n1 ... nd
    core 1: r0 n1 r1
    <values of core 1, column-major>
    ...

Sample sets are CSV with 1-based indices and a comment header
``# dims: n1 ... nd, ratio: rho``. Configs and manifests are flat
``key = value`` text; lists are comma separated.
"""

import csv
import os
from dataclasses import fields

import numpy as np

from .completion import CGTrace
from .rank import RRAMConfig, RRAMTrace
from .samples import SampleSet
from .tt import TTTensor

_FMT = "%.17g"


def _ints(text):
    return tuple(int(t) for t in text.replace(",", " ").split())


def _read_header(line, key):
    head, sep, rest = line.partition(":")
    if not sep or head.strip() != key:
        raise ValueError(f"expected '{key}:' header, got {line.strip()!r}")
    return rest


# ---------------------------------------------------------------------------
# tensors
# ---------------------------------------------------------------------------


def write_dense(path, a):
    a = np.asarray(a, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("dims: " + " ".join(str(n) for n in a.shape) + "\n")
        np.savetxt(fh, a.reshape(-1, order="F"), fmt=_FMT)


def read_dense(path):
    with open(path) as fh:
        dims = _ints(_read_header(fh.readline(), "dims"))
        vals = np.loadtxt(fh, dtype=np.float64, ndmin=1)
    if vals.size != int(np.prod(dims)):
        raise ValueError(f"expected {int(np.prod(dims))} values, found {vals.size}")
    return vals.reshape(dims, order="F")


def write_tt(path, x):
    full_r = (1,) + tuple(x.ranks) + (1,)
    with open(path, "w") as fh:
        fh.write("tt-ranks: " + " ".join(str(r) for r in full_r) + "\n")
        fh.write("dims: " + " ".join(str(n) for n in x.shape) + "\n")
        for k, c in enumerate(x.cores):
            fh.write(f"core {k + 1}: " + " ".join(str(s) for s in c.shape) + "\n")
            np.savetxt(fh, c.reshape(-1, order="F"), fmt=_FMT)


def read_tt(path):
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    full_r = _ints(_read_header(lines[0], "tt-ranks"))
    dims = _ints(_read_header(lines[1], "dims"))
    if len(full_r) != len(dims) + 1:
        raise ValueError("rank and dimension headers disagree")
    cores = []
    pos = 2
    for k, n in enumerate(dims):
        shape = _ints(_read_header(lines[pos], f"core {k + 1}"))
        if shape != (full_r[k], n, full_r[k + 1]):
            raise ValueError(f"core {k + 1} has shape {shape}")
        size = int(np.prod(shape))
        vals = np.array([float(v) for v in lines[pos + 1 : pos + 1 + size]])
        if vals.size != size:
            raise ValueError(f"core {k + 1} is truncated")
        cores.append(vals.reshape(shape, order="F"))
        pos += 1 + size
    return TTTensor(cores)


# ---------------------------------------------------------------------------
# samples
# ---------------------------------------------------------------------------


def write_samples(path, s):
    with open(path, "w", newline="") as fh:
        fh.write("# dims: " + " ".join(str(n) for n in s.shape) + f", ratio: {s.ratio:.17g}\n")
        w = csv.writer(fh)
        for idx, v in zip(s.indices, s.values):
            w.writerow([*(int(i) + 1 for i in idx), _FMT % v])


def read_samples(path):
    with open(path, newline="") as fh:
        head = fh.readline()
        if not head.startswith("#"):
            raise ValueError("missing sample-set header")
        dims_part = head[1:].split(",")[0]
        dims = _ints(_read_header(dims_part, "dims"))
        rows = [r for r in csv.reader(fh) if r]
    d = len(dims)
    if not rows:
        return SampleSet(np.zeros((0, d), dtype=np.int64), np.zeros(0), dims)
    arr = np.array(rows, dtype=object)
    idx = arr[:, :d].astype(np.int64) - 1
    vals = arr[:, d].astype(np.float64)
    return SampleSet(idx, vals, dims)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------


def _ranks_str(r):
    return "-".join(str(int(v)) for v in r)


def write_cg_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CGTrace.COLUMNS)
        for it, f, g, ms in trace.rows:
            w.writerow([it, repr(float(f)), repr(float(g)), repr(float(ms))])


def read_cg_trace(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        if tuple(next(r)) != CGTrace.COLUMNS:
            raise ValueError("unexpected trace header")
        rows = [(int(a), float(b), float(c), float(d)) for a, b, c, d in r]
    return CGTrace(rows=rows)


def write_rram_trace(path, trace):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RRAMTrace.COLUMNS)
        for outer, action, ranks, fo, fg, inner, ms in trace.rows:
            w.writerow(
                [outer, action, _ranks_str(ranks), repr(float(fo)), repr(float(fg)), inner,
                 repr(float(ms))]
            )


def read_rram_trace(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        if tuple(next(r)) != RRAMTrace.COLUMNS:
            raise ValueError("unexpected trace header")
        rows = [
            (int(o), a, tuple(int(v) for v in rk.split("-")), float(fo), float(fg), int(it),
             float(ms))
            for o, a, rk, fo, fg, it, ms in r
        ]
    return RRAMTrace(rows=rows)


def write_inner_series(path, trace):
    """Concatenated CG series of an :class:`RRAMTrace`."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("inner_iters_cum", "f_omega_rel", "grad_norm", "wall_ms"))
        for it, f, g, ms in trace.inner:
            w.writerow([it, repr(float(f)), repr(float(g)), repr(float(ms))])


# ---------------------------------------------------------------------------
# key-value config and manifest
# ---------------------------------------------------------------------------

_LIST_KEYS = {"r_max", "s_max"}


def parse_config(text):
    """Parse ``key = value`` lines into a dict of typed values.

    Blank lines and ``#`` comments are ignored. ``:`` is accepted in place
    of ``=``. Values are converted to int, float, or a tuple of ints for
    comma lists; other values are kept as strings.
    """
    out = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, val = line.split(sep, 1)
                break
        else:
            raise ValueError(f"cannot parse config line {raw!r}")
        key, val = key.strip(), val.strip()
        out[key] = _convert(key, val)
    return out


def _convert(key, val):
    if key in _LIST_KEYS or "," in val:
        parts = [p for p in val.replace(",", " ").split()]
        nums = tuple(int(p) for p in parts)
        return nums[0] if len(nums) == 1 and "," not in val else nums
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val


def read_config(path):
    """Load an :class:`RRAMConfig` from a key-value file; unknown keys are rejected."""
    with open(path) as fh:
        vals = parse_config(fh.read())
    known = {f.name for f in fields(RRAMConfig)}
    extra = set(vals) - known
    if extra:
        raise ValueError(f"unknown config keys: {sorted(extra)}")
    return RRAMConfig(**vals)


def format_value(v):
    if isinstance(v, (tuple, list, np.ndarray)):
        return ",".join(format_value(a) for a in v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_manifest(path, params):
    with open(path, "w") as fh:
        for k in sorted(params):
            fh.write(f"{k} = {format_value(params[k])}\n")


def read_manifest(path):
    with open(path) as fh:
        return parse_config(fh.read())


def ensure_dir(path):
    os.makedirs(path, exist_ok=True)
    return path
