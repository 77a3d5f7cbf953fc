"""L2 errors against exact or reference fields, cost functional, EOC tables.

A reference may be a closed-form callable or a discrete field on a nested
structured mesh.  Errors between two discrete fields are integrated on the
finer of the two meshes; each fine element (face) sits inside exactly one
coarse element (face), found by index arithmetic, so the integrand is a
polynomial on every integration cell and the quadrature is exact.
"""
import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import MeshTopologyError, parent_elements, parent_faces
from .quadrature import quadrature_rule
from .solution import DiscreteField, TraceField

ERROR_FIELDS = ("q", "p", "y", "z", "u")
CHUNK = 8192
EXTRA_ORDER = 4  # quadrature margin for closed-form references


def _values(ref, x):
    """Evaluate a callable reference at physical points ``x`` (..., d)."""
    v = np.asarray(ref(x), dtype=float)
    if v.shape in (x.shape, x.shape[:-1]):
        return v
    return np.broadcast_to(v, x.shape[:-1])  # constants


def _volume_points(mesh, order, elements):
    rule = quadrature_rule(mesh.dim, order)
    amap = mesh.element_map
    x = amap.origin[elements][:, None, :] + np.einsum("nij,mj->nmi", amap.jac[elements], rule.points)
    w = np.abs(amap.det[elements])[:, None] * rule.weights[None, :]
    return rule.points, x, w


def _sq_sum(diff, w):
    d2 = diff ** 2
    if d2.ndim == 3:
        d2 = d2.sum(axis=2)
    return float(np.sum(d2 * w))


def _check_nested(a, b):
    if a.lower is None or b.lower is None or not (
            np.allclose(a.lower, b.lower) and np.allclose(a.upper, b.upper)):
        raise MeshTopologyError("reference mesh does not cover the same box")


def l2_error_volume(fld, reference=None, order=None):
    """``||fld - reference||_{L2}`` over the domain.

    Parameters
    ----------
    fld : DiscreteField
    reference : callable, DiscreteField or None
        Callable references take points of shape (..., d) and return
        values of shape (...) or (..., d).  ``None`` means zero.
    order : int, optional
        Quadrature order.  Defaults to exact for polynomial pairs and
        ``2 * degree + 4`` for callables.
    """
    mesh = fld.mesh
    if isinstance(reference, DiscreteField):
        same = reference.mesh is mesh
        fine, coarse = (reference, fld) if reference.mesh.n_elements >= mesh.n_elements else (fld, reference)
        if not same:
            _check_nested(fine.mesh, coarse.mesh)
            parents = parent_elements(fine.mesh, coarse.mesh)
        order = order or 2 * max(fine.degree, coarse.degree)
        total = 0.0
        for start in range(0, fine.mesh.n_elements, CHUNK):
            sel = np.arange(start, min(start + CHUNK, fine.mesh.n_elements))
            ref_pts, x, w = _volume_points(fine.mesh, order, sel)
            vf = fine.evaluate(sel, ref_pts)
            vc = coarse.evaluate(sel, ref_pts) if same else coarse.evaluate_physical(parents[sel], x)
            total += _sq_sum(vf - vc, w)
        return math.sqrt(total)

    order = order or (2 * fld.degree + (EXTRA_ORDER if reference is not None else 0))
    total = 0.0
    for start in range(0, mesh.n_elements, CHUNK):
        sel = np.arange(start, min(start + CHUNK, mesh.n_elements))
        ref_pts, x, w = _volume_points(mesh, order, sel)
        v = fld.evaluate(sel, ref_pts)
        if reference is not None:
            v = v - _values(reference, x)
        total += _sq_sum(v, w)
    return math.sqrt(total)


def _face_points(mesh, order, faces):
    rule = quadrature_rule(mesh.dim - 1, order)
    fmap = mesh.face_map
    x = fmap.origin[faces][:, None, :] + np.einsum("nij,mj->nmi", fmap.jac[faces], rule.points)
    w = fmap.measure_scale[faces][:, None] * rule.weights[None, :]
    return rule.points, x, w


def l2_error_boundary(fld, reference=None, order=None):
    """``||fld - reference||_{L2(boundary)}`` for a boundary :class:`TraceField`."""
    mesh = fld.mesh
    if isinstance(reference, TraceField):
        if reference.mesh is mesh:
            diff = TraceField(mesh, fld.coeffs - reference.coeffs, fld.degree, fld.faces)
            return l2_error_boundary(diff, None, order)
        fine, coarse = (reference, fld) if reference.mesh.n_elements >= mesh.n_elements else (fld, reference)
        _check_nested(fine.mesh, coarse.mesh)
        parents = parent_faces(fine.mesh, coarse.mesh, fine.faces)
        if np.any(parents < 0):
            raise MeshTopologyError("boundary faces are not nested")
        order = order or 2 * max(fine.degree, coarse.degree)
        ref_pts, x, w = _face_points(fine.mesh, order, fine.faces)
        diff = fine.evaluate(fine.faces, ref_pts) - coarse.evaluate_physical(parents, x)
        return math.sqrt(_sq_sum(diff, w))

    order = order or (2 * fld.degree + (EXTRA_ORDER if reference is not None else 0))
    ref_pts, x, w = _face_points(mesh, order, fld.faces)
    v = fld.evaluate(fld.faces, ref_pts)
    if reference is not None:
        v = v - _values(reference, x)
    return math.sqrt(_sq_sum(v, w))


def cost_functional(y_h, u_h, y_d, gamma, order=None):
    """``1/2 ||y_h - y_d||^2 + gamma/2 ||u_h||^2_boundary``."""
    ey = l2_error_volume(y_h, y_d, order)
    eu = l2_error_boundary(u_h, None, order)
    return 0.5 * ey ** 2 + 0.5 * gamma * eu ** 2


def compute_eoc(errors, hs):
    """Experimental orders ``log(e[i-1]/e[i]) / log(h[i-1]/h[i])``.

    The first entry is NaN (no predecessor).  A zero error gives NaN rather
    than raising.
    """
    e = np.asarray(errors, dtype=float)
    h = np.asarray(hs, dtype=float)
    if e.shape != h.shape:
        raise ValueError("errors and hs must have equal length")
    if np.any(np.diff(h) >= 0):
        raise ValueError("mesh sizes must be strictly decreasing")
    out = np.full(e.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        for i in range(1, len(e)):
            if e[i - 1] > 0 and e[i] > 0:
                out[i] = math.log(e[i - 1] / e[i]) / math.log(h[i - 1] / h[i])
    return out


def _fmt(x):
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


@dataclass
class ConvergenceReport:
    """Errors per level and the derived orders.

    ``errors`` maps each of ``q, p, y, z, u`` to a list aligned with
    ``levels``.  ``contaminated`` marks levels whose reference is close
    enough that the error is biased (finest study level).
    """

    levels: list
    hs: list
    errors: dict
    metadata: dict = field(default_factory=dict)
    contaminated: list = field(default_factory=list)

    def __post_init__(self):
        self.levels = [int(v) for v in self.levels]
        self.hs = [float(v) for v in self.hs]
        self.errors = {k: [float(v) for v in vals] for k, vals in self.errors.items()}
        if not self.contaminated:
            self.contaminated = [False] * len(self.levels)
        self.contaminated = [bool(c) for c in self.contaminated]

    @property
    def fields(self):
        return [k for k in ERROR_FIELDS if k in self.errors] + \
            [k for k in self.errors if k not in ERROR_FIELDS]

    @property
    def orders(self):
        return {k: compute_eoc(v, self.hs) for k, v in self.errors.items()}

    def final_orders(self):
        """Order between the last two levels, per field."""
        return {k: float(v[-1]) if len(v) > 1 else math.nan for k, v in self.orders.items()}

    # -- serialization ------------------------------------------------------
    def to_csv(self):
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}={self.metadata[key]}\n")
        w = csv.writer(buf, lineterminator="\n")
        header = ["level", "h"]
        for k in self.fields:
            header += [f"err_{k}", f"order_{k}"]
        header.append("contaminated")
        w.writerow(header)
        orders = self.orders
        for i, lev in enumerate(self.levels):
            row = [str(lev), _fmt(self.hs[i])]
            for k in self.fields:
                row += [_fmt(self.errors[k][i]), _fmt(orders[k][i])]
            row.append("1" if self.contaminated[i] else "0")
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        meta, body = {}, []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, val = line[2:].partition("=")
                meta[key] = val
            elif line.strip():
                body.append(line)
        rows = list(csv.reader(body))
        header, rows = rows[0], rows[1:]
        col = {name: i for i, name in enumerate(header)}
        names = [h[4:] for h in header if h.startswith("err_")]
        report = cls(
            levels=[int(r[col["level"]]) for r in rows],
            hs=[float(r[col["h"]]) for r in rows],
            errors={k: [float(r[col["err_" + k]]) for r in rows] for k in names},
            metadata=meta,
            contaminated=[r[col["contaminated"]] == "1" for r in rows] if "contaminated" in col else [],
        )
        # stored orders must agree with the recomputed ones
        for k in names:
            stored = np.array([float(r[col["order_" + k]]) for r in rows])
            fresh = report.orders[k]
            ok = np.isnan(stored) == np.isnan(fresh)
            ok &= np.isnan(stored) | (np.abs(stored - np.nan_to_num(fresh)) <= 1e-12 * np.maximum(1, np.abs(stored)))
            if not ok.all():
                raise ValueError(f"stored orders for {k!r} disagree with the errors")
        return report

    def to_markdown(self):
        """Aligned text table: one error row and one order row per field."""
        labels = {"q": "||q-q_h||", "p": "||p-p_h||", "y": "||y-y_h||", "z": "||z-z_h||",
                  "u": "||u-u_h||_bdy"}
        head = ["level"] + [str(v) + ("*" if c else "") for v, c in zip(self.levels, self.contaminated)]
        rows = [["h"] + [f"{h:.4e}" for h in self.hs]]
        orders = self.orders
        for k in self.fields:
            rows.append([labels.get(k, k)] + [f"{e:.4e}" for e in self.errors[k]])
            rows.append(["order"] + ["-" if math.isnan(o) else f"{o:.4f}" for o in orders[k]])
        widths = [max(len(r[j]) for r in [head] + rows) for j in range(len(head))]

        def line(cells):
            return "| " + " | ".join(c.ljust(wd) for c, wd in zip(cells, widths)) + " |"

        out = [line(head), "|" + "|".join("-" * (wd + 2) for wd in widths) + "|"]
        out += [line(r) for r in rows]
        if any(self.contaminated):
            out.append("")
            out.append("* error measured against a reference only slightly finer; order biased.")
        for key in sorted(self.metadata):
            out.append(f"<!-- {key}={self.metadata[key]} -->")
        return "\n".join(out) + "\n"

    def __eq__(self, other):
        if not isinstance(other, ConvergenceReport):
            return NotImplemented
        return (self.levels == other.levels and self.hs == other.hs
                and self.errors == other.errors and self.contaminated == other.contaminated
                and {k: str(v) for k, v in self.metadata.items()}
                == {k: str(v) for k, v in other.metadata.items()})
