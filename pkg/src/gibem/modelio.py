"""Model files, displacement traces, and VTK surface export.

A model file is a JSON document validated against the schema shipped with
the package (``model.schema.json``).  Parsing produces a fully validated
:class:`~gibem.model.BoundaryModel`; writing one back out and re-parsing it
reproduces every numeric field to full precision, because floats travel
through ``repr`` round-trip formatting on both legs.

Traces sample the solved displacement along a patch edge (or a trimming
curve, which is the same thing in the rebuilt parameter square) and land in
a small CSV.  Surface export writes a legacy ASCII VTK unstructured grid of
quad cells, optionally warped by a multiple of the displacement field.
"""

import importlib.resources
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ModelError, ModelFormatError, GibemError
from .geometry import NurbsPatch, TrimmedPatch, TrimmingCurve
from .kernels import Material
from .model import BoundaryModel, FieldSpacePair, LoadState, SolverConfig
from .solve import evaluate_displacement_many
from .splines import BasisSpace, KnotVector

log = logging.getLogger("gibem.modelio")

_DEFAULT_FIELD_ORDERS = (2, 2)

_VTK_HEADER = "# vtk DataFile Version 3.0"
_VTK_QUAD = 9


def load_schema():
    """The model file schema as a dict."""
    text = (
        importlib.resources.files("gibem")
        .joinpath("model.schema.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def _pointer(error) -> str:
    return "/" + "/".join(str(part) for part in error.absolute_path)


def _validate_document(raw):
    validator = jsonschema.Draft7Validator(load_schema())
    errors = list(validator.iter_errors(raw))
    if errors:
        best = jsonschema.exceptions.best_match(errors)
        raise ModelFormatError(best.message, location=_pointer(best))


def _build_curve(data) -> TrimmingCurve:
    space = BasisSpace(KnotVector(np.asarray(data["knots"], dtype=float)),
                       int(data["degree"]))
    return TrimmingCurve(space, np.asarray(data["control_points"], dtype=float))


def _build_patch(data):
    degrees = data["degrees"]
    space_u = BasisSpace(
        KnotVector(np.asarray(data["knots_u"], dtype=float)), int(degrees[0])
    )
    space_v = BasisSpace(
        KnotVector(np.asarray(data["knots_v"], dtype=float)), int(degrees[1])
    )
    patch = NurbsPatch(
        space_u,
        space_v,
        np.asarray(data["control_points"], dtype=float),
        np.asarray(data["weights"], dtype=float),
        flip_normal=bool(data.get("flip_normal", False)),
    )
    trim = data.get("trim")
    if trim is not None:
        patch = TrimmedPatch(
            patch, _build_curve(trim["curve_a"]), _build_curve(trim["curve_b"])
        )
    return patch


def _field_pair(data, default_orders) -> FieldSpacePair:
    orders = data.get("field_orders", default_orders)
    return FieldSpacePair.from_orders(
        int(orders[0]),
        int(orders[1]),
        interior_u=tuple(data.get("field_interior_u", ())),
        interior_v=tuple(data.get("field_interior_v", ())),
    )


def model_from_dict(raw) -> BoundaryModel:
    """Build a validated model from an already-decoded JSON document."""
    _validate_document(raw)

    try:
        material = Material(**raw["material"])
    except GibemError as exc:
        raise ModelFormatError(str(exc), location="/material") from exc

    load = None
    if "virgin_stress" in raw:
        try:
            load = LoadState(np.asarray(raw["virgin_stress"], dtype=float))
        except GibemError as exc:
            raise ModelFormatError(str(exc), location="/virgin_stress") from exc

    default_orders = tuple(raw.get("field_orders", _DEFAULT_FIELD_ORDERS))
    patches = []
    pairs = []
    for index, entry in enumerate(raw["patches"]):
        try:
            patches.append(_build_patch(entry))
            pairs.append(_field_pair(entry, default_orders))
        except GibemError as exc:
            raise ModelFormatError(
                f"patch {index}: {exc}", location=f"/patches/{index}"
            ) from exc

    config_data = dict(raw.get("config", {}))
    if "excavation_sign" in config_data:
        config_data["excavation_sign"] = float(config_data["excavation_sign"])
    try:
        config = SolverConfig(**config_data)
    except GibemError as exc:
        raise ModelFormatError(str(exc), location="/config") from exc

    try:
        return BoundaryModel(
            patches=patches,
            field_pairs=pairs,
            material=material,
            load=load,
            symmetry_planes=tuple(raw.get("symmetry_planes", ())),
            exterior=bool(raw.get("exterior", False)),
            closed=bool(raw.get("closed", True)),
            config=config,
        )
    except GibemError as exc:
        raise ModelFormatError(str(exc)) from exc


def parse_model(path) -> BoundaryModel:
    """Read and validate a model file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"cannot read {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from exc
    model = model_from_dict(raw)
    log.info("parsed %s: %d patches", path, model.n_patches)
    return model


def _curve_to_dict(curve: TrimmingCurve):
    return {
        "degree": curve.space.degree,
        "knots": curve.space.knots.values.tolist(),
        "control_points": curve.control_points.tolist(),
    }


def _space_interior(space: BasisSpace):
    p = space.degree
    return space.knots.values[p + 1:-(p + 1)].tolist()


def _patch_to_dict(patch, pair: FieldSpacePair):
    base = patch.base if isinstance(patch, TrimmedPatch) else patch
    entry = {
        "degrees": [base.space_u.degree, base.space_v.degree],
        "knots_u": base.space_u.knots.values.tolist(),
        "knots_v": base.space_v.knots.values.tolist(),
        "control_points": base.control_points.tolist(),
        "weights": base.weights.tolist(),
        "flip_normal": base.flip_normal,
        "field_orders": list(pair.orders),
    }
    interior_u = _space_interior(pair.space_u)
    interior_v = _space_interior(pair.space_v)
    if interior_u:
        entry["field_interior_u"] = interior_u
    if interior_v:
        entry["field_interior_v"] = interior_v
    if isinstance(patch, TrimmedPatch):
        entry["trim"] = {
            "curve_a": _curve_to_dict(patch.curve_a),
            "curve_b": _curve_to_dict(patch.curve_b),
        }
    return entry


def model_to_dict(model: BoundaryModel):
    """JSON-ready dict for a model; the inverse of :func:`model_from_dict`."""
    cfg = model.config
    config = {
        "gauss_order": cfg.gauss_order,
        "singular_gauss_order": cfg.singular_gauss_order,
        "quadtree_threshold": cfg.quadtree_threshold,
        "quadtree_max_depth": cfg.quadtree_max_depth,
        "excavation_sign": cfg.excavation_sign,
        "viz_samples": cfg.viz_samples,
    }
    if cfg.merge_tol is not None:
        config["merge_tol"] = cfg.merge_tol
    raw = {
        "material": {
            "youngs_modulus": model.material.youngs_modulus,
            "poisson_ratio": model.material.poisson_ratio,
        },
        "symmetry_planes": list(model.symmetry_planes),
        "exterior": model.exterior,
        "closed": model.closed,
        "config": config,
        "patches": [
            _patch_to_dict(patch, pair)
            for patch, pair in zip(model.patches, model.field_pairs)
        ],
    }
    if model.load is not None:
        raw["virgin_stress"] = model.load.virgin_stress.tolist()
    return raw


def write_model(model: BoundaryModel, path):
    """Serialize a model to a JSON file that parses back identically."""
    raw = model_to_dict(model)
    _validate_document(raw)
    path = Path(path)
    path.write_text(json.dumps(raw, indent=2) + "\n", encoding="utf-8")
    log.info("wrote model %s", path)


_EDGE_SELECTORS = {
    "u0": lambda ts: np.column_stack([np.zeros_like(ts), ts]),
    "u1": lambda ts: np.column_stack([np.ones_like(ts), ts]),
    "v0": lambda ts: np.column_stack([ts, np.zeros_like(ts)]),
    "v1": lambda ts: np.column_stack([ts, np.ones_like(ts)]),
}

# On a trimmed patch the rebuilt parameter square puts the first trimming
# curve at u=0 and the second at u=1, so the trim selectors are aliases
# that additionally insist the patch actually is trimmed.
_TRIM_SELECTORS = {"trim_a": "u0", "trim_b": "u1"}

_COMPONENTS = {"ux": 0, "uy": 1, "uz": 2, "mag": None}


@dataclass(frozen=True)
class TraceRequest:
    """One displacement trace along a patch edge or trimming curve."""

    patch_index: int
    selector: str
    component: str = "uz"
    samples: int = 65

    def __post_init__(self):
        if self.patch_index < 0:
            raise ModelError("trace patch index must be non-negative")
        if self.selector not in _EDGE_SELECTORS and \
                self.selector not in _TRIM_SELECTORS:
            known = sorted(_EDGE_SELECTORS) + sorted(_TRIM_SELECTORS)
            raise ModelError(
                f"unknown trace selector {self.selector!r}; "
                f"expected one of {', '.join(known)}"
            )
        if self.component not in _COMPONENTS:
            raise ModelError(
                f"unknown trace component {self.component!r}; "
                f"expected one of {', '.join(sorted(_COMPONENTS))}"
            )
        if not isinstance(self.samples, int) or self.samples < 2:
            raise ModelError("trace needs at least two samples")


def parse_trace_selector(text: str) -> TraceRequest:
    """Parse ``PATCH:EDGE[:COMPONENT[:SAMPLES]]`` into a request."""
    parts = text.split(":")
    if not 2 <= len(parts) <= 4:
        raise ModelError(
            f"trace selector {text!r} must look like "
            "PATCH:EDGE[:COMPONENT[:SAMPLES]]"
        )
    try:
        patch_index = int(parts[0])
    except ValueError:
        raise ModelError(
            f"trace selector {text!r}: patch index must be an integer"
        ) from None
    kwargs = {}
    if len(parts) >= 3:
        kwargs["component"] = parts[2]
    if len(parts) == 4:
        try:
            kwargs["samples"] = int(parts[3])
        except ValueError:
            raise ModelError(
                f"trace selector {text!r}: sample count must be an integer"
            ) from None
    return TraceRequest(patch_index, parts[1], **kwargs)


def trace_table(model, solution, request: TraceRequest):
    """Sampled positions and component values for one trace.

    Returns (arc_length, positions, values) with samples uniform in the
    curve parameter and arc length accumulated along the sampled polyline.
    """
    if not 0 <= request.patch_index < model.n_patches:
        raise ModelError(
            f"trace patch index {request.patch_index} out of range "
            f"0..{model.n_patches - 1}"
        )
    patch = model.patches[request.patch_index]
    selector = request.selector
    if selector in _TRIM_SELECTORS:
        if not isinstance(patch, TrimmedPatch):
            raise ModelError(
                f"selector {selector!r} needs a trimmed patch, and patch "
                f"{request.patch_index} is not trimmed"
            )
        selector = _TRIM_SELECTORS[selector]
    ts = np.linspace(0.0, 1.0, request.samples)
    params = _EDGE_SELECTORS[selector](ts)
    positions = patch.points_at(params)
    disp = evaluate_displacement_many(
        model, solution, request.patch_index, params
    )
    axis = _COMPONENTS[request.component]
    if axis is None:
        values = np.linalg.norm(disp, axis=1)
    else:
        values = disp[:, axis]
    steps = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(steps)])
    return arc, positions, values


def write_trace(model, solution, request: TraceRequest, path):
    """Write one trace as CSV: arc_length, x, y, z, component."""
    arc, positions, values = trace_table(model, solution, request)
    lines = [f"arc_length,x,y,z,{request.component}"]
    for a, pos, val in zip(arc, positions, values):
        cells = [repr(float(a))]
        cells += [repr(float(c)) for c in pos]
        cells.append(repr(float(val)))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("wrote trace %s (%d samples)", path, request.samples)


def write_vtk(model, solution, path, scale: float = 0.0, samples=None):
    """Write the solved surface as a legacy ASCII VTK unstructured grid.

    Each patch contributes a k-by-k point grid and (k-1)^2 quad cells; the
    displacement field rides along as point data.  ``scale`` warps the
    geometry by that multiple of the displacement (0 leaves it undeformed).
    """
    k = model.config.viz_samples if samples is None else int(samples)
    if k < 2:
        raise ModelError("VTK export needs at least a 2x2 grid per patch")
    ts = np.linspace(0.0, 1.0, k)
    uu, vv = np.meshgrid(ts, ts, indexing="ij")
    params = np.column_stack([uu.ravel(), vv.ravel()])

    points = []
    vectors = []
    cells = []
    offset = 0
    for index, patch in enumerate(model.patches):
        pos = patch.points_at(params)
        disp = evaluate_displacement_many(model, solution, index, params)
        points.append(pos + scale * disp)
        vectors.append(disp)
        for i in range(k - 1):
            for j in range(k - 1):
                a = offset + i * k + j
                cells.append((a, a + k, a + k + 1, a + 1))
        offset += k * k
    points = np.vstack(points)
    vectors = np.vstack(vectors)

    lines = [
        _VTK_HEADER,
        "gibem boundary surface",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {len(points)} double",
    ]
    lines += [" ".join(repr(float(c)) for c in row) for row in points]
    lines.append(f"CELLS {len(cells)} {5 * len(cells)}")
    lines += ["4 " + " ".join(str(c) for c in quad) for quad in cells]
    lines.append(f"CELL_TYPES {len(cells)}")
    lines += [str(_VTK_QUAD)] * len(cells)
    lines.append(f"POINT_DATA {len(points)}")
    lines.append("VECTORS displacement double")
    lines += [" ".join(repr(float(c)) for c in row) for row in vectors]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    log.info("wrote VTK surface %s (%d points)", path, len(points))
