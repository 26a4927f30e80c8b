"""Command-line front end.

Exit codes: 0 success, 1 malformed input or library error, 2 validation
counterexample (witness written), 3 solver non-convergence (best iterate
written).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import io as sio
from . import rational as rq
from .cost import (
    Anchor,
    GridFunction,
    c_transform_body_to_skeleton,
    c_transform_skeleton_to_body,
    closed_form_field,
    fekete_field,
    project_to_Pc,
)
from .energy import DEFAULT_SCHEDULE, energy_consistency
from .errors import MalformedInput, NonConvergence, SkelotError
from .models import Model, ModelSpec, instantiate
from .okounkov import (
    body_measure,
    body_volume_check,
    central_box,
    gradient_semigroup,
    integer_points_check,
    okounkov_body,
    parse_body_scheme,
)
from .skeleton import SkeletonPoint, build_skeleton, lebesgue_measure, node_grid
from .tropical import BasisFamily, basis_from_dict, check_valuative_independence, wall_complex

EXIT_OK, EXIT_INPUT, EXIT_COUNTEREXAMPLE, EXIT_NONCONVERGENCE = 0, 1, 2, 3

DEFAULTS = {
    "fekete.l_max": 12,
    "grid.skeleton_h": 1 / 64,
    "grid.body_h": "1/8",
    "tol.transform": 1e-10,
    "solver.tol": 1e-6,
    "solver.max_iter": 5000,
    "quadrature.h": None,
    "energy.degree_schedule": list(DEFAULT_SCHEDULE),
    "comparison.points": 50,
    "comparison.collar": True,
    "measure.density": None,
}


@dataclass
class RunConfig:
    command: str
    model: str | None = None
    basis: str | None = None
    degree: int | None = None
    l_max: int | None = None
    anchor: str | None = None
    grid_h: float | None = None
    body_scheme: str = "lattice:8"
    tol: float | None = None
    max_iter: int | None = None
    seed: int = 0
    out: Path = Path("out")
    svg: bool = False
    settings: dict = field(default_factory=dict)

    def get(self, key: str):
        return self.settings.get(key, DEFAULTS.get(key))

    def meta(self) -> dict:
        return {"command": self.command, "seed": self.seed}


def _flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and key != "measure.density" and not key.startswith("measure.density"):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    doc = sio.read_json(path)
    if not isinstance(doc, dict):
        raise MalformedInput("config must be a JSON object", "$")
    flat = _flatten(doc)
    unknown = sorted(set(flat) - set(DEFAULTS))
    if unknown:
        raise MalformedInput(f"unknown config keys {unknown}", "$")
    return flat


def parse_args(argv: Sequence[str] | None = None) -> RunConfig:
    p = argparse.ArgumentParser(prog="skelot", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["validate", "okounkov", "cost", "energy", "solve", "report"])
    p.add_argument("--model", help="inline spec such as 'monomial:n=2' or a JSON file")
    p.add_argument("--basis", help="basis JSON file (one degree, or {skeleton, bases})")
    p.add_argument("--degree", type=int)
    p.add_argument("--lmax", type=int)
    p.add_argument("--anchor", help="'face:c1,c2' with rational or decimal coordinates")
    p.add_argument("--grid-h", type=float)
    p.add_argument("--body-scheme", default="lattice:8")
    p.add_argument("--tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    p.add_argument("--config", help="JSON file with dotted or nested keys")
    p.add_argument("--svg", action="store_true", help="also draw figures (always on for report)")
    a = p.parse_args(argv)
    cfg = RunConfig(
        a.command, a.model, a.basis, a.degree, a.lmax, a.anchor, a.grid_h, a.body_scheme, a.tol, a.max_iter,
        a.seed, Path(a.out), a.svg or a.command == "report", _load_config(a.config),
    )
    for name in ("tol", "grid_h"):
        v = getattr(cfg, name)
        if v is not None and v <= 0:
            raise MalformedInput(f"--{name.replace('_', '-')} must be positive", name)
    if cfg.l_max is not None and cfg.l_max < 1:
        raise MalformedInput("--lmax must be at least 1", "lmax")
    if cfg.max_iter is not None and cfg.max_iter < 0:
        raise MalformedInput("--max-iter must be nonnegative", "max_iter")
    return cfg


# -- model loading ------------------------------------------------------------------------


def _pick(flag, setting):
    return setting if flag is None else flag


def _l_max(cfg: RunConfig) -> int:
    return int(_pick(cfg.l_max, cfg.get("fekete.l_max")))


def _model_from_file(path: str, cfg: RunConfig) -> Model:
    doc = sio.read_json(path)
    if not isinstance(doc, dict):
        raise MalformedInput("model file must be a JSON object", "$")
    if "kind" in doc:
        return instantiate(doc, cfg.l_max, cfg.seed)
    skel = build_skeleton(sio.require(doc, "skeleton", dict))
    bases = [basis_from_dict(b, skel) for b in sio.require(doc, "bases", list)]
    fam = BasisFamily.from_bases(skel, bases, doc.get("Ln"), Path(path).stem)
    face = skel.top_faces[0]
    poly = skel.faces[face].polytope
    y = SkeletonPoint(face, tuple(poly.interior_point()))
    return Model(ModelSpec("file", {"path": str(path)}, fam.l_max), skel, fam, rq.to_fraction(doc.get("Ln", 0)), None, y)


def load_model(cfg: RunConfig) -> Model:
    if cfg.model is None:
        if cfg.basis is None:
            raise MalformedInput("either --model or --basis is required", "--model")
        return _model_from_file(cfg.basis, cfg)
    if Path(cfg.model).suffix == ".json" or Path(cfg.model).is_file():
        return _model_from_file(cfg.model, cfg)
    return instantiate(cfg.model, cfg.l_max, cfg.seed)


def load_bases(cfg: RunConfig, model: Model | None) -> tuple[Any, list]:
    """Skeleton and bases named by --basis, or the model's bases up to l_max."""
    if cfg.basis:
        doc = sio.read_json(cfg.basis)
        if isinstance(doc, dict) and "skeleton" in doc:
            skel = build_skeleton(doc["skeleton"])
            raw = doc.get("bases", [doc] if "sections" in doc else [])
        elif model is not None:
            skel = model.skeleton
            raw = doc if isinstance(doc, list) else [doc]
        else:
            raise MalformedInput("basis file without a skeleton needs --model", "$.skeleton")
        bases = [basis_from_dict(b, skel) for b in raw]
        if cfg.degree is not None:
            bases = [b for b in bases if b.degree == cfg.degree]
        return skel, bases
    degrees = [cfg.degree] if cfg.degree else range(1, model.family.l_max + 1)
    return model.skeleton, [model.family.basis(l) for l in degrees]


def parse_anchor(text: str | None, model: Model) -> SkeletonPoint:
    if not text:
        return model.default_anchor
    face, sep, coords = text.partition(":")
    if not sep:
        raise MalformedInput("anchor must look like 'face:c1,c2'", "--anchor")
    try:
        vals = tuple(rq.to_fraction(c.strip()) for c in coords.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise MalformedInput(f"bad anchor coordinates: {exc}", "--anchor") from exc
    if face not in model.skeleton.faces or len(vals) != model.n:
        raise MalformedInput(f"anchor {text!r} does not match the skeleton", "--anchor")
    return SkeletonPoint(face, vals)


def cost_field(model: Model, y: SkeletonPoint, l_max: int):
    anchor = Anchor(y)
    if model.closed_form is not None:
        return closed_form_field(model.closed_form, anchor)
    return fekete_field(model.family.with_l_max(min(l_max, model.family.l_max)), anchor, l_max)


def _body_nu(body, cfg: RunConfig):
    kind, arg = parse_body_scheme(cfg.body_scheme)
    return body_measure(body, kind, arg)


def _header(cfg: RunConfig, model: Model | None, extra: dict | None = None) -> dict:
    out = {"command": cfg.command, "seed": cfg.seed}
    if model is not None:
        out["model"] = model.spec.kind
        out["model_params"] = dict(model.spec.params)
        out["l_max"] = model.family.l_max
    out.update(extra or {})
    return out


# -- commands ----------------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig) -> int:
    model = None
    if cfg.model:
        model = load_model(cfg)
    skel, bases = load_bases(cfg, model)
    rows = []
    for b in bases:
        wc = wall_complex(b, skel)
        v = check_valuative_independence(b, skel, wc)
        rows.append((b.degree, len(b.sections), v.n_chambers, v.valid))
        if not v.valid:
            witness = {
                **_header(cfg, model),
                "degree": b.degree,
                "chamber": {"face": v.chamber.face, "representative": list(v.chamber.representative)},
                "pair": list(v.pair),
                "gradient": list(v.gradient),
            }
            sio.write_json(cfg.out / "witness.json", witness)
            sio.write_csv(cfg.out / "verdict.csv", ["degree", "sections", "chambers", "valid"], rows, cfg.meta())
            print(f"degree {b.degree}: sections {v.pair[0]!r} and {v.pair[1]!r} share gradient "
                  f"{list(v.gradient)} on a chamber of face {v.chamber.face}")
            return EXIT_COUNTEREXAMPLE
    sio.write_csv(cfg.out / "verdict.csv", ["degree", "sections", "chambers", "valid"], rows, cfg.meta())
    sio.write_json(cfg.out / "verdict.json", {**_header(cfg, model), "valid": True, "degrees": [r[0] for r in rows]})
    print(f"valid at {len(rows)} degree(s)")
    return EXIT_OK


def _okounkov(cfg: RunConfig, model: Model, y: SkeletonPoint):
    l_max = min(_l_max(cfg), model.family.l_max)
    g = gradient_semigroup(model.family, Anchor(y), l_max)
    body = okounkov_body(g)
    return g, body


def cmd_okounkov(cfg: RunConfig, model: Model | None = None) -> int:
    model = model or load_model(cfg)
    y = parse_anchor(cfg.anchor, model)
    g, body = _okounkov(cfg, model, y)
    vol = body_volume_check(body, model.Ln, model.n, g)
    try:
        ip = integer_points_check(g, central_box(body), body)
        ip_doc = {"l0": ip.l0, "l_max": ip.l_max, "missing": len(ip.missing)}
    except SkelotError as exc:
        ip_doc = {"error": str(exc)}
    doc = {
        **_header(cfg, model, {"anchor": {"face": y.face, "coords": list(y.coords)}}),
        "vertices": [list(v) for v in body.vertices],
        "halfspaces": [{"a": list(a), "b": b} for a, b in body.halfspaces],
        "volume": vol.volume,
        "expected_volume": vol.expected,
        "volume_discrepancy": vol.discrepancy,
        "counts": [{"l": l, "N": N, "ratio": r} for l, N, r in vol.counts],
        "additivity_failures": len(g.additivity_failures()),
        "integer_points": ip_doc,
    }
    sio.write_json(cfg.out / "body.json", doc)
    rows = [(l, list(q)) for l in sorted(g.levels) for q in sorted(g.levels[l])]
    sio.write_csv(cfg.out / "semigroup.csv", ["degree", "gradient"], rows, cfg.meta())
    nu = _body_nu(body, cfg)
    sio.write_csv(cfg.out / "body_measure.csv", ["point", "weight"], zip(nu.samples, nu.weights), cfg.meta())
    if cfg.svg and model.n <= 2:
        from .plotting import plot_body

        plot_body(body.vertices, nu.samples, nu.weights, cfg.out / "body.svg")
    print(f"body volume {rq.fmt_fraction(vol.volume)} (expected {rq.fmt_fraction(vol.expected)})")
    return EXIT_OK


def cmd_cost(cfg: RunConfig, model: Model | None = None) -> int:
    model = model or load_model(cfg)
    y = parse_anchor(cfg.anchor, model)
    cf = cost_field(model, y, _l_max(cfg))
    nu = _body_nu(cf.body_hint, cfg)
    h = cfg.grid_h or float(cfg.get("grid.skeleton_h"))
    g = node_grid(model.skeleton, h)
    X = g.points[g.face_index == model.skeleton.top_faces.index(y.face)]
    C = cf.evaluate(X, nu.samples)
    rows = [(i, j, X[i], nu.samples[j], C[i, j]) for i in range(len(X)) for j in range(len(nu.samples))]
    sio.write_csv(cfg.out / "cost.csv", ["node", "sample", "x", "p", "cost"], rows, cfg.meta())
    zero = GridFunction(X, np.zeros(len(X)))
    fc = c_transform_skeleton_to_body(zero, cf, nu.samples, C)
    fcc = c_transform_body_to_skeleton(fc, cf, X, C)
    sio.write_csv(cfg.out / "transform_body.csv", ["sample", "p", "value", "argmax"],
                  [(j, nu.samples[j], fc.values[j], fc.argmax[j]) for j in range(len(nu.samples))], cfg.meta())
    sio.write_csv(cfg.out / "transform_skeleton.csv", ["node", "x", "value", "argmax"],
                  [(i, X[i], fcc.values[i], fcc.argmax[i]) for i in range(len(X))], cfg.meta())
    if cfg.svg and model.n == 1:
        from .plotting import plot_cost_slice

        pick = np.linspace(0, len(nu.samples) - 1, min(5, len(nu.samples))).astype(int)
        plot_cost_slice(X[:, 0], C[:, pick], [f"p={nu.samples[j, 0]:.3g}" for j in pick], cfg.out / "cost.svg")
    print(f"cost matrix {C.shape[0]}x{C.shape[1]} written")
    return EXIT_OK


def _random_pc(cf, X: np.ndarray, samples: np.ndarray, rng: np.random.Generator, k: int = 4) -> GridFunction:
    """``max_i c(., p_i) - w_i`` over k random samples, projected onto P_c on the grid."""
    idx = rng.choice(len(samples), size=min(k, len(samples)), replace=False)
    w = rng.uniform(0, 0.5, size=len(idx))
    vals = np.max(cf.evaluate(X, samples[idx]) - w[None, :], axis=1)
    return project_to_Pc(GridFunction(X, vals), cf, samples)


def cmd_energy(cfg: RunConfig, model: Model | None = None) -> int:
    model = model or load_model(cfg)
    y = parse_anchor(cfg.anchor, model)
    cf = cost_field(model, y, _l_max(cfg))
    nu = _body_nu(cf.body_hint, cfg)
    h = cfg.grid_h or (1.0 / 2048 if model.n == 1 else 1.0 / 64)
    g = node_grid(model.skeleton, h)
    X = g.points[g.face_index == model.skeleton.top_faces.index(y.face)]
    rng = np.random.default_rng(cfg.seed)
    phi = GridFunction(X, np.zeros(len(X)))
    phi = project_to_Pc(phi, cf, nu.samples)
    psi = _random_pc(cf, X, nu.samples, rng)
    schedule = [int(l) for l in cfg.get("energy.degree_schedule")]
    rep = energy_consistency(phi, psi, model.family, cf, nu, model.Ln, schedule)
    rows = [(l, v, rep.cauchy_gaps[i - 1] if i else "") for i, (l, v) in enumerate(zip(rep.degrees, rep.limit_values))]
    sio.write_csv(cfg.out / "energy.csv", ["degree", "limit_value", "gap"], rows, cfg.meta())
    summary = {
        **_header(cfg, model),
        "integral_value": rep.integral_value,
        "discrepancy": rep.discrepancy,
        "last_gap": rep.cauchy_gaps[-1] if rep.cauchy_gaps else None,
        "projected": list(rep.projected),
    }
    sio.write_json(cfg.out / "energy.json", summary)
    if cfg.svg:
        from .plotting import plot_energy

        plot_energy(rep.degrees, rep.limit_values, rep.integral_value, cfg.out / "energy.svg")
    print(f"energy discrepancy {rep.discrepancy:.3e} (last gap {summary['last_gap']})")
    return EXIT_OK


def _mu(cfg: RunConfig, model: Model):
    dens = cfg.get("measure.density")
    return lebesgue_measure(model.skeleton, dens)


def cmd_solve(cfg: RunConfig, model: Model | None = None) -> int:
    from .transport import comparison_certificate, solve_kantorovich

    model = model or load_model(cfg)
    y = parse_anchor(cfg.anchor, model)
    cf = cost_field(model, y, _l_max(cfg))
    nu = _body_nu(cf.body_hint, cfg)
    mu = _mu(cfg, model)
    tol = float(_pick(cfg.tol, cfg.get("solver.tol")))
    max_iter = int(_pick(cfg.max_iter, cfg.get("solver.max_iter")))
    qh = cfg.get("quadrature.h")
    try:
        phi, cert = solve_kantorovich(mu, nu, cf, tol=tol, max_iter=max_iter, h=qh)
    except NonConvergence as exc:
        doc = {**_header(cfg, model), **exc.certificate.as_dict(), "converged": False}
        sio.write_json(cfg.out / "certificate.json", doc)
        _write_weights(cfg, exc.potential, mu)
        print(f"solver did not converge: {exc}")
        return EXIT_NONCONVERGENCE
    k = int(cfg.get("comparison.points"))
    if k > 0 and model.n <= 2:
        rng = np.random.default_rng(cfg.seed)
        lo, hi = (np.array([float(v) for v in a]) for a in model.skeleton.faces[y.face].polytope.bounding_box())
        pts = rng.uniform(lo, hi, size=(k, model.n))
        rep = comparison_certificate(phi, model.family, pts, mu if cfg.get("comparison.collar") else None,
                                     l_max=min(_l_max(cfg), model.family.l_max))
        cert.comparison = rep.as_dict()
    doc = {**_header(cfg, model), **cert.as_dict(), "converged": True}
    sio.write_json(cfg.out / "certificate.json", doc)
    cells = _write_weights(cfg, phi, mu)
    if cfg.svg and model.n <= 2 and cells.method.startswith("exact"):
        from .plotting import plot_cells, plot_residuals

        plot_cells(cells, phi.samples, phi, cfg.out / "cells.svg")
        plot_residuals(cert.history, cfg.out / "convergence.svg")
    print(f"residual {cert.residual_inf:.3e} after {cert.iterations} step(s)")
    return EXIT_OK


def _write_weights(cfg: RunConfig, phi, mu):
    from .transport import laguerre_cells

    cells = laguerre_cells(phi, mu, h=cfg.get("quadrature.h"))
    rows = [(j, phi.samples[j], phi.psi[j], cells.masses[j]) for j in range(len(phi.samples))]
    sio.write_csv(cfg.out / "weights.csv", ["sample", "p", "psi", "cell_mass"], rows, cfg.meta())
    return cells


def cmd_report(cfg: RunConfig) -> int:
    model = load_model(cfg)
    codes = [cmd_okounkov(cfg, model), cmd_cost(cfg, model)]
    if model.n <= 2:
        codes.append(cmd_energy(cfg, model))
    codes.append(cmd_solve(cfg, model))
    return max(codes)


COMMANDS = {
    "validate": cmd_validate,
    "okounkov": cmd_okounkov,
    "cost": cmd_cost,
    "energy": cmd_energy,
    "solve": cmd_solve,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    try:
        cfg = parse_args(argv)
        return COMMANDS[cfg.command](cfg)
    except MalformedInput as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SkelotError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
