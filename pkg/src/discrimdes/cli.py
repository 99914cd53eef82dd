"""Command-line front end.

``discrimdes <command> --spec FILE [--json [OUT]] [--csv OUT] [--seed S]
[--threads N] [--tol X] [--design FILE]``

Exit status: 0 success, 1 invalid input, 2 numerical failure. Errors are
written to stderr as one JSON object.
"""

import argparse
import csv
import io
import json
import math
import sys

import jsonschema
import numpy as np

from . import approx, criteria, simulate, solvers
from .core import DesignSpace, make_design
from .errors import DiscrimDesError, NotChebyshev, ValidationError, WrongAlternationCount
from .models import (
    BasisSet,
    ExpSumModel,
    FixedMean,
    LinearModel,
    NestedPair,
    Precision,
)

_NUM = {"type": "number"}
_NUM_LIST = {"type": "array", "items": _NUM, "minItems": 1}

MODEL_SCHEMA = {
    "oneOf": [
        {
            "type": "object",
            "required": ["polynomial"],
            "additionalProperties": False,
            "properties": {
                "polynomial": {
                    "type": "object",
                    "required": ["coefficients"],
                    "additionalProperties": False,
                    "properties": {"coefficients": _NUM_LIST},
                }
            },
        },
        {
            "type": "object",
            "required": ["exponential_sum"],
            "additionalProperties": False,
            "properties": {
                "exponential_sum": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "terms": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                        },
                        "n_terms": {"type": "integer", "minimum": 1},
                        "amp_bounds": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                        "rate_bounds": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                    },
                }
            },
        },
        {
            "type": "object",
            "required": ["basis"],
            "additionalProperties": False,
            "properties": {
                "basis": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "monomials_upto": {"type": "integer", "minimum": 0},
                        "powers": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                    },
                }
            },
        },
    ]
}

DESIGN_SCHEMA = {
    "type": "object",
    "required": ["points", "weights"],
    "properties": {"points": _NUM_LIST, "weights": _NUM_LIST},
}

SPEC_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "discrimdes problem specification",
    "type": "object",
    "required": ["true_model"],
    "additionalProperties": False,
    "properties": {
        "design_space": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lower": _NUM,
                "upper": _NUM,
                "grid_points": {"type": "integer", "minimum": 101},
            },
        },
        "true_model": MODEL_SCHEMA,
        "rival": MODEL_SCHEMA,
        "precision": {
            "type": "object",
            "required": ["kind"],
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["constant", "one_minus_x2"]},
                "value": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "criterion": {"enum": ["T", "Ds", "D1", "KL"]},
        "algorithm": {"enum": ["chebyshev", "exchange", "enumerate", "auto"]},
        "extension": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 1},
            },
        },
        "design": DESIGN_SCHEMA,
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "sigma2": {"type": "number", "exclusiveMinimum": 0},
                "reps": {"type": "integer", "minimum": 100},
                "seed": {"type": "integer", "minimum": 0},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "kind": {"enum": ["power", "mse"]},
                "lr_rates": {"enum": ["fixed", "free"]},
                "sweep": {
                    "type": "object",
                    "required": ["index", "values"],
                    "additionalProperties": False,
                    "properties": {
                        "index": {"type": "integer", "minimum": 0},
                        "values": _NUM_LIST,
                    },
                },
            },
        },
    },
}


# --------------------------------------------------------------------------
# spec resolution


class Problem:
    def __init__(self, spec):
        self.spec = spec
        ds = spec.get("design_space", {})
        try:
            self.space = DesignSpace(ds.get("lower", -1.0), ds.get("upper", 1.0), ds.get("grid_points", 2001))
        except ValueError as exc:
            raise ValidationError(str(exc)) from exc
        self.criterion = spec.get("criterion", "T")
        self.algorithm = spec.get("algorithm", "auto")
        tols = spec.get("tolerances", {})
        self.tol = tols.get("tol")
        self.max_iter = tols.get("max_iter")
        self.true_desc = spec["true_model"]
        self.eta = resolve_mean(self.true_desc)
        self.rival = resolve_family(spec["rival"]) if "rival" in spec else None
        p = spec.get("precision")
        self.precision = Precision(p["kind"], p.get("value", 1.0)) if p else None
        if self.criterion == "KL" and self.precision is None:
            raise ValidationError("criterion KL needs a precision")

    def need_rival(self):
        if self.rival is None:
            raise ValidationError("this command needs a 'rival' model")
        return self.rival

    def design(self, path=None):
        if path:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
            d = doc.get("design", doc)
            jsonschema.validate(d, DESIGN_SCHEMA)
        elif "design" in self.spec:
            d = self.spec["design"]
        else:
            raise ValidationError("no design given (use --design or the 'design' key)")
        return make_design(d["points"], d["weights"], self.space)

    def pair(self):
        """Nested pair from the true model and the rival."""
        rival = self.need_rival()
        if "polynomial" in self.true_desc:
            coef = np.asarray(self.true_desc["polynomial"]["coefficients"], dtype=float)
            if not isinstance(rival, LinearModel) or rival.basis.degrees != tuple(range(rival.n_params)):
                raise ValidationError("polynomial truth needs a monomial rival basis")
            m2 = rival.n_params
            if coef.size <= m2:
                raise ValidationError("true polynomial must have more coefficients than the rival")
            return NestedPair.linear(
                BasisSet.monomials(m2), BasisSet.powers(range(m2, coef.size)), coef[:m2], coef[m2:]
            )
        fam = self.eta.family
        if not isinstance(fam, ExpSumModel):
            raise ValidationError("D-criteria need a parametric true model")
        ext = self.spec.get("extension")
        if ext is None:
            k = rival.n_params
            ext = [k] if self.criterion == "D1" else list(range(k, fam.n_params))
        return NestedPair(fam, self.eta.theta, tuple(ext))


def resolve_mean(desc):
    if "polynomial" in desc:
        return FixedMean.polynomial(desc["polynomial"]["coefficients"])
    if "exponential_sum" in desc:
        terms = desc["exponential_sum"].get("terms")
        if not terms:
            raise ValidationError("true exponential_sum needs 'terms'")
        return FixedMean.exponential_sum(terms)
    raise ValidationError("true_model must be a polynomial or exponential_sum")


def resolve_family(desc):
    if "basis" in desc:
        b = desc["basis"]
        if "monomials_upto" in b:
            return LinearModel(BasisSet.monomials(int(b["monomials_upto"]) + 1))
        if "powers" in b:
            return LinearModel(BasisSet.powers(b["powers"]))
        raise ValidationError("basis needs 'monomials_upto' or 'powers'")
    if "exponential_sum" in desc:
        e = desc["exponential_sum"]
        k = e.get("n_terms", len(e.get("terms", [])))
        if k < 1:
            raise ValidationError("rival exponential_sum needs 'n_terms'")
        kw = {}
        if "amp_bounds" in e:
            kw["amp_bounds"] = tuple(e["amp_bounds"])
        if "rate_bounds" in e:
            kw["rate_bounds"] = tuple(e["rate_bounds"])
        return ExpSumModel(k, **kw)
    if "polynomial" in desc:
        n = len(desc["polynomial"]["coefficients"])
        return LinearModel(BasisSet.monomials(n))
    raise ValidationError("unrecognised rival descriptor")


def load_spec(path):
    try:
        with open(path, encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"spec is not valid JSON: {exc}") from exc
    jsonschema.validate(spec, SPEC_SCHEMA)
    return spec


# --------------------------------------------------------------------------
# commands


def _fmt(v):
    return f"{v:.4f}"


def _design_table(design):
    lines = ["point      weight"]
    for x, w in design:
        lines.append(f"{x:>9.4f}  {w:.4f}")
    return "\n".join(lines)


def cmd_solve(pb, args):
    tol = args.tol or pb.tol
    if pb.criterion in ("Ds", "D1"):
        pair = pb.pair()
        s = 1 if pb.criterion == "D1" else pair.m0
        kw = {"max_iter": pb.max_iter} if pb.max_iter else {}
        design = solvers.solve_ds(pair, pb.space, s=s, **kw)
        if pb.criterion == "D1" and s != pair.m0:
            value = None
        else:
            value = criteria.ds_value(design, pair)
        out = {"criterion": pb.criterion, "design": design.as_dict(), "value": value}
        human = f"{pb.criterion}-optimal design\n{_design_table(design)}"
        if value is not None:
            human += f"\ncriterion value {_fmt(value)}"
        return out, human
    rival = pb.need_rival()
    precision = pb.precision if pb.criterion == "KL" else None
    algo = pb.algorithm
    design = None
    if algo == "auto":
        algo = "exchange"
        if isinstance(rival, LinearModel) and precision is None:
            try:
                design = solvers.solve_t_chebyshev(pb.eta, rival.basis, pb.space)
                algo = "chebyshev"
            except WrongAlternationCount:
                # more extremal points than parameters: report the whole family
                algo = "enumerate"
            except NotChebyshev:
                algo = "exchange"
    if algo == "enumerate":
        return cmd_enumerate(pb, args)
    if algo == "chebyshev":
        if not isinstance(rival, LinearModel) or precision is not None:
            raise ValidationError("the chebyshev route needs a linear rival and the T criterion")
        if design is None:
            design = solvers.solve_t_chebyshev(pb.eta, rival.basis, pb.space)
        vtol = tol or 1e-6
    else:
        kw = {}
        if tol:
            kw["tol"] = tol
        if pb.max_iter:
            kw["max_iter"] = pb.max_iter
        design = solvers.solve_t_exchange(pb.eta, rival, pb.space, precision=precision, **kw)
        vtol = tol or 1e-3
    rep = solvers.verify_t_optimal(design, pb.eta, rival, pb.space, tol=vtol, precision=precision)
    out = {"criterion": pb.criterion, "algorithm": algo, "design": design.as_dict(), "report": rep.as_dict()}
    human = (
        f"{pb.criterion}-optimal design ({algo})\n{_design_table(design)}\n"
        f"criterion value {_fmt(rep.value)}  sup residual^2 {_fmt(rep.sup_error ** 2)}  verdict {rep.verdict}"
    )
    return out, human


def cmd_enumerate(pb, args):
    rival = pb.need_rival()
    precision = pb.precision if pb.criterion == "KL" else None
    poly = solvers.enumerate_t_optimal(pb.eta, rival, pb.space, precision=precision)
    k = len(poly.vertices)
    center = poly.mixture(np.full(k, 1.0 / k))
    out = {
        "criterion": pb.criterion,
        "algorithm": "enumerate",
        "polytope": poly.as_dict(),
        "design": center.as_dict(),
        "value": poly.sup_error**2,
    }
    lines = [f"extremal set: {', '.join(_fmt(x) for x in poly.support)}"]
    lines.append(f"free dimension {poly.free_dimension}, {len(poly.vertices)} vertices")
    for i, v in enumerate(poly.vertices):
        lines.append(f"  vertex {i}: " + ", ".join(_fmt(w) for w in v))
    lines.append("centre of the vertices:")
    lines.append(_design_table(center))
    lines.append(f"criterion value {_fmt(poly.sup_error ** 2)}")
    return out, "\n".join(lines)


def cmd_approx(pb, args):
    rival = pb.need_rival()
    scale = None
    if pb.criterion == "KL":
        lam = pb.precision
        scale = lambda x: np.sqrt(np.maximum(lam(x), 0.0))
    ba = approx.best_approximation(pb.eta, rival, pb.space, scale=scale)
    rows = []
    for h in ba.history:
        if isinstance(h, approx.RemesStep):
            rows.append(
                {
                    "iteration": h.iteration,
                    "theta": h.theta.tolist(),
                    "reference": h.reference.tolist(),
                    "extrema": h.extrema.tolist(),
                    "level": h.level,
                    "sup_error": h.sup_error,
                }
            )
    out = {
        "theta_bar": np.asarray(ba.theta_bar).tolist(),
        "sup_error": ba.sup_error,
        "extremal_points": ba.extremal_points.tolist(),
        "residual_signs": ba.residual_signs.tolist(),
        "iterations": ba.iterations,
        "degenerate": ba.degenerate,
        "history": rows,
    }
    lines = []
    if rows:
        p = len(rows[0]["theta"])
        lines.append("k  " + "  ".join(f"theta{j + 1:<4}" for j in range(p)) + "  points")
        for r in rows:
            th = "  ".join(f"{t:>9.4f}" for t in r["theta"])
            lines.append(f"{r['iteration']:<2} {th}  " + "  ".join(f"{x:.3f}" for x in r["extrema"]))
    lines.append("theta_bar " + ", ".join(f"{t:.4f}" for t in ba.theta_bar))
    lines.append(f"sup error {ba.sup_error:.4f}")
    lines.append("extremal points " + ", ".join(f"{x:.4f}" for x in ba.extremal_points))
    return out, "\n".join(lines)


def cmd_verify(pb, args):
    design = pb.design(args.design)
    if pb.criterion in ("Ds", "D1"):
        pair = pb.pair()
        s = 1 if pb.criterion == "D1" else pair.m0
        if s != pair.m0:
            raise ValidationError("verify supports D1 only for single-coordinate extensions")
        gap = solvers.ds_equivalence_gap(design, pair, pb.space, s)
        tol = args.tol or pb.tol or 1e-4
        verdict = "optimal" if gap <= s * tol else "suboptimal"
        out = {"design": design.as_dict(), "value": criteria.ds_value(design, pair), "gap": gap, "verdict": verdict}
        return out, f"{_design_table(design)}\nmax d(x) - s = {gap:.3e}  verdict {verdict}"
    rival = pb.need_rival()
    precision = pb.precision if pb.criterion == "KL" else None
    tol = args.tol or pb.tol or 1e-6
    rep = solvers.verify_t_optimal(design, pb.eta, rival, pb.space, tol=tol, precision=precision)
    out = {"design": design.as_dict(), "report": rep.as_dict()}
    human = (
        f"{_design_table(design)}\ncriterion value {_fmt(rep.value)}  "
        f"violation {rep.violation:.3e}  verdict {rep.verdict}"
    )
    return out, human


def _sim_setup(pb, args):
    sim = dict(pb.spec.get("simulation", {}))
    if args.seed is not None:
        sim["seed"] = args.seed
    cfg = simulate.SimConfig(
        n=sim.get("n", 50),
        sigma2=sim.get("sigma2", 0.1),
        reps=sim.get("reps", 1000),
        seed=sim.get("seed", 20240601),
        alpha=sim.get("alpha", 0.05),
    )
    rival = pb.need_rival()
    if "polynomial" in pb.true_desc:
        full = BasisSet.monomials(len(pb.true_desc["polynomial"]["coefficients"]))
        test = simulate.FTest(rival.basis, full)
        family = LinearModel(full)
    else:
        family = ExpSumModel(pb.eta.family.n_terms)
        if not isinstance(rival, ExpSumModel) or rival.n_terms >= family.n_terms:
            raise ValidationError("LR simulation needs an exponential rival with fewer terms")
        fixed = None
        if sim.get("lr_rates", "fixed") == "fixed":
            fixed = tuple(pb.eta.theta[2 * j + 1] for j in range(rival.n_terms, family.n_terms))
        test = simulate.LRTest(rival, family, fixed_rates=fixed)
    return sim, cfg, test, family


def _threads(args):
    return args.threads or simulate.default_threads()


def cmd_simulate(pb, args):
    design = pb.design(args.design)
    sim, cfg, test, family = _sim_setup(pb, args)
    if sim.get("kind", "power") == "mse":
        truth = FixedMean.from_model(family, pb.eta.theta) if pb.eta.theta is not None else pb.eta
        rep = simulate.simulate_mse(design, truth, family, cfg, _threads(args))
        est = ", ".join(f"{v:.4f}" for v in rep.estimate)
        human = f"MSE per parameter: {est}"
    else:
        rep = simulate.simulate_power(design, pb.eta, test, cfg, _threads(args))
        human = f"rejection rate {rep.estimate:.4f} (se {rep.std_error:.4f}, reps {rep.reps})"
    return {"report": rep.as_dict()}, human


def cmd_power_curve(pb, args):
    design = pb.design(args.design)
    sim, cfg, test, _ = _sim_setup(pb, args)
    sweep = sim.get("sweep")
    if not sweep:
        raise ValidationError("power-curve needs simulation.sweep")
    idx = sweep["index"]

    def truth_at(v):
        d = json.loads(json.dumps(pb.true_desc))
        if "polynomial" in d:
            c = d["polynomial"]["coefficients"]
            if idx >= len(c):
                raise ValidationError(f"sweep index {idx} out of range")
            c[idx] = v
        else:
            flat = [t for term in d["exponential_sum"]["terms"] for t in term]
            if idx >= len(flat):
                raise ValidationError(f"sweep index {idx} out of range")
            flat[idx] = v
            d["exponential_sum"]["terms"] = [flat[i : i + 2] for i in range(0, len(flat), 2)]
        return resolve_mean(d)

    rows = simulate.power_curve(design, truth_at, test, cfg, sweep["values"], _threads(args))
    out = {"rows": [{"value": v, "estimate": e, "std_error": s} for v, e, s in rows], "seed": cfg.seed}
    human = "value      rate    se\n" + "\n".join(f"{v:>9.4f}  {e:.4f}  {s:.4f}" for v, e, s in rows)
    return out, human


COMMANDS = {
    "solve": cmd_solve,
    "enumerate": cmd_enumerate,
    "approx": cmd_approx,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
    "power-curve": cmd_power_curve,
}


# --------------------------------------------------------------------------
# output


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def _csv_text(out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["value", "estimate", "std_error"])
    for r in out.get("rows", []):
        w.writerow([repr(float(r["value"])), repr(float(r["estimate"])), repr(float(r["std_error"]))])
    return buf.getvalue()


def _error(kind, message, code, path=None):
    payload = {"error": kind, "message": message, "exit_code": code}
    if path is not None:
        payload["path"] = path
    sys.stderr.write(json.dumps(payload) + "\n")
    return code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _error("UsageError", message, 1)
        raise SystemExit(1)


def build_parser():
    p = _Parser(prog="discrimdes", description="Optimal designs for model discrimination.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--spec", required=True, help="problem specification (JSON)")
    p.add_argument("--json", nargs="?", const="-", default=None, metavar="OUT", help="full-precision JSON output")
    p.add_argument("--csv", default=None, metavar="OUT", help="CSV output for sweeps")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--design", default=None, help="design file (JSON with points and weights)")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code else 0
    if args.threads is not None and args.threads < 1:
        return _error("ValidationError", "--threads must be at least 1", 1)
    if args.tol is not None and not (args.tol > 0 and math.isfinite(args.tol)):
        return _error("ValidationError", "--tol must be positive", 1)
    if args.csv and args.command != "power-curve":
        return _error("ValidationError", "--csv applies to power-curve only", 1)
    try:
        spec = load_spec(args.spec)
        pb = Problem(spec)
        out, human = COMMANDS[args.command](pb, args)
    except jsonschema.ValidationError as exc:
        return _error("ValidationError", exc.message, 1, [str(p) for p in exc.absolute_path])
    except DiscrimDesError as exc:
        return _error(type(exc).__name__, str(exc), exc.exit_code)
    except (ValueError, TypeError, OSError) as exc:
        return _error(type(exc).__name__, str(exc), 1)
    if args.json is not None:
        _write(args.json, json.dumps(out, default=_json_default, indent=2))
    if args.csv:
        _write(args.csv, _csv_text(out))
    if args.json != "-" and args.csv != "-":
        _write(None, human)
    return 0


if __name__ == "__main__":
    sys.exit(main())
