"""Named experiments used by the command line runner and the acceptance suite.

Each runner takes a dict of parameters (already merged with its defaults)
and a numpy Generator, and returns an Outcome: scalar metrics, CSV tables
and a pass flag.  Anchors name the mathematical statement being checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import tolerances as tol
from .bott import (
    OscillatorConfig,
    alpha_isometry,
    bott_index,
    build_bott,
    compact_bump,
    exact_levels,
    fit_gaussian_width,
    kernel_homotopy,
    near_zero_counts,
    positive_levels,
    zero_form_weight,
)
from .clifford import build_clifford, clifford_residuals
from .cstar_k0 import Algebra, k0_of_projection, random_projection
from .elliptic import (
    analytic_index,
    bump,
    constant_op,
    freeze_compare,
    local_decay,
    torus_quantization_defect,
    make_first_order_op,
    morphism_index,
    quantization_convergence,
    scalar_circle_op,
    topological_index_torus,
    twisted_dirac_torus,
)
from .linalg_core import hermitian_eig, matrix_function, operator_norm, random_hermitian, random_unitary
from .quantize import (
    PhaseFunction,
    QuantizationGrid,
    commutator_decay,
    diffeo_covariance,
    glued_phi,
    is_nonincreasing,
    mult_op,
    phi_t,
    resolved_norm,
    resolvent,
    two_arc_partition,
)


@dataclass
class Outcome:
    metrics: dict
    passed: bool
    tables: dict = field(default_factory=dict)  # name -> list of row dicts


def _lorentz(y):
    return 1.0 / (1.0 + np.asarray(y) ** 2)


# --- Bott operator -----------------------------------------------------------------


def run_bott_spectrum(p, rng) -> Outcome:
    rows = []
    for t in p["t_list"]:
        op = build_bott(OscillatorConfig(n=p["n"], t=t, N=p["N"], L=p["L"]))
        got = positive_levels(op, p["count"])
        exact = exact_levels(t, p["count"])
        if len(got) < p["count"]:
            raise ValueError(f"only {len(got)} levels resolved at t={t}")
        for k, (a, b) in enumerate(zip(got, exact), start=1):
            rows.append({"t": t, "k": k, "lambda_measured": a, "lambda_exact": b, "abs_err": abs(a - b)})
    err = max(r["abs_err"] for r in rows)
    return Outcome({"max_abs_err": err}, err <= tol.get("bott_eig"), {"levels": rows})


def run_bott_index(p, rng) -> Outcome:
    N = p["N"] if p["N"] is not None else (1024 if p["n"] == 1 else 32)
    L = p["L"] if p["L"] is not None else (10.0 if p["n"] == 1 else 6.0)
    op = build_bott(OscillatorConfig(n=p["n"], t=p["t"], N=N, L=L, sign=p["sign"]))
    k = op.kernel()
    index = bott_index(op)
    nz = near_zero_counts(op)
    m = {
        "index": index,
        "raw_plus": k.raw_counts[0],
        "raw_minus": k.raw_counts[1],
        "near_zero_raw": nz["raw"],
        "near_zero_physical": nz["physical"],
    }
    ok = index == p["expected"] and nz["physical"] == 1
    if index == 1:
        w = zero_form_weight(op)
        fit = fit_gaussian_width(op)
        m.update(zero_form_weight=w, gamma=fit["gamma"], gamma_over_t=fit["gamma_over_t"])
        ok = ok and w >= 1 - 1e-8
    return Outcome(m, ok)


def run_kernel_homotopy(p, rng) -> Outcome:
    op = build_bott(OscillatorConfig(n=1, t=p["t"], N=p["N"], L=p["L"]))
    x = np.linspace(-p["x_max"], p["x_max"], p["x_num"])
    vals = kernel_homotopy(op, compact_bump(p["a"]), x, p["s_list"])
    wide = float(kernel_homotopy(op, compact_bump(p["a_wide"]), x, [1.0])[0])
    rows = [{"s": s, "sup_norm": v} for s, v in zip(p["s_list"], vals)]
    worst = float(vals.max())
    ok = worst <= tol.get("homotopy_zero") and wide > 0.5
    return Outcome({"max_sup_norm": worst, "wide_support_norm": wide}, ok, {"homotopy": rows})


def run_alpha_isometry(p, rng) -> Outcome:
    rows = []
    for n in p["n_list"]:
        for t in p["t_list"]:
            v = alpha_isometry(t, n)
            rows.append({"n": n, "t": t, "norm": v, "abs_err": abs(v - 1)})
    err = max(r["abs_err"] for r in rows)
    return Outcome({"max_abs_err": err}, err <= tol.get("isometry"), {"isometry": rows})


# --- quantization on the line and circle --------------------------------------------


def run_commutator_decay(p, rng) -> Outcome:
    grid = QuantizationGrid.line(p["N"], p["L"])
    t_list = list(range(1, p["t_max"] + 1))
    out = commutator_decay(grid, _lorentz, _lorentz, t_list)
    lo, hi = tol.get("slope_low"), tol.get("slope_high")
    ok = out["bound_holds"] and lo <= out["slope"] <= hi
    m = {"slope": out["slope"], "r2": out["r2"], "commutator_DM": out["commutator_DM"], "bound_holds": int(out["bound_holds"])}
    return Outcome(m, ok, {"decay": out["rows"]})


def _circle_symbol():
    return PhaseFunction(lambda x, xi: np.exp(-((x - np.pi) ** 2) / (2 * 0.5**2)) / (1 + xi**2))


def run_diffeo_covariance(p, rng) -> Outcome:
    grid = QuantizationGrid.circle(p["N"])
    e = p["strength"]
    psi = lambda x: x + e * np.sin(x)
    dpsi = lambda x: 1 + e * np.cos(x)
    rows = diffeo_covariance(grid, _circle_symbol(), psi, dpsi, p["t_list"])
    last = rows[-1]["norm"]
    ok = last < tol.get("diffeo_threshold") and last < rows[0]["norm"]
    return Outcome({"final_norm": last, "first_norm": rows[0]["norm"]}, ok, {"covariance": rows})


def run_glue_independence(p, rng) -> Outcome:
    grid = QuantizationGrid.circle(p["N"])
    Fun = PhaseFunction(lambda x, xi: (1 + 0.5 * np.cos(x)) / (1 + xi**2))
    arcs1, rhos1 = two_arc_partition(0.0)
    arcs2, rhos2 = two_arc_partition(grid.axis_points[p["shift"]])
    rows = []
    for t in p["t_list"]:
        G1 = glued_phi(grid, arcs1, rhos1, Fun, t)
        G2 = glued_phi(grid, arcs2, rhos2, Fun, t)
        P = phi_t(Fun, grid, t)
        rows.append({"t": t, "cover_difference": resolved_norm(G1 - G2, grid), "cover_difference_full": operator_norm(G1 - G2), "vs_global": resolved_norm(G1 - P, grid)})
    # module property: Phi_t(rho F) = M_rho Phi_t(F)
    rho = rhos1[0]
    t = p["t_list"][-1]
    module = float(np.abs(phi_t(Fun.times_x(rho), grid, t) - mult_op(grid, rho(grid.x_arg())) @ phi_t(Fun, grid, t)).max())
    by_t = {r["t"]: r["cover_difference"] for r in rows}
    last, first = rows[-1]["cover_difference"], rows[0]["cover_difference"]
    ok = last < tol.get("decay_threshold") and last < 0.5 * first and module <= 1e-12
    m = {"final_difference": last, "first_difference": first, "module_defect": module}
    if 64 in by_t:
        m["difference_t64"] = by_t[64]
    return Outcome(m, ok, {"gluing": rows})


# --- elliptic operators on the circle --------------------------------------------------


def _h_operator(grid):
    return scalar_circle_op(grid, lambda x: 2 + np.sin(x), np.cos)


def run_local_decay(p, rng) -> Outcome:
    grid = QuantizationGrid.circle(p["N"])
    t_list = p["t_list"]
    c = constant_op(grid)
    one = local_decay(c, c, np.sin, resolvent(1), t_list)
    h = _h_operator(grid)
    h2 = make_first_order_op(grid, h.algebra, 1, [[h.a[0][0]]], [h.b[0][:, 0, 0] + bump(1.0, 0.5)(grid.axis_points)])
    h3 = scalar_circle_op(grid, lambda x: 2 + np.sin(x) + 0.5 * bump(np.pi + 1, 0.8)(x))
    phi = bump(1.0, 0.6)
    two = local_decay(h, h2, phi, _lorentz, t_list)["part2"]
    three = local_decay(h, h3, phi, _lorentz, t_list)["part3"]
    rows = []
    for a, b, cc in zip(one["part1"], two, three):
        rows.append({"t": a["t"], "part1": a["norm"], "part1_resolvent": a["resolvent"], "part1_bound": a["bound"], "part2": b["norm"], "part3": cc["norm"]})
    bound_ok = all(r["part1_resolvent"] <= r["part1_bound"] + 1e-8 for r in rows)
    thr = tol.get("decay_threshold")
    last = rows[-1]
    ok = bound_ok and last["part1"] < thr and last["part2"] < thr and last["part3"] < thr
    m = {"bound_holds": int(bound_ok), "part1_final": last["part1"], "part2_final": last["part2"], "part3_final": last["part3"]}
    return Outcome(m, ok, {"decay": rows})


def run_freeze(p, rng) -> Outcome:
    grid = QuantizationGrid.circle(p["N"])
    h = _h_operator(grid)
    rows = []
    for hw in p["half_widths"]:
        r = freeze_compare(h, p["x0"], bump(p["x0"], hw), _lorentz, p["t"])
        rows.append({"half_width": hw, "delta": r["delta"], "norm": r["norm"]})
    control = freeze_compare(constant_op(grid), p["x0"], bump(p["x0"], p["half_widths"][0]), _lorentz, p["t"], how="full")["norm"]
    norms = [r["norm"] for r in rows]
    decreasing = all(b < a for a, b in zip(norms, norms[1:]))
    ok = decreasing and norms[-1] < tol.get("freeze_threshold") and control <= 1e-10
    return Outcome({"smallest_support_norm": norms[-1], "control": control, "strictly_decreasing": int(decreasing)}, ok, {"freeze": rows})


def run_quantization_convergence(p, rng) -> Outcome:
    grid = QuantizationGrid.circle(p["N"])
    rows = quantization_convergence(_h_operator(grid), _lorentz, p["t_list"])
    ctrl = quantization_convergence(constant_op(grid), _lorentz, p["t_list"], how="full")
    for r, c in zip(rows, ctrl):
        r["control"] = c["norm"]
    by_t = {r["t"]: r["norm"] for r in rows}
    mono = [by_t[t] for t in p["monotone_on"] if t in by_t]
    ok = is_nonincreasing(mono) and max(c["norm"] for c in ctrl) <= 1e-8
    target = float(p["target_t"])
    m = {"control_max": max(c["norm"] for c in ctrl), "nonincreasing": int(is_nonincreasing(mono))}
    if target in by_t:
        m["defect_at_target"] = by_t[target]
        ok = ok and by_t[target] < tol.get("decay_threshold")
    else:
        ok = False
    tables = {"convergence": rows}
    if p["torus_flux"] is not None:
        blk = twisted_dirac_torus([p["torus_flux"]], p["torus_N"]).blocks[0]
        trows = torus_quantization_defect(blk, _lorentz, p["t_list"])
        tables["torus"] = trows
        tv = {r["t"]: r["norm"] for r in trows}
        if target in tv:
            m["torus_defect_at_target"] = tv[target]
            ok = ok and tv[target] < tol.get("torus_quant_threshold")
    return Outcome(m, ok, tables)


# --- index theorem on the torus ----------------------------------------------------------


def _index_rows(cases, t_small_factor=None):
    rows, ok = [], True
    for flux, blocks in cases:
        alg = Algebra(tuple(blocks))
        dop = twisted_dirac_torus(flux, cases.N, alg)
        an = analytic_index(dop)
        if t_small_factor is None:
            mor, det = morphism_index(dop)
        else:
            with tol.overridden(t_small_factor=t_small_factor):
                mor, det = morphism_index(dop)
        top = topological_index_torus(flux, alg)
        same = an == top == mor
        ok = ok and same
        rows.append(
            {
                "flux": " ".join(map(str, flux)),
                "algebra": " ".join(map(str, blocks)),
                "analytic": " ".join(map(str, an.ranks)),
                "topological": " ".join(map(str, top.ranks)),
                "morphism": " ".join(map(str, mor.ranks)),
                "max_unitarity": max((d["unitarity"] for d in det), default=0.0),
                "max_involution": max((d["involution"] for d in det), default=0.0),
                "equal": int(same),
            }
        )
    return rows, ok


class _Cases(list):
    N: int = 24


def _cases(p) -> _Cases:
    out = _Cases()
    out.N = p["N"]
    if p["flux"] is not None:
        blocks = p["algebra"] if p["algebra"] is not None else [1] * len(p["flux"])
        out.append((list(p["flux"]), list(blocks)))
        return out
    # default sweep: scalar, flux pairs over C + C, and M_2
    lo, hi = p["flux_range"]
    ds = list(range(lo, hi + 1))
    for d in ds:
        out.append(([d], [1]))
    for d in ds:
        out.append(([d, -d], [1, 1]))
        out.append(([d, ds[(ds.index(d) + 1) % len(ds)]], [1, 1]))
    for d in ds:
        out.append(([d], [2]))
    return out


def run_index_check(p, rng) -> Outcome:
    rows, ok = _index_rows(_cases(p))
    return Outcome({"operators": len(rows), "all_equal": int(ok)}, ok, {"index": rows})


def run_cayley_index(p, rng) -> Outcome:
    rows, ok = _index_rows(_cases(p), t_small_factor=p["t_small_factor"])
    unit = max(r["max_unitarity"] for r in rows)
    ok = ok and unit <= tol.get("unitarity")
    return Outcome({"operators": len(rows), "all_equal": int(ok), "max_unitarity": unit}, ok, {"cayley": rows})


# --- property suites ----------------------------------------------------------------------


def run_property_suite(seed: int = 0, trials: int = 100, eig_count: int = 200, eig_max: int = 200) -> Outcome:
    """Randomized invariants: Clifford identities, K0 invariance, eigensolver residuals."""
    rng = np.random.default_rng(seed)
    cl = 0.0
    for i in range(trials):
        rep = build_clifford(1 + i % 4)
        v, xi = rng.normal(size=rep.n), rng.normal(size=rep.n)
        cl = max(cl, *clifford_residuals(rep, v, xi).values())
    k0_failures = 0
    for _ in range(trials):
        alg = Algebra(tuple(int(k) for k in rng.integers(1, 4, size=rng.integers(1, 4))))
        m = int(rng.integers(1, 4))
        p = random_projection(alg, m, rng)
        base = k0_of_projection(p)
        U = [random_unitary(b.shape[0], rng) for b in p.blocks]
        if k0_of_projection(p.conjugate_by(U)) != base:
            k0_failures += 1
        # homotopy p_s = e^{isK} p e^{-isK}, s in [0, 1]
        K = [random_hermitian(b.shape[0], rng) for b in p.blocks]
        for s in np.linspace(0, 1, 5):
            W = [matrix_function(k, lambda w, s=s: np.exp(1j * s * w)) for k in K]
            if k0_of_projection(p.conjugate_by(W)) != base:
                k0_failures += 1
                break
    rec = 0.0
    sizes = np.linspace(2, eig_max, eig_count).astype(int)
    for n in sizes:
        H = random_hermitian(int(n), rng)
        rec = max(rec, float(np.abs(hermitian_eig(H).reconstruct() - H).max()))
    ok = cl <= tol.get("clifford") and k0_failures == 0 and rec <= tol.get("reconstruction")
    return Outcome({"clifford_residual": cl, "k0_failures": k0_failures, "eig_reconstruction": rec}, ok)


@dataclass(frozen=True)
class Experiment:
    runner: Callable
    defaults: dict
    anchor: str


_DYADIC = [4, 8, 16, 32, 64, 128]
_INDEX_DEFAULTS = {"N": 24, "flux": None, "algebra": None, "flux_range": [-3, 3]}

EXPERIMENTS = {
    "bott-spectrum": Experiment(run_bott_spectrum, {"n": 1, "t_list": [1.0, 4.0], "N": 1024, "L": 10.0, "count": 10}, "oscillator spectrum +-sqrt(2k/t)"),
    "bott-index": Experiment(run_bott_index, {"n": 1, "t": 1.0, "N": None, "L": None, "sign": 1, "expected": 1}, "Bott generator has index +1"),
    "b20-homotopy": Experiment(
        run_kernel_homotopy,
        {"t": 1.0, "N": 256, "L": 10.0, "a": 1.0, "a_wide": 10.0, "s_list": [0.05, 0.1, 0.25, 0.5, 1.0], "x_max": 2.0, "x_num": 401},
        "homotopy f(eps x + B/s) to f(x) P",
    ),
    "alpha-isometry": Experiment(run_alpha_isometry, {"t_list": [0.5, 1.0, 4.0], "n_list": [1, 2]}, "Gaussian embedding is isometric"),
    "commutator-decay": Experiment(run_commutator_decay, {"N": 1024, "L": 16.0, "t_max": 128}, "commutator [M_f, g(D/t)] decays like 1/t"),
    "diffeo-covariance": Experiment(run_diffeo_covariance, {"N": 256, "strength": 0.3, "t_list": _DYADIC}, "asymptotic diffeomorphism covariance"),
    "glue-independence": Experiment(run_glue_independence, {"N": 256, "shift": 32, "t_list": [4, 8, 16, 32, 64]}, "glued quantization independent of the cover"),
    "lemma45": Experiment(run_local_decay, {"N": 256, "t_list": [4, 16, 64, 128]}, "three decay estimates for f(D/t)"),
    "freeze": Experiment(run_freeze, {"N": 256, "x0": 1.0, "t": 64, "half_widths": [float(np.pi / 2), float(np.pi / 8), float(np.pi / 16)]}, "coefficient freezing"),
    "quantization-convergence": Experiment(
        run_quantization_convergence,
        {"N": 256, "t_list": _DYADIC, "monotone_on": [8, 16, 32, 64], "target_t": 64, "torus_flux": None, "torus_N": 24},
        "symbol quantization converges to f(D/t)",
    ),
    "index-check": Experiment(run_index_check, dict(_INDEX_DEFAULTS), "analytic index equals topological index in K0(A)"),
    "cayley-index": Experiment(run_cayley_index, {**_INDEX_DEFAULTS, "t_small_factor": 0.1}, "Cayley transform index equals analytic index"),
}


def merged_parameters(name: str, params: dict) -> dict:
    exp = EXPERIMENTS[name]
    unknown = set(params) - set(exp.defaults)
    if unknown:
        raise KeyError(f"unknown parameter(s) for {name}: {sorted(unknown)}")
    return {**exp.defaults, **params}
