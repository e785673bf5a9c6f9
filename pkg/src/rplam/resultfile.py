"""Structured-text result files: key-value header plus embedded CSV blocks.

The format is deliberately dependency-free on the reading side (plain
text, full-precision floats) so downstream plotting or scripting needs no
coupling to this package. A file holds everything prediction requires:
the standardization map, the spline bases with their coefficients, the
intercept, scale and regression coefficients, and, for selection runs,
the per-candidate criterion table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .splines import CenteredBasis, DomainMap, SplineSpec
from .standardize import ColumnTransform, RunConfig, StandardizationMap

FORMAT_HEADER = "rplam-result 1"
ETA_GRID_POINTS = 101


@dataclass
class FittedModel:
    """Everything needed to reproduce fitted values on new data."""

    config: RunConfig
    smap: StandardizationMap
    mu_hat: float
    sigma_hat: float
    beta: np.ndarray                  # standardized units, hard zeros kept
    bases: list[CenteredBasis]        # one per additive covariate
    spline_coefs: list[np.ndarray]
    meta: dict = field(default_factory=dict)
    rbic_table: list | None = None    # rows (lambda tuple, rbic, df, converged)

    def beta_original(self) -> np.ndarray:
        """Back-transformed slopes: beta_std / dispersion per column."""
        disp = np.array([
            1.0 if self.smap[c].method == "binary" else self.smap[c].dispersion
            for c in self.config.linear
        ])
        return self.beta / disp

    def predict_frame(self, frame) -> np.ndarray:
        """Fitted values (original response units) for a raw-unit frame."""
        from .standardize import apply_map  # local to avoid cycle at import

        data = apply_map(frame, self.config, self.smap, clamp=True,
                         require_response=False)
        yhat = self.mu_hat + data.Z @ self.beta
        for j, (basis, coef) in enumerate(zip(self.bases, self.spline_coefs)):
            yhat = yhat + basis.eval_component(coef, data.X[:, j])
        return yhat


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _join_floats(values) -> str:
    return ",".join(repr(float(v)) for v in np.asarray(values, dtype=float))


def write_result(path, model: FittedModel, *, command: str, extra_meta=None):
    """Serialize a fitted model; the created line is the only non-
    deterministic content."""
    lines = [FORMAT_HEADER]
    lines.append(f"created: {datetime.now(timezone.utc).isoformat()}")
    meta = {"command": command}
    meta.update(model.meta)
    if extra_meta:
        meta.update(extra_meta)
    for key, value in meta.items():
        lines.append(f"{key}: {_fmt(value)}")
    lines.append(f"response: {model.config.response}")
    lines.append(f"mu_hat: {repr(float(model.mu_hat))}")
    lines.append(f"sigma_hat: {repr(float(model.sigma_hat))}")
    lines.append("")

    lines.append("[beta]")
    lines.append("column,estimate,estimate_original,selected")
    beta_orig = model.beta_original()
    for name, b, bo in zip(model.config.linear, model.beta, beta_orig):
        lines.append(f"{name},{repr(float(b))},{repr(float(bo))},{int(b != 0.0)}")
    lines.append("")

    lines.append("[standardization]")
    lines.append("column,role,method,location,dispersion,unit_lo,unit_hi")
    for col in ([model.config.response] + list(model.config.linear)
                + list(model.config.additive)):
        tr = model.smap[col]
        lo = repr(tr.unit_map.lo) if tr.unit_map else ""
        hi = repr(tr.unit_map.hi) if tr.unit_map else ""
        lines.append(
            f"{col},{tr.role},{tr.method},{repr(tr.location)},"
            f"{repr(tr.dispersion)},{lo},{hi}"
        )
    lines.append("")

    for name, basis, coef in zip(model.config.additive, model.bases,
                                 model.spline_coefs):
        lines.append(f"[basis:{name}]")
        lines.append(f"order: {basis.spec.order}")
        lines.append(f"knots: {_join_floats(basis.knots)}")
        lines.append(f"coef: {_join_floats(coef)}")
        lines.append("")

    if model.config.additive:
        lines.append("[eta_grid]")
        lines.append("x," + ",".join(model.config.additive))
        xs = np.linspace(0.0, 1.0, ETA_GRID_POINTS)
        cols = [basis.eval_reduced(xs) @ coef
                for basis, coef in zip(model.bases, model.spline_coefs)]
        for i, x in enumerate(xs):
            vals = ",".join(repr(float(c[i])) for c in cols)
            lines.append(f"{repr(float(x))},{vals}")
        lines.append("")

    if model.rbic_table is not None:
        lines.append("[rbic_table]")
        lines.append("lambda,rbic,df,converged")
        for lam, crit, df, conv in model.rbic_table:
            lam_txt = ";".join(repr(float(x)) for x in lam)
            lines.append(f"{lam_txt},{repr(float(crit))},{df},{int(conv)}")
        lines.append("")

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_sections(text: str):
    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {}
    current = None
    for raw in text.splitlines():
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = []
        elif current is None:
            if ":" in line:
                key, _, value = line.partition(":")
                header[key.strip()] = value.strip()
        else:
            sections[current].append(line)
    return header, sections


def _csv_rows(lines):
    head = lines[0].split(",")
    return head, [line.split(",") for line in lines[1:]]


def read_result(path) -> FittedModel:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if not text.startswith(FORMAT_HEADER):
        raise ValueError(f"{path} is not a recognized result file")
    header, sections = _parse_sections(text)

    _, std_rows = _csv_rows(sections["standardization"])
    transforms = {}
    linear, additive = [], []
    response = header["response"]
    for col, role, method, loc, disp, lo, hi in std_rows:
        unit_map = DomainMap(float(lo), float(hi)) if lo else None
        transforms[col] = ColumnTransform(col, role, method, float(loc),
                                          float(disp), unit_map)
        if role == "linear":
            linear.append(col)
        elif role == "additive":
            additive.append(col)
    smap = StandardizationMap(transforms)
    binary = [c for c in linear if transforms[c].method == "binary"]
    config = RunConfig(response, linear, additive, binary)

    _, beta_rows = _csv_rows(sections["beta"])
    beta = np.array([float(row[1]) for row in beta_rows])

    bases, coefs = [], []
    for name in additive:
        block = sections[f"basis:{name}"]
        kv = dict(line.partition(":")[::2] for line in block)
        kv = {k.strip(): v.strip() for k, v in kv.items()}
        order = int(kv["order"])
        knots = np.array([float(x) for x in kv["knots"].split(",")])
        coef = np.array([float(x) for x in kv["coef"].split(",")])
        spec = SplineSpec(order=order, internal_knots=knots.size - 2 * order)
        bases.append(CenteredBasis(knots, spec))
        coefs.append(coef)

    rbic_table = None
    if "rbic_table" in sections:
        _, rows = _csv_rows(sections["rbic_table"])
        rbic_table = [
            (tuple(float(x) for x in lam.split(";")), float(crit), int(df),
             bool(int(conv)))
            for lam, crit, df, conv in rows
        ]

    meta = {k: v for k, v in header.items()
            if k not in ("created", "response", "mu_hat", "sigma_hat")}
    return FittedModel(
        config=config,
        smap=smap,
        mu_hat=float(header["mu_hat"]),
        sigma_hat=float(header["sigma_hat"]),
        beta=beta,
        bases=bases,
        spline_coefs=coefs,
        meta=meta,
        rbic_table=rbic_table,
    )
