"""Comparison tables for ablation results: aligned text plus JSON.

Column schemas (in order):

* ``steps``: variant, params, flops_m, mpjpe_mm
* ``levels``: label, active_levels, mpjpe_mm, delta_mm
* ``frames``: frames, params, mpjpe_mm, mpjve_mm

``delta_mm`` is the MPJPE change relative to the row labelled ``all``.
"""
import json

SCHEMAS = {
    "steps": ("variant", "params", "flops_m", "mpjpe_mm"),
    "levels": ("label", "active_levels", "mpjpe_mm", "delta_mm"),
    "frames": ("frames", "params", "mpjpe_mm", "mpjve_mm"),
}


class ReportError(OSError):
    """The report could not be written."""


def table_rows(mode, summary):
    """Project summarized rows onto the mode's column schema."""
    if mode not in SCHEMAS:
        raise ValueError(f"unknown report mode {mode!r}")
    base = next((r["mpjpe_mm"] for r in summary if r["label"] == "all"), None)
    rows = []
    for r in summary:
        row = {
            "variant": r["variant"], "label": r["label"], "frames": r["frames"],
            "params": r["params"], "flops_m": r["flops"] / 1e6,
            "active_levels": "".join("1" if a else "0" for a in r["active_levels"]),
            "mpjpe_mm": r["mpjpe_mm"], "mpjve_mm": r.get("mpjve_mm"),
            "delta_mm": None if base is None else r["mpjpe_mm"] - base,
        }
        rows.append({k: row[k] for k in SCHEMAS[mode]})
    return rows


def _cell(value):
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def format_table(mode, rows):
    cols = SCHEMAS[mode]
    cells = [list(cols)] + [[_cell(r[c]) for c in cols] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def emit_report(mode, summary, stem, extra=None):
    """Write ``<stem>.txt`` (aligned table) and ``<stem>.json``.

    ``extra`` is merged into the JSON document (e.g. the protocol and the
    per-seed results). Returns the two paths.
    """
    rows = table_rows(mode, summary)
    doc = {"mode": mode, "columns": list(SCHEMAS[mode]), "rows": rows}
    doc.update(extra or {})
    txt, js = f"{stem}.txt", f"{stem}.json"
    try:
        with open(txt, "w", encoding="utf-8") as fh:
            fh.write(format_table(mode, rows))
        with open(js, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise ReportError(f"cannot write report {stem}: {exc}") from exc
    return txt, js


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
