"""Aligned text-table rendering for report files."""

from __future__ import annotations

from typing import Sequence


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Right-pad columns so headers and cells line up; first column left-aligned,
    the rest right-aligned."""
    table = [list(headers)] + [list(r) for r in rows]
    widths = [max(len(row[col]) for row in table) for col in range(len(headers))]
    lines = []
    for row_idx, row in enumerate(table):
        cells = []
        for col, cell in enumerate(row):
            if col == 0:
                cells.append(cell.ljust(widths[col]))
            else:
                cells.append(cell.rjust(widths[col]))
        lines.append("  ".join(cells).rstrip())
        if row_idx == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def render_two_level_table(
    groups: Sequence[tuple[str, Sequence[str]]],
    rows: Sequence[tuple[str, Sequence[str]]],
    label_header: str = "",
) -> str:
    """Two header rows: group names spanning their sub-columns, then the
    sub-column names; used for report shapes like judge x metric grids."""
    sub_headers = [label_header] + [sub for _, subs in groups for sub in subs]
    body = [[label] + list(cells) for label, cells in rows]
    widths = [len(h) for h in sub_headers]
    for row in body:
        for col, cell in enumerate(row):
            widths[col] = max(widths[col], len(cell))

    group_cells = [" " * widths[0]]
    col = 1
    for name, subs in groups:
        span = sum(widths[col : col + len(subs)]) + 2 * (len(subs) - 1)
        group_cells.append(name.center(span))
        col += len(subs)
    lines = ["  ".join(group_cells).rstrip()]

    header_cells = [sub_headers[0].ljust(widths[0])] + [
        h.rjust(widths[i + 1]) for i, h in enumerate(sub_headers[1:])
    ]
    lines.append("  ".join(header_cells).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in body:
        cells = [row[0].ljust(widths[0])] + [
            cell.rjust(widths[i + 1]) for i, cell in enumerate(row[1:])
        ]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
