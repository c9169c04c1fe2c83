"""Labeled symmetric distance matrices and their CSV form.

The CSV layout is a header row of labels followed by the square matrix,
one row per line, first column = row label.  Lines starting with '#'
are metadata comments and are skipped on read.
"""

from __future__ import annotations

import io

import numpy as np

from .errors import ParseError, ValidationError


class DistanceMatrix:
    """Symmetric nonnegative matrix with zero diagonal over labeled items."""

    __slots__ = ("labels", "values")

    def __init__(self, labels, values):
        self.labels = [str(x) for x in labels]
        self.values = np.array(values, dtype=float)
        n = len(self.labels)
        if self.values.shape != (n, n):
            raise ValidationError(f"matrix shape {self.values.shape} does not "
                                  f"match {n} labels")
        if len(set(self.labels)) != n:
            raise ValidationError("duplicate labels")
        if not np.isfinite(self.values).all():
            raise ValidationError("non-finite distances")
        if (self.values < 0).any():
            raise ValidationError("negative distances")
        if np.abs(np.diag(self.values)).max(initial=0.0) != 0.0:
            raise ValidationError("diagonal must be exactly zero")
        if not np.array_equal(self.values, self.values.T):
            raise ValidationError("matrix must be exactly symmetric")

    def __len__(self):
        return len(self.labels)

    def submatrix(self, keep) -> "DistanceMatrix":
        idx = [self.labels.index(k) for k in keep]
        return DistanceMatrix(list(keep), self.values[np.ix_(idx, idx)])

    def max(self) -> float:
        return float(self.values.max())

    def to_csv(self, header_lines=()) -> str:
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write(",".join([""] + self.labels) + "\n")
        for lab, row in zip(self.labels, self.values):
            buf.write(lab + "," + ",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "DistanceMatrix":
        rows = [ln for ln in text.splitlines()
                if ln.strip() and not ln.lstrip().startswith("#")]
        if not rows:
            raise ParseError("empty distance matrix")
        header = rows[0].split(",")
        labels = [h.strip() for h in header[1:]]
        if not labels:
            raise ParseError("matrix header has no labels")
        data = []
        row_labels = []
        for ln in rows[1:]:
            parts = [p.strip() for p in ln.split(",")]
            if len(parts) != len(labels) + 1:
                raise ParseError(f"row {parts[0]!r} has {len(parts) - 1} entries, "
                                 f"expected {len(labels)}")
            row_labels.append(parts[0])
            try:
                data.append([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise ParseError(f"bad number in row {parts[0]!r}") from exc
        if row_labels != labels:
            raise ParseError("row labels do not match header labels")
        values = np.array(data)
        values = 0.5 * (values + values.T)  # forgive printing asymmetry
        np.fill_diagonal(values, 0.0)
        try:
            return cls(labels, values)
        except ValidationError as exc:
            raise ParseError(str(exc)) from exc
