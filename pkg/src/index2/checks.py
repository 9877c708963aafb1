"""Residual-based check reports used by every verification routine."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    name: str
    law: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "law": self.law,
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "pass": bool(self.passed),
        }


@dataclass
class CheckReport:
    title: str
    records: list[CheckRecord] = field(default_factory=list)

    def add(self, name: str, law: str, residual: float, tolerance: float) -> CheckRecord:
        rec = CheckRecord(name, law, float(residual), float(tolerance))
        self.records.append(rec)
        return rec

    def add_bool(self, name: str, law: str, ok: bool) -> CheckRecord:
        # boolean facts are encoded as residual 0/1 against tolerance 1/2
        return self.add(name, law, 0.0 if ok else 1.0, 0.5)

    def extend(self, other: "CheckReport") -> None:
        self.records.extend(other.records)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.records)

    @property
    def max_residual(self) -> float:
        return max((r.residual for r in self.records), default=0.0)

    def failures(self) -> list[CheckRecord]:
        return [r for r in self.records if not r.passed]

    def record(self, name: str) -> CheckRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "pass": bool(self.passed),
            "records": [r.to_dict() for r in self.records],
        }

    def __str__(self) -> str:
        lines = [f"== {self.title} =="]
        for r in self.records:
            status = "PASS" if r.passed else "FAIL"
            lines.append(f"  [{status}] {r.name}: residual {r.residual:.3e} (tol {r.tolerance:.1e})  {r.law}")
        return "\n".join(lines)
