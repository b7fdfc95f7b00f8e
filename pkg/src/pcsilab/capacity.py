"""Closed-form capacities, lower bounds, and download-cost comparisons.

Rates are reported together with the normalized download cost (symbols
downloaded per message), which is the reciprocal of the rate.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from fractions import Fraction

KIND_EXACT = "exact"
KIND_LOWER_BOUND = "lower-bound"
KIND_NOT_COVERED = "not-covered"


@dataclass(frozen=True)
class CapacityEntry:
    setting: str
    K: int
    M: int
    D: int
    value: Fraction | None
    kind: str

    @property
    def cost(self) -> Fraction | None:
        return None if self.value is None else 1 / self.value

    def to_json_dict(self) -> dict:
        return {
            "setting": self.setting,
            "K": self.K, "M": self.M, "D": self.D,
            "rate": None if self.value is None else str(self.value),
            "cost": None if self.cost is None else str(self.cost),
            "kind": self.kind,
        }


def _check(K: int, M: int, D: int) -> None:
    if D < 1 or M < 0 or K < M + D:
        raise ValueError(f"invalid parameters K={K} M={M} D={D}")


def ipc_capacity(K: int, M: int, D: int) -> Fraction:
    """Individually-private computation capacity (same for coded and
    uncoded side information): 1 / ceil(K/(M+D))."""
    _check(K, M, D)
    return Fraction(1, -(-K // (M + D)))


def jpc_si_lower(K: int, M: int, D: int) -> Fraction:
    """Jointly-private computation with uncoded side information:
    capacity >= 1 / (ceil((K-M-D)/(floor(M/D)+1)) + 1)."""
    _check(K, M, D)
    s = M // D + 1
    return Fraction(1, -(-(K - M - D) // s) + 1)


def jpc_csi_lower(K: int, M: int, D: int) -> Fraction | None:
    """Jointly-private computation with coded side information: the same
    bound when floor(M/D)+1 divides K-M-D, otherwise not covered (None)."""
    _check(K, M, D)
    s = M // D + 1
    if (K - M - D) % s != 0:
        return None
    return Fraction(1, (K - M - D) // s + 1)


def capacity_entries(K: int, M: int, D: int) -> list[CapacityEntry]:
    csi = jpc_csi_lower(K, M, D)
    return [
        CapacityEntry("IPC-SI", K, M, D, ipc_capacity(K, M, D), KIND_EXACT),
        CapacityEntry("IPC-CSI", K, M, D, ipc_capacity(K, M, D), KIND_EXACT),
        CapacityEntry("JPC-SI", K, M, D, jpc_si_lower(K, M, D), KIND_LOWER_BOUND),
        CapacityEntry("JPC-CSI", K, M, D, csi,
                      KIND_LOWER_BOUND if csi is not None else KIND_NOT_COVERED),
    ]


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    cost: Fraction
    note: str = ""


def comparison_table(K: int, M: int, D: int) -> list[ComparisonRow]:
    """Download-cost comparison: private computation of one combination
    versus privately retrieving the messages and combining locally."""
    _check(K, M, D)
    n = -(-K // (M + D))
    rows = [
        ComparisonRow("IPC compute", Fraction(n),
                      "one combination, individual privacy"),
        ComparisonRow("IPIR-SI retrieve", Fraction(min(K - M * (K // (M + D)), D * n)),
                      "retrieve the D messages, individual privacy"),
        ComparisonRow("JPC-SI compute", 1 / jpc_si_lower(K, M, D),
                      "one combination, joint privacy, uncoded SI"),
    ]
    csi = jpc_csi_lower(K, M, D)
    if csi is not None:
        rows.append(ComparisonRow("JPC-CSI compute", 1 / csi,
                                  "one combination, joint privacy, coded SI"))
    if M == 2 and D == 2:
        rows.append(ComparisonRow("JPIR retrieve-two",
                                  Fraction(min(K - 2, K - K // 3)),
                                  "retrieve two messages, joint privacy"))
    rows.append(ComparisonRow("JPIR-CSI retrieve", Fraction(K - 1),
                              "retrieve D messages with one coded combination"))
    return rows


# ------------------------------------------------------------------ emitters

def grid_entries(k_range, M: int, D: int) -> list[CapacityEntry]:
    out = []
    for K in k_range:
        if K >= M + D:
            out.extend(capacity_entries(K, M, D))
    return out


def entries_to_json(entries) -> str:
    return json.dumps([e.to_json_dict() for e in entries], indent=2)


def entries_to_csv(entries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["K", "M", "D", "setting", "rate", "cost", "kind"])
    for e in entries:
        w.writerow([e.K, e.M, e.D, e.setting,
                    "" if e.value is None else str(e.value),
                    "" if e.cost is None else str(e.cost), e.kind])
    return buf.getvalue()


def entries_to_text(entries) -> str:
    lines = [f"{'K':>3} {'M':>3} {'D':>3} {'setting':<8} {'rate':>8} {'cost':>6} kind"]
    for e in entries:
        rate = "-" if e.value is None else str(e.value)
        cost = "-" if e.cost is None else str(e.cost)
        lines.append(f"{e.K:>3} {e.M:>3} {e.D:>3} {e.setting:<8} {rate:>8} {cost:>6} {e.kind}")
    return "\n".join(lines)
