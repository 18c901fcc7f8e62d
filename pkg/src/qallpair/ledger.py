from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class ResourceLedger:
    """Per-run tally of quantum resources. Counters only ever grow."""

    grover_iterations: int = 0
    oracle_queries: int = 0
    measurement_shots: int = 0
    qpe_qubits_used: int = 0

    def record(self, *, grover_iterations=0, oracle_queries=0, measurement_shots=0,
               qpe_qubits_used=0) -> None:
        for name, n in (("grover_iterations", grover_iterations),
                        ("oracle_queries", oracle_queries),
                        ("measurement_shots", measurement_shots),
                        ("qpe_qubits_used", qpe_qubits_used)):
            if n < 0:
                raise ValueError(f"{name} increment must be non-negative")
            setattr(self, name, getattr(self, name) + int(n))

    def merge(self, other: "ResourceLedger") -> None:
        self.record(**other.as_dict())

    def as_dict(self) -> dict[str, int]:
        return asdict(self)
