"""Evaluation metrics and the thermodynamic consistency audit."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ConfigurationError, DataError


def rmse(predicted, truth):
    """Root mean squared pointwise difference."""
    a = np.asarray(predicted, dtype=np.float64).ravel()
    b = np.asarray(truth, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise DataError(f"rmse inputs differ in size: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def hausdorff(x_points, y_points):
    """Symmetric Hausdorff distance between two point sets (brute force)."""
    x = np.atleast_2d(np.asarray(x_points, dtype=np.float64))
    y = np.atleast_2d(np.asarray(y_points, dtype=np.float64))
    if x.size == 0 or y.size == 0:
        raise DataError("hausdorff needs non-empty point sets")
    if x.shape[1] != y.shape[1]:
        raise DataError("point sets must share the same dimension")
    diff = x[:, None, :] - y[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


@dataclass
class AuditSummary:
    """Pass/fail summary of a rollout's thermodynamic behavior."""

    max_abs_energy_rate: float
    min_entropy_rate: float
    max_degeneracy_residual: float
    min_m_eigenvalue: float
    tol_energy: float
    tol_entropy: float
    tol_degeneracy: float
    energy_ok: bool
    entropy_ok: bool
    degeneracy_ok: bool

    @property
    def passed(self):
        return self.energy_ok and self.entropy_ok and self.degeneracy_ok


def thermo_audit(rollout, tol_energy=1e-4, tol_entropy=1e-4, tol_degeneracy=1e-3):
    """Check a rollout against energy/entropy/degeneracy tolerances."""
    if len(rollout.energy_rate) == 0:
        raise DataError("rollout has no recorded steps to audit")
    max_e = float(np.max(np.abs(rollout.energy_rate)))
    min_s = float(np.min(rollout.entropy_rate))
    max_deg = float(np.max(rollout.degeneracy_residual))
    min_eig = float(np.min(rollout.m_min_eigenvalue))
    return AuditSummary(
        max_abs_energy_rate=max_e,
        min_entropy_rate=min_s,
        max_degeneracy_residual=max_deg,
        min_m_eigenvalue=min_eig,
        tol_energy=tol_energy,
        tol_entropy=tol_entropy,
        tol_degeneracy=tol_degeneracy,
        energy_ok=max_e <= tol_energy,
        entropy_ok=min_s >= -tol_entropy,
        degeneracy_ok=max_deg <= tol_degeneracy,
    )


@dataclass
class EvalReport:
    """Aggregated evaluation results, serializable to JSON + CSV."""

    rmse_series: list = field(default_factory=list)
    hausdorff_series: list = field(default_factory=list)
    group_errors: dict = field(default_factory=dict)  # group -> {"sae":, "pod":}
    audit: AuditSummary | None = None
    bundle_checksum: str = ""
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        doc = {
            "schema": "gslosh-report/1",
            "bundle_checksum": self.bundle_checksum,
            "metadata": self.metadata,
            "group_errors": self.group_errors,
            "rmse": {
                "count": len(self.rmse_series),
                "max": max(self.rmse_series) if self.rmse_series else None,
                "mean": float(np.mean(self.rmse_series)) if self.rmse_series else None,
            },
            "hausdorff": {
                "count": len(self.hausdorff_series),
                "max": max(self.hausdorff_series) if self.hausdorff_series else None,
                "mean": float(np.mean(self.hausdorff_series))
                if self.hausdorff_series
                else None,
            },
            "audit": asdict(self.audit) if self.audit else None,
        }
        return doc

    def write(self, json_path, series_path=None):
        """Emit the JSON summary and, optionally, the per-frame CSV series."""
        with open(json_path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if series_path is not None:
            with open(series_path, "w") as fh:
                fh.write("frame,rmse,hausdorff\n")
                for i, (r, h) in enumerate(
                    zip(self.rmse_series, self.hausdorff_series)
                ):
                    fh.write(f"{i},{r!r},{h!r}\n")


def build_report(
    group_errors=None,
    rmse_series=None,
    hausdorff_series=None,
    rollout=None,
    tolerances=None,
    bundle_checksum="",
    metadata=None,
):
    """Assemble an EvalReport; deterministic for identical inputs."""
    if group_errors is not None:
        for name, methods in group_errors.items():
            if not {"sae", "pod"} <= set(methods):
                raise ConfigurationError(
                    f"group {name!r} is missing a method column (need sae and pod)"
                )
    audit = None
    if rollout is not None:
        audit = thermo_audit(rollout, **(tolerances or {}))
    return EvalReport(
        rmse_series=list(rmse_series or []),
        hausdorff_series=list(hausdorff_series or []),
        group_errors=dict(group_errors or {}),
        audit=audit,
        bundle_checksum=bundle_checksum,
        metadata=dict(metadata or {}),
    )
