import logging
from pathlib import Path
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np
import pandas as pd

from src.const import REGIONS, REPORT_ROWS
from src.errors import ConsistencyError
from src.services.metrics import dice, hausdorff_mm, surface_area_mm2
from src.services.statistics import bland_altman_percent, pearson_r, wilcoxon_signed_rank
from src.types.exam import Exam, Mask
from src.types.metrics import RegionReport, RegionRow, SliceMetrics

logger = logging.getLogger(__name__)

REPORT_COLUMNS = [
    "region",
    "n_slices",
    "mean_dsc_percent",
    "mean_hd_mm",
    "n_hd_undefined",
    "pearson_r",
    "ba_bias_percent",
    "ba_sd_percent",
    "wilcoxon_p",
]
SLICE_COLUMNS = ["exam_id", "slice_index", "region", "dsc", "hd_mm", "area_ref_mm2", "area_pred_mm2"]


def _check_alignment(
    preds: Mapping[str, Sequence[Mask]], refs: Mapping[str, Sequence[Mask]], exams: Mapping[str, Exam]
) -> None:
    problems: List[str] = []
    for exam_id in sorted(set(refs) - set(preds)):
        problems.append(f"{exam_id}: no predictions")
    for exam_id in sorted(set(preds) - set(refs)):
        problems.append(f"{exam_id}: no reference masks")
    for exam_id in sorted(set(preds) & set(refs)):
        if exam_id not in exams:
            problems.append(f"{exam_id}: no exam metadata")
            continue
        n_slices = exams[exam_id].num_slices
        if len(preds[exam_id]) != n_slices or len(refs[exam_id]) != n_slices:
            problems.append(
                f"{exam_id}: {len(preds[exam_id])} predicted and {len(refs[exam_id])} reference masks "
                f"for {n_slices} slices"
            )
            continue
        for index, (pred, ref) in enumerate(zip(preds[exam_id], refs[exam_id])):
            if pred.shape != ref.shape:
                problems.append(f"{exam_id}[{index}]: predicted shape {pred.shape} vs reference {ref.shape}")
    if problems:
        raise ConsistencyError("Predictions and references are misaligned: " + "; ".join(problems))


def _aggregate(region: str, metrics: Sequence[SliceMetrics]) -> RegionRow:
    if not metrics:
        logger.warning(f"Region {region} has no slices")
        return RegionRow(region=region)

    defined_hd = [m.hd_mm for m in metrics if m.hd_mm is not None]
    if not defined_hd:
        logger.warning(f"Region {region}: Hausdorff distance undefined on every slice")

    refs = [m.area_ref_mm2 for m in metrics]
    preds = [m.area_pred_mm2 for m in metrics]
    r = None
    if len(metrics) >= 2 and np.ptp(refs) > 0 and np.ptp(preds) > 0:
        r = pearson_r(refs, preds)

    paired = [(p, q) for p, q in zip(preds, refs) if p + q > 0]
    bias = sd = None
    if len(paired) >= 2:
        bias, sd = bland_altman_percent([p for p, _ in paired], [q for _, q in paired])

    return RegionRow(
        region=region,
        n_slices=len(metrics),
        mean_dsc_percent=100.0 * float(np.mean([m.dsc for m in metrics])),
        mean_hd_mm=float(np.mean(defined_hd)) if defined_hd else None,
        n_hd_undefined=len(metrics) - len(defined_hd),
        pearson_r=r,
        ba_bias_percent=bias,
        ba_sd_percent=sd,
        n_ba_excluded=len(metrics) - len(paired),
    )


def evaluate_exam_set(
    preds: Mapping[str, Sequence[Mask]],
    refs: Mapping[str, Sequence[Mask]],
    exams: Mapping[str, Exam],
) -> Tuple[RegionReport, List[SliceMetrics]]:
    """
    Score predicted masks against references and aggregate per region.

    Args:
        preds (Mapping[str, Sequence[Mask]]): Predicted masks per exam, one per slice.
        refs (Mapping[str, Sequence[Mask]]): Reference masks per exam, one per slice.
        exams (Mapping[str, Exam]): Exams supplying pixel spacing and region labels.

    Returns:
        Tuple[RegionReport, List[SliceMetrics]]: The Base/Middle/Apex/Overall report and per-slice metrics
        in (exam id, slice index) order.

    Raises:
        ConsistencyError: If predictions and references are not aligned slice by slice.
    """
    _check_alignment(preds, refs, exams)

    slices: List[SliceMetrics] = []
    for exam_id in sorted(refs):
        exam = exams[exam_id]
        spacing = exam.pixel_spacing_mm
        for index, (pred, ref) in enumerate(zip(preds[exam_id], refs[exam_id])):
            slices.append(
                SliceMetrics(
                    exam_id=exam_id,
                    slice_index=index,
                    region=exam.slices[index].region,
                    dsc=dice(pred, ref),
                    hd_mm=hausdorff_mm(pred, ref, spacing),
                    area_ref_mm2=surface_area_mm2(ref, spacing),
                    area_pred_mm2=surface_area_mm2(pred, spacing),
                )
            )

    rows: Dict[str, RegionRow] = {
        region: _aggregate(region, [m for m in slices if m.region == region]) for region in REGIONS
    }
    rows["overall"] = _aggregate("overall", slices)

    wilcoxon = wilcoxon_signed_rank([m.area_pred_mm2 - m.area_ref_mm2 for m in slices]) if slices else None
    report = RegionReport(
        rows=rows,
        wilcoxon_p=wilcoxon.p_value if wilcoxon else None,
        wilcoxon_w=wilcoxon.w_statistic if wilcoxon else None,
    )
    return report, slices


def write_report(report: RegionReport, slices: Sequence[SliceMetrics], out_dir: Path) -> Tuple[Path, Path]:
    """Write report.csv (one row per region) and slices.csv (one row per slice)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report_rows = []
    for region in REPORT_ROWS:
        row = report.rows[region].model_dump(exclude={"n_ba_excluded"})
        row["wilcoxon_p"] = report.wilcoxon_p if region == "overall" else None
        report_rows.append(row)
    report_path = out_dir / "report.csv"
    pd.DataFrame(report_rows, columns=REPORT_COLUMNS).to_csv(report_path, index=False)

    slices_path = out_dir / "slices.csv"
    pd.DataFrame([m.model_dump() for m in slices], columns=SLICE_COLUMNS).to_csv(slices_path, index=False)
    return report_path, slices_path
